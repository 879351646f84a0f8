#include "bwesid/audio_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "bwesid/error.hpp"

namespace bwesid {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t LoadU16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t LoadU32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void StoreU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void StoreU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void StoreTag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::vector<std::uint8_t> Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void Spill(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path.string());
}

// A-law segment end points in the 13-bit magnitude domain.
constexpr std::array<int, 8> kSegmentEnd = {0x1F, 0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF};

}  // namespace

void ValidateBuffer(const AudioBuffer& buffer) {
  Require(buffer.sample_rate_hz > 0, "sample rate must be positive");
  for (double s : buffer.samples) {
    if (!std::isfinite(s)) Fail(ErrorKind::kInvalidArgument, "buffer holds non-finite samples");
  }
}

void RequirePipelineRate(const AudioBuffer& buffer) {
  if (buffer.sample_rate_hz != 8000 && buffer.sample_rate_hz != 16000) {
    Fail(ErrorKind::kInvalidArgument,
         "unsupported sample rate " + std::to_string(buffer.sample_rate_hz) +
             " Hz (expected 8000 or 16000)");
  }
}

std::int16_t ToPcm16(double sample) {
  const double scaled = std::round(sample * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

AudioBuffer ReadWav(const std::filesystem::path& path, ChannelSelect channel) {
  const std::vector<std::uint8_t> bytes = Slurp(path);
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    Fail(ErrorKind::kMalformedData, name + ": not a RIFF/WAVE file");
  }

  bool have_format = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = LoadU32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16 || available < 16) Fail(ErrorKind::kMalformedData, name + ": short fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      format = LoadU16(f);
      channels = LoadU16(f + 2);
      rate = LoadU32(f + 4);
      bits = LoadU16(f + 14);
      if (format == kFormatExtensible && chunk_size >= 40 && available >= 40) {
        format = LoadU16(f + 24);  // sub-format GUID starts with the format tag
      }
      have_format = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Streaming writers leave 0 or 0xFFFFFFFF as a placeholder; anything else
      // larger than the file means the payload was cut off.
      if (chunk_size == 0 || chunk_size == 0xFFFFFFFFu) {
        data_size = available;
      } else if (chunk_size > available) {
        Fail(ErrorKind::kMalformedData, name + ": truncated data chunk");
      } else {
        data_size = chunk_size;
      }
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }

  if (!have_format) Fail(ErrorKind::kMalformedData, name + ": missing fmt chunk");
  if (data == nullptr) Fail(ErrorKind::kMalformedData, name + ": missing data chunk");
  if (format != kFormatPcm) {
    Fail(ErrorKind::kUnsupportedFormat, name + ": only PCM encoding is supported");
  }
  if (bits != 16) {
    Fail(ErrorKind::kUnsupportedFormat,
         name + ": unsupported bit depth " + std::to_string(bits) + " (expected 16)");
  }
  if (channels != 1 && channels != 2) {
    Fail(ErrorKind::kUnsupportedFormat,
         name + ": unsupported channel count " + std::to_string(channels));
  }
  if (rate == 0) Fail(ErrorKind::kMalformedData, name + ": zero sample rate");

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) Fail(ErrorKind::kMalformedData, name + ": empty payload");

  AudioBuffer out;
  out.sample_rate_hz = static_cast<int>(rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* frame = data + i * frame_bytes;
    const double left = FromPcm16(static_cast<std::int16_t>(LoadU16(frame)));
    if (channels == 1) {
      out.samples[i] = left;
      continue;
    }
    const double right = FromPcm16(static_cast<std::int16_t>(LoadU16(frame + 2)));
    switch (channel) {
      case ChannelSelect::kLeft: out.samples[i] = left; break;
      case ChannelSelect::kRight: out.samples[i] = right; break;
      case ChannelSelect::kMix: out.samples[i] = 0.5 * (left + right); break;
    }
  }
  return out;
}

std::size_t WriteWav(const AudioBuffer& buffer, const std::filesystem::path& path) {
  ValidateBuffer(buffer);
  const auto data_bytes = static_cast<std::uint32_t>(buffer.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  StoreTag(out, "RIFF");
  StoreU32(out, 36 + data_bytes);
  StoreTag(out, "WAVE");
  StoreTag(out, "fmt ");
  StoreU32(out, 16);
  StoreU16(out, kFormatPcm);
  StoreU16(out, 1);
  StoreU32(out, static_cast<std::uint32_t>(buffer.sample_rate_hz));
  StoreU32(out, static_cast<std::uint32_t>(buffer.sample_rate_hz) * 2);
  StoreU16(out, 2);
  StoreU16(out, 16);
  StoreTag(out, "data");
  StoreU32(out, data_bytes);

  std::size_t clipped = 0;
  for (double s : buffer.samples) {
    if (s > 1.0 || s < -1.0) ++clipped;
    StoreU16(out, static_cast<std::uint16_t>(ToPcm16(std::clamp(s, -1.0, 1.0))));
  }
  Spill(path, out);
  return clipped;
}

std::uint8_t AlawEncode(std::int16_t linear) {
  int value = linear >> 3;  // 13-bit two's complement
  std::uint8_t mask;
  if (value >= 0) {
    mask = 0xD5;
  } else {
    mask = 0x55;
    value = -value - 1;  // one's complement magnitude
  }
  int segment = 0;
  while (segment < 8 && value > kSegmentEnd[segment]) ++segment;
  if (segment >= 8) return static_cast<std::uint8_t>(0x7F ^ mask);
  int code = segment << 4;
  code |= (segment < 2 ? (value >> 1) : (value >> segment)) & 0x0F;
  return static_cast<std::uint8_t>(code ^ mask);
}

std::int16_t AlawDecode(std::uint8_t code) {
  code ^= 0x55;
  int magnitude = (code & 0x0F) << 4;
  const int segment = (code & 0x70) >> 4;
  switch (segment) {
    case 0: magnitude += 8; break;
    case 1: magnitude += 0x108; break;
    default:
      magnitude += 0x108;
      magnitude <<= segment - 1;
  }
  return static_cast<std::int16_t>((code & 0x80) ? magnitude : -magnitude);
}

std::vector<std::uint8_t> AlawEncodeBuffer(const AudioBuffer& buffer) {
  std::vector<std::uint8_t> codes(buffer.samples.size());
  std::transform(buffer.samples.begin(), buffer.samples.end(), codes.begin(),
                 [](double s) { return AlawEncode(ToPcm16(s)); });
  return codes;
}

AudioBuffer AlawDecodeBuffer(std::span<const std::uint8_t> codes, int sample_rate_hz) {
  AudioBuffer out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.resize(codes.size());
  std::transform(codes.begin(), codes.end(), out.samples.begin(),
                 [](std::uint8_t c) { return FromPcm16(AlawDecode(c)); });
  return out;
}

AudioBuffer AlawRoundTrip(const AudioBuffer& buffer) {
  const auto codes = AlawEncodeBuffer(buffer);
  return AlawDecodeBuffer(codes, buffer.sample_rate_hz);
}

void WriteAlaw(const AudioBuffer& buffer, const std::filesystem::path& path) {
  Require(buffer.sample_rate_hz == 8000, "A-law streams are 8000 Hz");
  Spill(path, AlawEncodeBuffer(buffer));
}

AudioBuffer ReadAlaw(const std::filesystem::path& path) {
  const auto bytes = Slurp(path);
  if (bytes.empty()) Fail(ErrorKind::kMalformedData, path.string() + ": empty payload");
  return AlawDecodeBuffer(bytes, 8000);
}

}  // namespace bwesid

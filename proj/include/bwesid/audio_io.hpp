#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bwesid {

// Mono audio with amplitudes nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate_hz = 0;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

// Throws unless every sample is finite and the rate is positive.
void ValidateBuffer(const AudioBuffer& buffer);

// Throws unless the rate is one of the two the pipeline supports (8 / 16 kHz).
void RequirePipelineRate(const AudioBuffer& buffer);

enum class ChannelSelect { kLeft, kRight, kMix };

// Reads a PCM-16 little-endian WAV file with one or two channels.
AudioBuffer ReadWav(const std::filesystem::path& path,
                    ChannelSelect channel = ChannelSelect::kLeft);

// Writes a PCM-16 mono WAV. Samples outside [-1, 1] are clipped; the number
// of clipped samples is returned.
std::size_t WriteWav(const AudioBuffer& buffer, const std::filesystem::path& path);

// ITU-T G.711 A-law, operating on 16-bit linear samples.
std::uint8_t AlawEncode(std::int16_t linear);
std::int16_t AlawDecode(std::uint8_t code);

// Encodes a normalized buffer to A-law octets (one per sample).
std::vector<std::uint8_t> AlawEncodeBuffer(const AudioBuffer& buffer);
AudioBuffer AlawDecodeBuffer(std::span<const std::uint8_t> codes, int sample_rate_hz = 8000);

// Quantizes to 16 bits, A-law encodes and decodes again.
AudioBuffer AlawRoundTrip(const AudioBuffer& buffer);

// Headerless A-law octet stream (.al), 8000 Hz implied.
void WriteAlaw(const AudioBuffer& buffer, const std::filesystem::path& path);
AudioBuffer ReadAlaw(const std::filesystem::path& path);

// Maps [-1, 1] to the 16-bit integer grid with rounding and saturation.
std::int16_t ToPcm16(double sample);
inline double FromPcm16(std::int16_t value) { return value / 32768.0; }

}  // namespace bwesid

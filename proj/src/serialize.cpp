#include "bwesid/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>

#include "bwesid/error.hpp"

namespace bwesid {

std::uint64_t Fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Fnv1a64(std::string_view text, std::uint64_t seed) {
  return Fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), seed);
}

void ByteWriter::Magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

void ByteWriter::U32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::U64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::String(std::string_view s) {
  U32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::Raw(std::span<const std::uint8_t> data) {
  bytes_.insert(bytes_.end(), data.begin(), data.end());
}

void ByteWriter::Checksum() { U64(Fnv1a64(bytes_)); }

void ByteWriter::Flush(std::ostream& out) const {
  out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
  if (!out) Fail(ErrorKind::kIo, "failed to write model bytes");
}

ByteReader ByteReader::FromStream(std::istream& in) {
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return ByteReader(std::move(bytes));
}

const std::uint8_t* ByteReader::Take(std::size_t n) {
  if (bytes_.size() - pos_ < n) Fail(ErrorKind::kMalformedData, "truncated model data");
  const std::uint8_t* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

void ByteReader::ExpectMagic(std::string_view tag) {
  const std::uint8_t* p = Take(tag.size());
  if (std::memcmp(p, tag.data(), tag.size()) != 0) {
    Fail(ErrorKind::kMalformedData, "bad magic, expected '" + std::string(tag) + "'");
  }
}

std::uint32_t ByteReader::U32() {
  const std::uint8_t* p = Take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::U64() {
  const std::uint8_t* p = Take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

double ByteReader::F64() { return std::bit_cast<double>(U64()); }

std::string ByteReader::String() {
  const std::uint32_t n = U32();
  const std::uint8_t* p = Take(n);
  return {reinterpret_cast<const char*>(p), n};
}

std::vector<std::uint8_t> ByteReader::Raw(std::size_t n) {
  const std::uint8_t* p = Take(n);
  return {p, p + n};
}

void ByteReader::VerifyChecksum() {
  const std::uint64_t expected = Fnv1a64(std::span(bytes_.data(), pos_));
  if (U64() != expected) Fail(ErrorKind::kMalformedData, "checksum mismatch");
}

}  // namespace bwesid

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bwesid {

std::uint64_t Fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t Fnv1a64(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Little-endian byte sink for the binary model formats.
class ByteWriter {
 public:
  void Magic(std::string_view tag);
  void U32(std::uint32_t v);
  void U64(std::uint64_t v);
  void F64(double v);
  void String(std::string_view s);
  void Raw(std::span<const std::uint8_t> data);
  // Appends the FNV-1a checksum of everything written so far.
  void Checksum();

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  void Flush(std::ostream& out) const;

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}
  static ByteReader FromStream(std::istream& in);

  void ExpectMagic(std::string_view tag);
  std::uint32_t U32();
  std::uint64_t U64();
  double F64();
  std::string String();
  std::vector<std::uint8_t> Raw(std::size_t n);
  // Reads a checksum and compares it with the bytes consumed before it.
  void VerifyChecksum();
  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::uint8_t* Take(std::size_t n);
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace bwesid

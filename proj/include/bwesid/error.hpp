#pragma once

#include <stdexcept>
#include <string>

namespace bwesid {

enum class ErrorKind {
  kInvalidArgument,    // precondition violated by the caller
  kUnsupportedFormat,  // file parsed but encoding not handled
  kMalformedData,      // file or payload is corrupt
  kIo,
  kInsufficientData,
  kNumerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void Require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorKind::kInvalidArgument, what);
}

}  // namespace bwesid

#pragma once

#include <stdexcept>
#include <string>

namespace canids {

// Mirrors the C API status codes in canids.h.
enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Format = 3,
  Shape = 4,
  Numeric = 5,
  Config = 6,
  NotConverged = 7,
  Write = 8, // an output could not be written after validation passed
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string &what) {
  if (!cond) {
    fail(code, what);
  }
}

} // namespace canids

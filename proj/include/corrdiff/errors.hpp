#pragma once

#include <stdexcept>
#include <string>

namespace corrdiff {

enum class ErrorCode {
  NonTriangularLength,
  NonPositiveDiagonal,
  EmptyGroup,
  DimensionMismatch,
  OutOfDomain,
  PsdViolation,
  EntryOutOfRange,
  QuotientPole,
  ZeroAlpha,
  DegenerateWeights,
  NotIdentifiable,
  SingularBread,
  NonPositiveDefinite,
  DegenerateVariance,
  JackknifeFoldFailed,
  InvalidArgument,
  ConfigError,
  IoError,
};

// Input/config problems map to CLI exit code 2, numerical failures to 3.
enum class ErrorKind { Input, Numerical };

const char* error_name(ErrorCode code);
ErrorKind error_kind(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }
  ErrorKind kind() const { return error_kind(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace corrdiff

#include "corrdiff/errors.hpp"

namespace corrdiff {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonTriangularLength: return "NonTriangularLength";
    case ErrorCode::NonPositiveDiagonal: return "NonPositiveDiagonal";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::PsdViolation: return "PsdViolation";
    case ErrorCode::EntryOutOfRange: return "EntryOutOfRange";
    case ErrorCode::QuotientPole: return "QuotientPole";
    case ErrorCode::ZeroAlpha: return "ZeroAlpha";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::NotIdentifiable: return "NotIdentifiable";
    case ErrorCode::SingularBread: return "SingularBread";
    case ErrorCode::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::JackknifeFoldFailed: return "JackknifeFoldFailed";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

ErrorKind error_kind(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonTriangularLength:
    case ErrorCode::NonPositiveDiagonal:
    case ErrorCode::EmptyGroup:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::OutOfDomain:
    case ErrorCode::PsdViolation:
    case ErrorCode::NonPositiveDefinite:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
      return ErrorKind::Input;
    default:
      return ErrorKind::Numerical;
  }
}

}  // namespace corrdiff

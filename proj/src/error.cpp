#include "tokgeo/error.hpp"

namespace tokgeo {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kPayloadLength: return "payload_length";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidValue: return "invalid_value";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kEstimatorFailure: return "estimator_failure";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kUndefinedCorrelation: return "undefined_correlation";
    case ErrorCode::kMissingData: return "missing_data";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

EstimatorFailure::EstimatorFailure(const std::string& message, double boundary_d,
                                   double boundary_score)
    : Error(ErrorCode::kEstimatorFailure, message),
      boundary_d_(boundary_d),
      boundary_score_(boundary_score) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace tokgeo

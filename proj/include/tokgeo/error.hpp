#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tokgeo {

enum class ErrorCode {
  kIo,                  // file cannot be opened, read or written
  kFormat,              // bad magic, version or header fields
  kPayloadLength,       // payload size disagrees with the header
  kNonFinite,           // NaN or infinity where finite values are required
  kShapeMismatch,       // inconsistent dimensions between paired objects
  kInvalidArgument,     // precondition violated by the caller
  kInvalidValue,        // value outside its documented domain
  kDegenerate,          // input carries no usable geometric information
  kEstimatorFailure,    // likelihood maximum not found inside the search domain
  kInsufficientData,    // too few samples for the requested statistic
  kUndefinedCorrelation,
  kMissingData,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the likelihood maximizer when the score does not change sign in
// the search domain. `boundary_d` is the endpoint where the search stopped and
// `boundary_score` the log-likelihood derivative there.
class EstimatorFailure : public Error {
 public:
  EstimatorFailure(const std::string& message, double boundary_d, double boundary_score);

  double boundary_d() const noexcept { return boundary_d_; }
  double boundary_score() const noexcept { return boundary_score_; }

 private:
  double boundary_d_;
  double boundary_score_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace tokgeo

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ffqw {

enum class ErrorCode {
  numeric_overflow,
  model_violation,
  configuration,
  numeric,
  domain,
  unsupported_parameter,
  insufficient_data,
  fit_failure,
  checkpoint_mismatch,
  io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::numeric_overflow: return "numeric_overflow";
    case ErrorCode::model_violation: return "model_violation";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::domain: return "domain";
    case ErrorCode::unsupported_parameter: return "unsupported_parameter";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::fit_failure: return "fit_failure";
    case ErrorCode::checkpoint_mismatch: return "checkpoint_mismatch";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Base of every error raised by the library. The code is stable and is what
/// the CLI reports in its machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A non-finite amplitude appeared during a step.
class NumericOverflow : public Error {
 public:
  explicit NumericOverflow(std::int64_t site)
      : Error(ErrorCode::numeric_overflow,
              "non-finite amplitude at site " + std::to_string(site)),
        site_(site) {}

  std::int64_t site() const noexcept { return site_; }

 private:
  std::int64_t site_;
};

}  // namespace ffqw

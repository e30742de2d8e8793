#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qnmlpt {

enum class ErrorCode {
  invalid_argument,
  regime_violation,
  integration_failure,
  no_root,
  rejected_root,
  tail_region_too_close,
  resonant_denominator,
  pole_in_tail,
  non_converged_profile,
  precision_exhausted,
  degenerate_norm,
  grid_mismatch,
  inconsistent_shift,
  missing_derivative,
  unsupported_configuration,
  bad_angle,
  bad_amplitude,
  pole,
  parse_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::regime_violation: return "regime-violation";
    case ErrorCode::integration_failure: return "integration-failure";
    case ErrorCode::no_root: return "no-root";
    case ErrorCode::rejected_root: return "rejected-root";
    case ErrorCode::tail_region_too_close: return "tail-region-too-close";
    case ErrorCode::resonant_denominator: return "resonant-denominator";
    case ErrorCode::pole_in_tail: return "pole-in-tail";
    case ErrorCode::non_converged_profile: return "non-converged-profile";
    case ErrorCode::precision_exhausted: return "precision-exhausted";
    case ErrorCode::degenerate_norm: return "degenerate-norm";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::inconsistent_shift: return "inconsistent-shift";
    case ErrorCode::missing_derivative: return "missing-derivative";
    case ErrorCode::unsupported_configuration: return "unsupported-configuration";
    case ErrorCode::bad_angle: return "bad-angle";
    case ErrorCode::bad_amplitude: return "bad-amplitude";
    case ErrorCode::pole: return "pole";
    case ErrorCode::parse_error: return "parse-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace qnmlpt

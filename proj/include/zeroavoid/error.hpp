#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zeroavoid {

enum class ErrorCode {
  invalid_parameters,
  quadrature_nonconvergence,
  extrapolation_nonconvergence,
  degenerate_denominator,
  outside_harmonic_support,
  policy_model_mismatch,
  clock_never_rings,
  vanishing_acceptance,
  window_exceeds_lifetime,
  config_invalid,
  io_failure,
  experiment_failure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameters: return "invalid-parameters";
    case ErrorCode::quadrature_nonconvergence: return "quadrature-nonconvergence";
    case ErrorCode::extrapolation_nonconvergence: return "extrapolation-nonconvergence";
    case ErrorCode::degenerate_denominator: return "degenerate-denominator";
    case ErrorCode::outside_harmonic_support: return "outside-harmonic-support";
    case ErrorCode::policy_model_mismatch: return "policy-model-mismatch";
    case ErrorCode::clock_never_rings: return "clock-never-rings";
    case ErrorCode::vanishing_acceptance: return "vanishing-acceptance";
    case ErrorCode::window_exceeds_lifetime: return "window-exceeds-lifetime";
    case ErrorCode::config_invalid: return "config-invalid";
    case ErrorCode::io_failure: return "io-failure";
    case ErrorCode::experiment_failure: return "experiment-failure";
  }
  return "unknown";
}

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace zeroavoid

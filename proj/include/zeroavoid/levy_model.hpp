#pragma once

// One-dimensional Levy processes recurrent with a regular zero: the closed
// model zoo, its Levy triplet, the characteristic exponent and the
// integrability diagnostic for 1/(q + Psi).

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "zeroavoid/error.hpp"
#include "zeroavoid/quadrature.hpp"

namespace zeroavoid {

using complex = std::complex<double>;

/// Standard Brownian motion with variance `sigma2` per unit time.
struct Brownian {
  double sigma2 = 1.0;
};

/// Strictly stable process with Psi(l) = c|l|^a (1 - i b sgn(l) tan(pi a / 2)).
struct Stable {
  double alpha = 1.5;
  double beta = 0.0;
  double scale = 1.0;
};

/// Stable process without positive jumps, normalised so that its Laplace
/// exponent is theta^alpha (scale function x^{alpha-1} / Gamma(alpha)).
struct SpectrallyNegativeStable {
  double alpha = 1.5;
};

/// Gaussian part plus symmetric jumps with density intensity * |x|^{-1-alpha}
/// on 0 < |x| <= radius.
struct SymmetricTruncatedStable {
  double alpha = 0.5;
  double intensity = 1.0;
  double sigma2 = 1.0;
  double radius = 1.0;
};

/// The stable parameters (alpha, beta, c) together with c' = -c beta tan(pi alpha/2).
struct StableParams {
  double alpha = 1.5;
  double beta = 0.0;
  double c = 1.0;

  double c_prime() const { return -c * beta * std::tan(alpha * std::numbers::pi / 2.0); }
  /// c + i c', so that Psi(l) = (c + i c') |l|^alpha for l > 0.
  complex coefficient() const { return {c, c_prime()}; }

  void validate() const {
    require(alpha > 1.0 && alpha < 2.0, ErrorCode::invalid_parameters, "stable index must lie in (1,2)");
    require(std::abs(beta) <= 1.0, ErrorCode::invalid_parameters, "stable skewness must lie in [-1,1]");
    require(c > 0.0 && std::isfinite(c), ErrorCode::invalid_parameters, "stable scale must be positive");
  }
};

struct SecondMoment {
  double value = std::numeric_limits<double>::infinity();

  bool finite() const { return std::isfinite(value); }
  /// 1/m^2, which is 0 when m^2 is infinite.
  double inverse() const { return finite() ? 1.0 / value : 0.0; }
};

namespace detail {

// Integral of (1 - cos u) u^{-1-alpha} over (0, inf), alpha in (0, 2).
inline double one_minus_cos_power_total(double alpha) {
  const double d = alpha - 1.0;
  const double sinc = std::abs(d) < 1e-9 ? std::numbers::pi / 2.0 : std::sin(std::numbers::pi * d / 2.0) / d;
  return std::tgamma(2.0 - alpha) / alpha * sinc;
}

// Integral of (1 - cos u) u^{-1-alpha} over (0, upper).
inline double one_minus_cos_power_integral(double alpha, double upper) {
  if (upper <= 0.0) return 0.0;
  if (upper <= 8.0) {
    // sum_k (-1)^{k+1} U^{2k-alpha} / ((2k)! (2k - alpha))
    const double u2 = upper * upper;
    double power = std::pow(upper, -alpha);  // U^{2k-alpha} / (2k)! built incrementally
    double sum = 0.0;
    for (int k = 1; k < 60; ++k) {
      power *= u2 / ((2.0 * k - 1.0) * (2.0 * k));
      const double term = power / (2.0 * k - alpha);
      sum += (k % 2 == 1) ? term : -term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  const double cos_tail = quad::power_fourier_tail(1.0 + alpha, upper).real();
  return one_minus_cos_power_total(alpha) - (std::pow(upper, -alpha) / alpha - cos_tail);
}

}  // namespace detail

class LevyModel {
 public:
  using Variant = std::variant<Brownian, Stable, SpectrallyNegativeStable, SymmetricTruncatedStable>;

  LevyModel() : LevyModel(Brownian{}) {}
  LevyModel(Brownian b) : kind_(b) { validate(); }
  LevyModel(Stable s) : kind_(s) { validate(); }
  LevyModel(SpectrallyNegativeStable s) : kind_(s) { validate(); }
  LevyModel(SymmetricTruncatedStable s) : kind_(s) { validate(); }

  const Variant& kind() const { return kind_; }

  std::string name() const {
    return std::visit(
        [](const auto& m) -> std::string {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Brownian>) return "brownian";
          else if constexpr (std::is_same_v<T, Stable>) return "stable";
          else if constexpr (std::is_same_v<T, SpectrallyNegativeStable>) return "sn-stable";
          else return "truncated-stable";
        },
        kind_);
  }

  /// Human-readable name with parameters, used in reports.
  std::string label() const;

  /// Drift v of the triplet. Every shipped variant is centred.
  double drift() const { return 0.0; }

  double gaussian_variance() const {
    if (const auto* b = std::get_if<Brownian>(&kind_)) return b->sigma2;
    if (const auto* t = std::get_if<SymmetricTruncatedStable>(&kind_)) return t->sigma2;
    return 0.0;
  }

  /// Stable parameters for both stable variants.
  std::optional<StableParams> stable_params() const {
    if (const auto* s = std::get_if<Stable>(&kind_)) return StableParams{s->alpha, s->beta, s->scale};
    if (const auto* s = std::get_if<SpectrallyNegativeStable>(&kind_)) {
      return StableParams{s->alpha, -1.0, -std::cos(std::numbers::pi * s->alpha / 2.0)};
    }
    return std::nullopt;
  }

  bool is_stable() const { return stable_params().has_value(); }

  bool is_symmetric() const {
    if (auto sp = stable_params()) return sp->beta == 0.0;
    return true;
  }

  bool has_jumps() const { return !std::holds_alternative<Brownian>(kind_); }
  bool has_positive_jumps() const {
    if (auto sp = stable_params()) return sp->beta > -1.0;
    return has_jumps();
  }
  bool has_negative_jumps() const {
    if (auto sp = stable_params()) return sp->beta < 1.0;
    return has_jumps();
  }

  /// Index governing small-time scaling |X_t| ~ t^{1/index}: 2 with a
  /// Gaussian part, alpha otherwise.
  double small_time_index() const {
    if (gaussian_variance() > 0.0) return 2.0;
    if (auto sp = stable_params()) return sp->alpha;
    return std::get<SymmetricTruncatedStable>(kind_).alpha;
  }

  /// Psi(lambda), with E exp(i lambda X_t) = exp(-t Psi(lambda)).
  complex exponent(double lambda) const {
    if (lambda == 0.0) return 0.0;
    return std::visit(
        [lambda, this](const auto& m) -> complex {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Brownian>) {
            return 0.5 * m.sigma2 * lambda * lambda;
          } else if constexpr (std::is_same_v<T, SymmetricTruncatedStable>) {
            return 0.5 * m.sigma2 * lambda * lambda + truncated_jump_exponent(m, std::abs(lambda));
          } else {
            const StableParams p = *stable_params();
            const complex z = p.coefficient();
            const double mag = p.c * std::pow(std::abs(lambda), p.alpha);
            const double im = (lambda > 0.0 ? 1.0 : -1.0) * p.c_prime() * std::pow(std::abs(lambda), p.alpha);
            (void)z;
            return {mag, im};
          }
        },
        kind_);
  }

  SecondMoment second_moment() const {
    if (const auto* b = std::get_if<Brownian>(&kind_)) return {b->sigma2};
    if (const auto* t = std::get_if<SymmetricTruncatedStable>(&kind_)) {
      return {t->sigma2 + 2.0 * t->intensity * std::pow(t->radius, 2.0 - t->alpha) / (2.0 - t->alpha)};
    }
    return {};
  }

  /// Levy density nu(dx)/dx (zero for Brownian), for numeric checks.
  double levy_density(double x) const {
    if (x == 0.0) return 0.0;
    if (const auto* t = std::get_if<SymmetricTruncatedStable>(&kind_)) {
      return std::abs(x) <= t->radius ? t->intensity * std::pow(std::abs(x), -1.0 - t->alpha) : 0.0;
    }
    if (auto sp = stable_params()) {
      // c = -(c+ + c-) Gamma(-alpha) cos(pi alpha/2), beta = (c+ - c-)/(c+ + c-).
      const double total =
          -sp->c / (std::tgamma(-sp->alpha) * std::cos(std::numbers::pi * sp->alpha / 2.0));
      const double weight = x > 0.0 ? 0.5 * (1.0 + sp->beta) : 0.5 * (1.0 - sp->beta);
      return total * weight * std::pow(std::abs(x), -1.0 - sp->alpha);
    }
    return 0.0;
  }

 private:
  static double truncated_jump_exponent(const SymmetricTruncatedStable& m, double lambda) {
    return 2.0 * m.intensity * std::pow(lambda, m.alpha) *
           detail::one_minus_cos_power_integral(m.alpha, lambda * m.radius);
  }

  void validate() const {
    std::visit(
        [](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Brownian>) {
            require(m.sigma2 > 0.0 && std::isfinite(m.sigma2), ErrorCode::invalid_parameters,
                    "Brownian variance must be positive");
          } else if constexpr (std::is_same_v<T, Stable>) {
            StableParams{m.alpha, m.beta, m.scale}.validate();
          } else if constexpr (std::is_same_v<T, SpectrallyNegativeStable>) {
            StableParams{m.alpha, -1.0, 1.0}.validate();
          } else {
            require(m.alpha > 0.0 && m.alpha < 2.0, ErrorCode::invalid_parameters,
                    "truncated-stable index must lie in (0,2)");
            require(m.intensity > 0.0, ErrorCode::invalid_parameters, "jump intensity must be positive");
            require(m.sigma2 >= 0.0, ErrorCode::invalid_parameters, "Gaussian variance must be non-negative");
            require(m.radius > 0.0, ErrorCode::invalid_parameters, "support radius must be positive");
          }
        },
        kind_);
  }

  Variant kind_;
};

inline std::string LevyModel::label() const {
  auto fmt = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  return std::visit(
      [&](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Brownian>) {
          return "brownian(sigma2=" + fmt(m.sigma2) + ")";
        } else if constexpr (std::is_same_v<T, Stable>) {
          return "stable(alpha=" + fmt(m.alpha) + ";beta=" + fmt(m.beta) + ";c=" + fmt(m.scale) + ")";
        } else if constexpr (std::is_same_v<T, SpectrallyNegativeStable>) {
          return "sn-stable(alpha=" + fmt(m.alpha) + ")";
        } else {
          return "truncated-stable(alpha=" + fmt(m.alpha) + ";intensity=" + fmt(m.intensity) +
                 ";sigma2=" + fmt(m.sigma2) + ";radius=" + fmt(m.radius) + ")";
        }
      },
      kind_);
}

inline complex char_exponent(const LevyModel& model, double lambda) { return model.exponent(lambda); }

inline SecondMoment second_moment(const LevyModel& model) { return model.second_moment(); }

struct ConditionADiagnostic {
  double head = 0.0;        // integral over [0, cutoff]
  double tail_bound = 0.0;  // analytic bound on the rest
  double cutoff = 0.0;
  bool finite = false;

  double value() const { return finite ? head + tail_bound : std::numeric_limits<double>::infinity(); }
};

/// Numeric value of the integral of |1/(q + Psi)| over [0, cutoff] plus an
/// analytic bound for [cutoff, inf) from Re Psi(l) >= k l^p. The tail bound
/// diverges when p <= 1, which flags a violation of the integrability half of
/// the standing assumption.
inline ConditionADiagnostic condition_a_diagnostic(const LevyModel& model, double q, double cutoff = 1e3) {
  require(q > 0.0, ErrorCode::invalid_parameters, "q must be positive");
  require(cutoff > 1.0, ErrorCode::invalid_parameters, "cutoff must exceed 1");
  ConditionADiagnostic out;
  out.cutoff = cutoff;
  std::vector<double> breaks{0.0};
  for (double b = 1e-3; b < cutoff; b *= 4.0) breaks.push_back(b);
  breaks.push_back(cutoff);
  auto integrand = [&](double l) { return 1.0 / std::abs(q + model.exponent(l)); };
  const auto head = quad::integrate(integrand, breaks, {1e-12, 1e-10});
  out.head = head.value;

  double growth = 0.0;
  double coefficient = 0.0;
  if (model.gaussian_variance() > 0.0) {
    growth = 2.0;
    coefficient = 0.5 * model.gaussian_variance();
  } else if (auto sp = model.stable_params()) {
    growth = sp->alpha;
    coefficient = sp->c;
  } else {
    const auto& t = std::get<SymmetricTruncatedStable>(model.kind());
    // The jump part over lambda^alpha is increasing in lambda.
    growth = t.alpha;
    coefficient = 2.0 * t.intensity * detail::one_minus_cos_power_integral(t.alpha, cutoff * t.radius);
  }
  if (growth > 1.0 && coefficient > 0.0) {
    out.finite = true;
    out.tail_bound = std::pow(cutoff, 1.0 - growth) / (coefficient * (growth - 1.0));
  } else {
    out.finite = false;
    out.tail_bound = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace zeroavoid

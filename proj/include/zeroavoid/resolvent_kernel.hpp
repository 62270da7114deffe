#pragma once

// Fourier quadrature for the q-resolvent density r_q, the function h_q, the
// renormalized zero resolvent h and the harmonic family h^(gamma).
//
// Every quantity here is (1/pi) times an integral over lambda in (0, inf) of
//   A(lambda) * even(lambda x) + B(lambda) * sin(lambda x),
// with A + iB = 1/(q + Psi(lambda)). The substitution lambda = u/|x| turns the
// oscillation into unit frequency; [0, U] is integrated adaptively with a
// breakpoint every pi and the remainder [U, inf) by a tail rule.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "zeroavoid/error.hpp"
#include "zeroavoid/levy_model.hpp"
#include "zeroavoid/quadrature.hpp"

namespace zeroavoid {

enum class TailMode {
  automatic,             // asymptotic expansion when available, else extrapolated
  extrapolated,          // cycle sums accelerated by the epsilon algorithm
  asymptotic_expansion,  // exact power series for Psi(l) = z l^p
};

enum class HStrategy { direct_integral, q_extrapolation };

struct QuadratureSpec {
  double truncation = 10.0;  // lambda beyond which the tail rule takes over
  double absolute_tolerance = 1e-13;
  double relative_tolerance = 1e-11;
  std::size_t max_subdivisions = 20000;
  TailMode tail_mode = TailMode::automatic;
  // q-extrapolation schedule q_k = q0 2^{-k}
  double extrapolation_q0 = 1.0;
  double extrapolation_tolerance = 1e-8;
  std::size_t extrapolation_max_steps = 60;
  // one-sided slope at zero
  double derivative_tolerance = 1e-7;
  std::size_t derivative_max_halvings = 48;

  void validate() const {
    require(truncation > 0.0, ErrorCode::invalid_parameters, "truncation must be positive");
    require(absolute_tolerance > 0.0 && relative_tolerance > 0.0, ErrorCode::invalid_parameters,
            "tolerances must be positive");
    require(max_subdivisions > 0, ErrorCode::invalid_parameters, "subdivision limit must be positive");
    require(extrapolation_q0 > 0.0 && extrapolation_tolerance > 0.0, ErrorCode::invalid_parameters,
            "extrapolation schedule must be positive");
  }

  quad::Tolerance tolerance() const { return {absolute_tolerance, relative_tolerance}; }
};

/// Psi(l) = z l^p for l > 0, when the model is a pure power.
struct PowerLaw {
  complex z;
  double p;
};

inline std::optional<PowerLaw> power_law(const LevyModel& model) {
  if (const auto* b = std::get_if<Brownian>(&model.kind())) return PowerLaw{complex(0.5 * b->sigma2, 0.0), 2.0};
  if (auto sp = model.stable_params()) return PowerLaw{sp->coefficient(), sp->alpha};
  return std::nullopt;
}

namespace detail {

enum class KernelKind {
  resolvent,     // Re(e^{-i l x} G)
  renormalized,  // Re((1 - e^{i l x}) G)
  symmetric,     // 2 Re((1 - cos l x) G)
};

inline void check_converged(const quad::Estimate& e, const char* what) {
  if (!e.converged || !std::isfinite(e.value)) {
    throw Error(ErrorCode::quadrature_nonconvergence,
                std::string(what) + ": quadrature did not meet tolerance (error estimate " +
                    std::to_string(e.error) + ")");
  }
}

// Growth of Re Psi at infinity, used to pick the tail substitution power.
inline double tail_growth(const LevyModel& model) {
  if (auto pl = power_law(model)) return pl->p;
  return model.small_time_index();
}

// Exact tail over [U, inf) of the u-integrand for Psi(l) = z l^p, from
// 1/(q + z l^p) = sum_k (-q)^k z^{-(k+1)} l^{-p(k+1)}.
inline double power_law_tail(const PowerLaw& pl, double q, double ax, double sign, double upper,
                             KernelKind kind) {
  double total = 0.0;
  complex w = 1.0 / pl.z;
  for (int k = 0; k < 200; ++k) {
    const double power = pl.p * (k + 1);
    const double scale = std::pow(ax, power);
    const complex e = quad::power_fourier_tail(power, upper);
    const double flat = std::pow(upper, 1.0 - power) / (power - 1.0);
    double term = 0.0;
    switch (kind) {
      case KernelKind::resolvent:
        term = w.real() * e.real() + sign * w.imag() * e.imag();
        break;
      case KernelKind::renormalized:
        term = w.real() * (flat - e.real()) + sign * w.imag() * e.imag();
        break;
      case KernelKind::symmetric:
        term = 2.0 * w.real() * (flat - e.real());
        break;
    }
    term *= scale;
    total += term;
    if (q == 0.0 || std::abs(term) <= 1e-17 * std::abs(total)) break;
    w *= -q / pl.z;
  }
  return total;
}

// Log-spaced lambda breakpoints resolving the crossover where Psi ~ q.
inline std::vector<double> lambda_breakpoints(double q, double upper) {
  const double low = q > 0.0 ? 1e-4 * std::min(1.0, q) : 1e-10;
  std::vector<double> out;
  for (double l = low; l < upper; l *= 4.0) out.push_back(l);
  return out;
}

inline quad::Estimate fourier_integral(const LevyModel& model, double q, double x, KernelKind kind,
                                       const QuadratureSpec& spec) {
  const auto tol = spec.tolerance();
  const auto pl = power_law(model);
  const bool asymptotic =
      spec.tail_mode == TailMode::asymptotic_expansion || (spec.tail_mode == TailMode::automatic && pl);
  require(!asymptotic || pl.has_value(), ErrorCode::invalid_parameters,
          "asymptotic tail expansion needs a pure power exponent");
  auto green = [&](double lambda) { return 1.0 / (q + model.exponent(lambda)); };
  const double growth = tail_growth(model);
  const int map_power = std::max(1, static_cast<int>(std::ceil(2.0 / (growth - 1.0 + 1e-12))));

  if (x == 0.0) {
    if (kind != KernelKind::resolvent) return {};
    // r_q(0): non-oscillatory integral of A over (0, inf).
    double upper = spec.truncation;
    if (pl && q > 0.0) upper = std::max(upper, 2.0 * std::pow(2.0 * q / std::abs(pl->z), 1.0 / pl->p));
    std::vector<double> br{0.0};
    for (double b : lambda_breakpoints(q, upper)) br.push_back(b);
    br.push_back(upper);
    auto a = [&](double l) { return green(l).real(); };
    quad::Estimate head = quad::integrate(a, br, tol, spec.max_subdivisions);
    check_converged(head, "resolvent density at 0");
    quad::Estimate tail;
    if (asymptotic) {
      complex w = 1.0 / pl->z;
      for (int k = 0; k < 200; ++k) {
        const double power = pl->p * (k + 1);
        const double term = w.real() * std::pow(upper, 1.0 - power) / (power - 1.0);
        tail.value += term;
        if (q == 0.0 || std::abs(term) <= 1e-17 * std::abs(tail.value)) break;
        w *= -q / pl->z;
      }
    } else {
      tail = quad::integrate_to_infinity(a, upper, tol, map_power, spec.max_subdivisions);
      check_converged(tail, "resolvent density tail");
    }
    head += tail;
    return head.scaled(1.0 / std::numbers::pi);
  }

  const double ax = std::abs(x);
  const double sign = x > 0.0 ? 1.0 : -1.0;
  auto integrand = [&](double u) {
    const complex g = green(u / ax);
    const double s = std::sin(0.5 * u);
    switch (kind) {
      case KernelKind::resolvent:
        return g.real() * std::cos(u) + sign * g.imag() * std::sin(u);
      case KernelKind::renormalized:
        return g.real() * 2.0 * s * s + sign * g.imag() * std::sin(u);
      case KernelKind::symmetric:
        return 4.0 * g.real() * s * s;
    }
    return 0.0;
  };

  const double two_pi = 2.0 * std::numbers::pi;
  double upper_lambda = spec.truncation;
  if (pl && q > 0.0) upper_lambda = std::max(upper_lambda, 2.0 * std::pow(2.0 * q / std::abs(pl->z), 1.0 / pl->p));
  if (asymptotic) upper_lambda = pl && q > 0.0 ? 2.0 * std::pow(2.0 * q / std::abs(pl->z), 1.0 / pl->p) : 0.0;
  const double upper = two_pi * std::ceil(std::max(16.0 * std::numbers::pi, ax * upper_lambda) / two_pi);

  std::vector<double> br;
  for (double l : lambda_breakpoints(q, upper / ax)) br.push_back(ax * l);
  for (double u = std::numbers::pi; u < upper; u += std::numbers::pi) br.push_back(u);
  br.push_back(upper);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());

  // First panel carries the possible l^{1-alpha} singularity at the origin.
  quad::Estimate head = quad::integrate_singular_start(integrand, 0.0, br.front(), 8, tol, spec.max_subdivisions);
  auto rest = quad::integrate(integrand, br, tol, spec.max_subdivisions);
  check_converged(head, "fourier head");
  check_converged(rest, "fourier head");
  head += rest;

  quad::Estimate tail;
  if (asymptotic) {
    tail.value = power_law_tail(*pl, q, ax, sign, upper, kind);
  } else {
    if (kind != KernelKind::resolvent) {
      const double weight = kind == KernelKind::symmetric ? 2.0 : 1.0;
      auto flat = [&](double u) { return weight * green(u / ax).real(); };
      auto e = quad::integrate_to_infinity(flat, upper, tol, map_power, spec.max_subdivisions);
      check_converged(e, "fourier tail");
      tail += e;
    }
    auto wave = [&](double u) {
      const complex g = green(u / ax);
      switch (kind) {
        case KernelKind::resolvent:
          return g.real() * std::cos(u) + sign * g.imag() * std::sin(u);
        case KernelKind::renormalized:
          return -g.real() * std::cos(u) + sign * g.imag() * std::sin(u);
        case KernelKind::symmetric:
          return -2.0 * g.real() * std::cos(u);
      }
      return 0.0;
    };
    auto e = quad::integrate_oscillatory_tail(wave, upper, std::numbers::pi, tol);
    check_converged(e, "fourier oscillatory tail");
    tail += e;
  }
  head += tail;
  return head.scaled(1.0 / (std::numbers::pi * ax));
}

}  // namespace detail

/// r_q(x) = (1/pi) int_0^inf Re(e^{-i l x}/(q + Psi(l))) dl.
inline double resolvent_density(const LevyModel& model, double q, double x, const QuadratureSpec& spec = {}) {
  require(q > 0.0, ErrorCode::invalid_parameters, "q must be positive");
  spec.validate();
  return detail::fourier_integral(model, q, x, detail::KernelKind::resolvent, spec).value;
}

/// h_q(x) = r_q(0) - r_q(-x), computed as one integral.
inline double h_q(const LevyModel& model, double q, double x, const QuadratureSpec& spec = {}) {
  require(q > 0.0, ErrorCode::invalid_parameters, "q must be positive");
  spec.validate();
  if (x == 0.0) return 0.0;
  const auto e = detail::fourier_integral(model, q, x, detail::KernelKind::renormalized, spec);
  return e.value < 0.0 && e.value > -10.0 * spec.tolerance().bound(0.0) - e.error ? 0.0 : e.value;
}

/// h(x) + h(-x) from the cosine integral.
inline double symmetric_h_sum(const LevyModel& model, double x, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (x == 0.0) return 0.0;
  return detail::fourier_integral(model, 0.0, x, detail::KernelKind::symmetric, spec).value;
}

/// E_x[exp(-q T_0)] = r_q(-x) / r_q(0).
inline double laplace_T0(const LevyModel& model, double q, double x, const QuadratureSpec& spec = {}) {
  if (x == 0.0) return 1.0;
  const double r0 = resolvent_density(model, q, 0.0, spec);
  require(r0 > 0.0, ErrorCode::degenerate_denominator, "r_q(0) vanished");
  return std::clamp(resolvent_density(model, q, -x, spec) / r0, 0.0, 1.0);
}

enum class Side { plus, minus };

/// One-sided slope h'(0+) or h'(0-) (as a signed value), or the divergence flag.
struct Slope {
  double value = 0.0;  // the last ratio h(+-x)/x, signed like the derivative
  bool infinite = false;
  std::size_t halvings = 0;
};

/// Cached evaluator for h and the harmonic family h^(gamma).
class HEvaluator {
 public:
  explicit HEvaluator(LevyModel model, QuadratureSpec spec = {}, HStrategy strategy = HStrategy::direct_integral)
      : model_(std::move(model)), spec_(spec), strategy_(strategy), m2_(model_.second_moment()) {
    spec_.validate();
  }

  const LevyModel& model() const { return model_; }
  const QuadratureSpec& spec() const { return spec_; }
  HStrategy strategy() const { return strategy_; }
  SecondMoment second_moment() const { return m2_; }
  double tolerance() const { return 10.0 * spec_.absolute_tolerance; }

  double h(double x) const {
    if (x == 0.0) return 0.0;
    const std::uint64_t key = std::bit_cast<std::uint64_t>(x);
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    double v = strategy_ == HStrategy::direct_integral ? direct(x) : extrapolated(x);
    if (v < 0.0 && v > -clamp_band(x)) v = 0.0;
    if (std::abs(v) <= clamp_band(x)) v = 0.0;
    std::unique_lock lock(mutex_);
    cache_.emplace(key, v);
    return v;
  }

  double h_gamma(double gamma, double x) const {
    require(gamma >= -1.0 && gamma <= 1.0, ErrorCode::invalid_parameters, "gamma must lie in [-1,1]");
    return h(x) + gamma * x * m2_.inverse();
  }

  double h_q(double q, double x) const { return zeroavoid::h_q(model_, q, x, spec_); }
  double r_q0(double q) const { return resolvent_density(model_, q, 0.0, spec_); }

  Slope h_prime_zero(Side side) const {
    const double sgn = side == Side::plus ? 1.0 : -1.0;
    const double ceiling = 1e6 * std::max(m2_.inverse(), 1.0);
    Slope out;
    double previous = std::numeric_limits<double>::quiet_NaN();
    double previous_step = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (std::size_t k = 0; k <= spec_.derivative_max_halvings; ++k) {
      const double x = std::ldexp(1.0, -static_cast<int>(k));
      const double ratio = h(sgn * x) / x;
      out.value = sgn * ratio;
      out.halvings = k;
      if (ratio > ceiling) {
        out.infinite = true;
        return out;
      }
      if (std::isfinite(previous)) {
        const double step = std::abs(ratio - previous);
        if (step <= spec_.derivative_tolerance * std::max(ratio, 1e-300)) return out;
        stalled = step >= previous_step ? stalled + 1 : 0;
        if (stalled >= 5) {
          out.infinite = true;
          return out;
        }
        previous_step = step;
      }
      previous = ratio;
    }
    out.infinite = true;
    return out;
  }

  /// Snapshot of the cache, sorted by x.
  std::vector<std::pair<double, double>> cached() const {
    std::vector<std::pair<double, double>> out;
    {
      std::shared_lock lock(mutex_);
      out.reserve(cache_.size());
      for (const auto& [k, v] : cache_) out.emplace_back(std::bit_cast<double>(k), v);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  double clamp_band(double x) const { return spec_.tolerance().bound(std::abs(x) * (1.0 + m2_.inverse())); }

  double direct(double x) const {
    return detail::fourier_integral(model_, 0.0, x, detail::KernelKind::renormalized, spec_).value;
  }

  // h_q along q_k = q0 2^{-k}, accelerated by Aitken's delta-squared process.
  double extrapolated(double x) const {
    std::vector<double> seq;
    double last = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < spec_.extrapolation_max_steps; ++k) {
      const double q = spec_.extrapolation_q0 * std::ldexp(1.0, -static_cast<int>(k));
      seq.push_back(zeroavoid::h_q(model_, q, x, spec_));
      if (seq.size() < 3) continue;
      const double a = seq[seq.size() - 3];
      const double b = seq[seq.size() - 2];
      const double c = seq[seq.size() - 1];
      const double denom = (c - b) - (b - a);
      const double est = denom != 0.0 ? c - (c - b) * (c - b) / denom : c;
      if (std::isfinite(last) && std::abs(est - last) <= spec_.extrapolation_tolerance * std::max(1.0, std::abs(est))) {
        return est;
      }
      last = est;
    }
    throw Error(ErrorCode::extrapolation_nonconvergence,
                "h_q did not settle as q decreased at x=" + std::to_string(x));
  }

  LevyModel model_;
  QuadratureSpec spec_;
  HStrategy strategy_;
  SecondMoment m2_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::uint64_t, double> cache_;
};

inline double h(const HEvaluator& ev, double x) { return ev.h(x); }
inline double h_gamma(const HEvaluator& ev, double gamma, double x) { return ev.h_gamma(gamma, x); }
inline Slope h_prime_zero(const HEvaluator& ev, Side side) { return ev.h_prime_zero(side); }

/// CSV table of (x, h, h_q, h(x)+h(-x)) with 17 significant digits.
inline void write_h_table(const HEvaluator& ev, const std::vector<double>& xs, double q, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot open " + path);
  out << "x,h,h_q,symmetric_sum\n" << std::setprecision(17);
  for (double x : xs) {
    out << x << ',' << ev.h(x) << ',' << ev.h_q(q, x) << ',' << symmetric_h_sum(ev.model(), x, ev.spec()) << '\n';
  }
  if (!out) throw Error(ErrorCode::io_failure, "write failed for " + path);
}

}  // namespace zeroavoid

#pragma once

// Exact formulas: h for stable processes, the spectrally negative scale
// function, and the identities expressing hitting probabilities and the
// conditioned resolvent densities through h and h_q.
//
// The identities are templates over an "h source": anything with h(x) and
// second_moment(), and for the q-resolvent also h_q(q, x) and r_q0(q). The
// closed-form sources below and HEvaluator all qualify, so each can check
// the other.

#include <cmath>
#include <concepts>
#include <numbers>

#include "zeroavoid/error.hpp"
#include "zeroavoid/levy_model.hpp"

namespace zeroavoid {

template <class S>
concept HSource = requires(const S& s, double x) {
  { s.h(x) } -> std::convertible_to<double>;
  { s.second_moment() } -> std::same_as<SecondMoment>;
};

template <class S>
concept QResolventSource = HSource<S> && requires(const S& s, double q, double x) {
  { s.h_q(q, x) } -> std::convertible_to<double>;
  { s.r_q0(q) } -> std::convertible_to<double>;
};

template <HSource S>
double harmonic(const S& source, double gamma, double x) {
  return source.h(x) + gamma * x * source.second_moment().inverse();
}

/// Gamma(-alpha) for alpha in (1,2), from Gamma(2 - alpha) by the recurrence.
inline double gamma_of_minus(double alpha) { return std::tgamma(2.0 - alpha) / (alpha * (alpha - 1.0)); }

/// Renormalized zero resolvent of a strictly stable process,
/// alpha Gamma(-alpha) sin(pi alpha/2) (1 - beta sgn x) |x|^{alpha-1} / (pi c (1 + beta^2 tan^2(pi alpha/2))).
inline double stable_h(const StableParams& p, double x) {
  p.validate();
  if (x == 0.0) return 0.0;
  const double half = std::numbers::pi * p.alpha / 2.0;
  const double tan = std::tan(half);
  const double sgn = x > 0.0 ? 1.0 : -1.0;
  const double v = p.alpha * gamma_of_minus(p.alpha) * std::sin(half) * (1.0 - p.beta * sgn) *
                   std::pow(std::abs(x), p.alpha - 1.0) / (std::numbers::pi * p.c * (1.0 + p.beta * p.beta * tan * tan));
  return std::max(v, 0.0);
}

/// Scale function of the spectrally negative stable process with Laplace
/// exponent theta^alpha, which is also its h.
inline double sn_stable_h(double alpha, double x) {
  require(alpha > 1.0 && alpha < 2.0, ErrorCode::invalid_parameters, "stable index must lie in (1,2)");
  return x > 0.0 ? std::pow(x, alpha - 1.0) / std::tgamma(alpha) : 0.0;
}

/// h(x) = |x| / sigma^2 together with the Brownian q-resolvent.
struct BrownianExact {
  double sigma2 = 1.0;

  double h(double x) const { return std::abs(x) / sigma2; }
  SecondMoment second_moment() const { return {sigma2}; }
  double r_q0(double q) const { return 1.0 / std::sqrt(2.0 * q * sigma2); }
  double h_q(double q, double x) const {
    return -std::expm1(-std::sqrt(2.0 * q / sigma2) * std::abs(x)) * r_q0(q);
  }
};

struct StableExact {
  StableParams params;

  double h(double x) const { return stable_h(params, x); }
  SecondMoment second_moment() const { return {}; }
};

inline double degenerate_band() { return 1e-12; }

/// P_x(T_a < T_0) = (h(x) + h(-a) - h(x-a)) / (h(a) + h(-a)).
template <HSource S>
double hitting_prob_one(const S& source, double x, double a) {
  require(a != 0.0 && x != 0.0, ErrorCode::invalid_parameters, "x and a must be non-zero");
  const double denom = source.h(a) + source.h(-a);
  require(denom > degenerate_band(), ErrorCode::degenerate_denominator, "h(a) + h(-a) vanishes");
  if (x == a) return 1.0;
  return (source.h(x) + source.h(-a) - source.h(x - a)) / denom;
}

/// E_0[L_{T_{a,-b}}] P_x(T_{a,-b} < T_0), the local-time factor left in place.
template <HSource S>
double hitting_product_two(const S& source, double x, double a, double b) {
  require(a > 0.0 && b > 0.0, ErrorCode::invalid_parameters, "levels a and b must be positive");
  const double hb = source.h(a + b) + source.h(-a - b);
  require(hb > degenerate_band(), ErrorCode::degenerate_denominator, "h(a+b) + h(-a-b) vanishes");
  const double up = source.h(-a) - source.h(x - a);
  const double down = source.h(b) - source.h(x + b);
  return source.h(x) +
         (up * source.h(a + b) + down * source.h(-a - b) - (source.h(a) - source.h(-b)) * (up - down)) / hb;
}

/// Density at y of the q-resolvent of the process conditioned by h^(gamma), started at x.
template <QResolventSource S>
double r_q_gamma(const S& source, double gamma, double q, double x, double y) {
  require(q > 0.0, ErrorCode::invalid_parameters, "q must be positive");
  const double hy = harmonic(source, gamma, y);
  if (hy <= 0.0) return 0.0;
  const double r0 = source.r_q0(q);
  if (x == 0.0) return hy * (1.0 - source.h_q(q, -y) / r0);
  const double hx = harmonic(source, gamma, x);
  require(hx > 0.0, ErrorCode::outside_harmonic_support, "start lies where h^(gamma) vanishes");
  const double hqx = source.h_q(q, x);
  const double hqy = source.h_q(q, -y);
  return hy / hx * (hqx + hqy - source.h_q(q, x - y) - hqx * hqy / r0);
}

/// Density at y of the 0-resolvent (Green function) of the conditioned process.
template <HSource S>
double r_0_gamma(const S& source, double gamma, double x, double y) {
  const double hy = harmonic(source, gamma, y);
  if (hy <= 0.0) return 0.0;
  if (x == 0.0) return hy;
  const double hx = harmonic(source, gamma, x);
  require(hx > 0.0, ErrorCode::outside_harmonic_support, "start lies where h^(gamma) vanishes");
  return hy / hx * (source.h(x) + source.h(-y) - source.h(x - y));
}

}  // namespace zeroavoid

#pragma once

// Adaptive Gauss-Kronrod integration, oscillatory tails with Wynn epsilon
// acceleration, and a rotated-contour rule for power-law Fourier tails.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <queue>
#include <span>
#include <utility>
#include <vector>

namespace zeroavoid::quad {

struct Tolerance {
  double absolute = 1e-11;
  double relative = 1e-10;

  double bound(double value) const { return std::max(absolute, relative * std::abs(value)); }
};

struct Estimate {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;

  Estimate& operator+=(const Estimate& other) {
    value += other.value;
    error += other.error;
    evaluations += other.evaluations;
    converged = converged && other.converged;
    return *this;
  }

  Estimate scaled(double factor) const {
    Estimate out = *this;
    out.value *= factor;
    out.error *= std::abs(factor);
    return out;
  }
};

namespace detail {

// QUADPACK qk21 abscissae and weights.
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

// 40-point Gauss-Laguerre rule for weight exp(-t) on [0, inf).
inline constexpr std::array<double, 40> kLaguerreNodes = {
    0.035700394308888501, 0.18816228315869904, 0.46269428131457629,
    0.85977296397293435, 1.3800108205273374, 2.0242091359228267,
    2.7933693535068156, 3.688702677908271, 4.7116411465549719,
    5.8638508783437171, 7.1472479081022877, 8.5640170175861634,
    10.116634048451939, 11.807892294004585, 13.640933712537088,
    15.619285893339075, 17.746905950095663, 20.02823283457489,
    22.468249983498417, 25.072560772426204, 27.847480009168862,
    30.800145739445462, 33.938657084913721, 37.272245880476007,
    40.811492823886923, 44.568603175334466, 48.55776353305999,
    52.795611187216934, 57.301863323393626, 62.100179072775113,
    67.219370927127002, 72.695158847612461, 78.572802911571316,
    84.91123113570498, 91.789874671236376, 99.320808717446809,
    107.67244063938827, 117.12230951269069, 128.20184198825564,
    142.28004446916,
};
inline constexpr std::array<double, 40> kLaguerreWeights = {
    0.088412106190428594, 0.17681473909570528, 0.21136311701594165,
    0.19408119531858326, 0.14643428242411188, 0.093326798435762762,
    0.050932204361039554, 0.023976193015682542, 0.0097746252467134954,
    0.0034579399930181548, 0.0010622468938967702, 0.00028327168532430125,
    6.5509405003240321e-05, 1.3116069073266569e-05, 2.2684528787791834e-06,
    3.3796264822003879e-07, 4.3228213222816808e-08, 4.7284937709903876e-09,
    4.4031741042324855e-10, 3.4724414848034675e-11, 2.3053815449165996e-12,
    1.2797725976765221e-13, 5.8941771723506355e-15, 2.2322175799043663e-16,
    6.8803364842838448e-18, 1.7056037368179332e-19, 3.3537119406659275e-21,
    5.146199560136092e-23, 6.0447625115874606e-25, 5.3105847773208269e-27,
    3.3925280532802891e-29, 1.5217354931814024e-31, 4.5852916145022122e-34,
    8.7621586574856244e-37, 9.827415725146626e-40, 5.8011520191697285e-43,
    1.5309086846063773e-46, 1.3819863056492734e-50, 2.5666336050119781e-55,
    2.7003609402167674e-61,
};

struct Panel {
  double a;
  double b;
  double value;
  double error;
};

struct PanelOrder {
  bool operator()(const Panel& lhs, const Panel& rhs) const { return lhs.error < rhs.error; }
};

template <class F>
Panel gauss_kronrod21(F& f, double a, double b) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  constexpr double kTiny = std::numeric_limits<double>::min();
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double resg = 0.0;
  double resk = kWgk[10] * fc;
  double resabs = std::abs(resk);
  std::array<double, 10> fv1{};
  std::array<double, 10> fv2{};
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    fv1[j] = f1;
    fv2[j] = f2;
    resk += kWgk[j] * (f1 + f2);
    resabs += kWgk[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  const double reskh = 0.5 * resk;
  double resasc = kWgk[10] * std::abs(fc - reskh);
  for (std::size_t j = 0; j < 10; ++j) {
    resasc += kWgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
  }
  const double scale = std::abs(half);
  resabs *= scale;
  resasc *= scale;
  double error = std::abs((resk - resg) * half);
  if (resasc != 0.0 && error != 0.0) {
    error = resasc * std::min(1.0, std::pow(200.0 * error / resasc, 1.5));
  }
  if (resabs > kTiny / (50.0 * kEps)) error = std::max(50.0 * kEps * resabs, error);
  if (!std::isfinite(resk)) error = std::numeric_limits<double>::infinity();
  return {a, b, resk * half, error};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (21 point) integration over the union of
/// the consecutive intervals given by `breakpoints`. The panel with the
/// largest error estimate is bisected until the summed error meets `tol` or
/// `max_bisections` is exhausted (then `converged` is false).
template <class F>
Estimate integrate(F&& f, std::span<const double> breakpoints, Tolerance tol,
                   std::size_t max_bisections = 4000) {
  Estimate out;
  if (breakpoints.size() < 2) return out;
  std::priority_queue<detail::Panel, std::vector<detail::Panel>, detail::PanelOrder> heap;
  double total = 0.0;
  double total_error = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (breakpoints[i + 1] == breakpoints[i]) continue;
    auto panel = detail::gauss_kronrod21(f, breakpoints[i], breakpoints[i + 1]);
    out.evaluations += 21;
    total += panel.value;
    total_error += panel.error;
    heap.push(panel);
  }
  std::size_t bisections = 0;
  while (!heap.empty() && total_error > tol.bound(total)) {
    if (bisections >= max_bisections) {
      out.converged = false;
      break;
    }
    const detail::Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b) ||
        std::abs(worst.b - worst.a) <= 8.0 * std::numeric_limits<double>::epsilon() *
                                               std::max(1.0, std::abs(mid))) {
      out.converged = false;
      break;
    }
    heap.pop();
    const auto left = detail::gauss_kronrod21(f, worst.a, mid);
    const auto right = detail::gauss_kronrod21(f, mid, worst.b);
    out.evaluations += 42;
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++bisections;
  }
  // Re-sum to shed the drift of the running updates.
  std::vector<detail::Panel> panels;
  panels.reserve(heap.size());
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  std::sort(panels.begin(), panels.end(),
            [](const detail::Panel& l, const detail::Panel& r) { return l.a < r.a; });
  out.value = 0.0;
  out.error = 0.0;
  for (const auto& p : panels) {
    out.value += p.value;
    out.error += p.error;
  }
  if (!std::isfinite(out.value)) out.converged = false;
  return out;
}

template <class F>
Estimate integrate(F&& f, std::initializer_list<double> breakpoints, Tolerance tol,
                   std::size_t max_bisections = 4000) {
  return integrate(std::forward<F>(f), std::span<const double>(breakpoints.begin(), breakpoints.size()),
                   tol, max_bisections);
}

/// Integral of a non-oscillatory, integrably decaying f over [start, inf),
/// computed on (0, 1] after the substitution u = start t^{-power}. A decay
/// u^{-p} becomes t^{power (p-1) - 1}, so slow decay wants a larger power.
template <class F>
Estimate integrate_to_infinity(F&& f, double start, Tolerance tol, int power = 1,
                               std::size_t max_bisections = 4000) {
  auto mapped = [&](double t) {
    if (t <= 0.0) return 0.0;
    const double u = start * std::pow(t, -power);
    if (!std::isfinite(u)) return 0.0;
    const double v = f(u) * power * u / t;
    return std::isfinite(v) ? v : 0.0;
  };
  return integrate(mapped, {0.0, 0.125, 0.5, 1.0}, tol, max_bisections);
}

/// Integral over [a, b] of f with an integrable algebraic singularity at a,
/// after the substitution u = a + (b - a) t^m which smooths u^{-p} into
/// t^{m(1-p)-1}.
template <class F>
Estimate integrate_singular_start(F&& f, double a, double b, int m, Tolerance tol,
                                  std::size_t max_bisections = 4000) {
  const double width = b - a;
  auto mapped = [&](double t) {
    if (t <= 0.0) return 0.0;
    const double tm1 = std::pow(t, m - 1);
    return f(a + width * tm1 * t) * width * m * tm1;
  };
  return integrate(mapped, {0.0, 0.5, 1.0}, tol, max_bisections);
}

struct Extrapolation {
  double value = 0.0;
  double error = std::numeric_limits<double>::infinity();
};

/// Wynn's epsilon algorithm applied to a sequence of partial sums. Returns
/// the deepest even-column entry and the distance to the same estimate built
/// without the last term.
inline Extrapolation wynn_epsilon(std::span<const double> partial_sums) {
  auto extrapolate = [](std::span<const double> s) {
    if (s.empty()) return 0.0;
    std::vector<double> prev2(s.size() + 1, 0.0);  // column k-2
    std::vector<double> prev(s.begin(), s.end());   // column k-1
    double best = s.back();
    for (std::size_t k = 1; prev.size() > 1; ++k) {
      std::vector<double> next(prev.size() - 1);
      bool stalled = false;
      for (std::size_t i = 0; i + 1 < prev.size(); ++i) {
        const double diff = prev[i + 1] - prev[i];
        if (diff == 0.0 || !std::isfinite(diff)) {
          stalled = true;
          break;
        }
        next[i] = prev2[i + 1] + 1.0 / diff;
      }
      if (stalled) break;
      if (k % 2 == 0) best = next.back();
      prev2 = std::move(prev);
      prev = std::move(next);
    }
    return best;
  };
  Extrapolation out;
  out.value = extrapolate(partial_sums);
  if (partial_sums.size() >= 2) {
    const double previous = extrapolate(partial_sums.first(partial_sums.size() - 1));
    out.error = std::abs(out.value - previous);
  }
  return out;
}

/// Integral of an oscillatory, algebraically decaying f over [start, inf).
/// The range is cut into consecutive cycles of length `cycle` (half a period
/// of the oscillation); the partial sums are accelerated with wynn_epsilon.
template <class F>
Estimate integrate_oscillatory_tail(F&& f, double start, double cycle, Tolerance tol,
                                    std::size_t max_cycles = 300) {
  Estimate out;
  out.converged = false;
  std::vector<double> partial;
  partial.reserve(max_cycles);
  double running = 0.0;
  double cycle_error = 0.0;
  double last_estimate = std::numeric_limits<double>::quiet_NaN();
  int agreements = 0;
  const Tolerance cycle_tol{tol.absolute * 1e-2, tol.relative * 1e-2};
  for (std::size_t k = 0; k < max_cycles; ++k) {
    const double a = start + static_cast<double>(k) * cycle;
    const double b = a + cycle;
    const auto piece = integrate(f, {a, b}, cycle_tol, 200);
    out.evaluations += piece.evaluations;
    cycle_error += piece.error;
    running += piece.value;
    partial.push_back(running);
    if (partial.size() < 6) continue;
    const auto ext = wynn_epsilon(std::span<const double>(partial).last(std::min<std::size_t>(partial.size(), 40)));
    if (std::isfinite(last_estimate) && std::abs(ext.value - last_estimate) <= 0.5 * tol.bound(ext.value)) {
      ++agreements;
    } else {
      agreements = 0;
    }
    last_estimate = ext.value;
    if (agreements >= 2) {
      out.value = ext.value;
      out.error = std::max(ext.error, cycle_error);
      out.converged = true;
      return out;
    }
  }
  out.value = std::isfinite(last_estimate) ? last_estimate : running;
  out.error = std::numeric_limits<double>::infinity();
  return out;
}

/// Integral of u^{-p} exp(i u) over [start, inf) for start well away from 0,
/// evaluated along the rotated contour u = start + i t.
inline std::complex<double> power_fourier_tail(double p, double start) {
  using namespace std::complex_literals;
  if (start >= 40.0) {
    // Asymptotic series i e^{iU} U^{-p} sum_k (p)_k (-i/U)^k, used while its
    // terms still shrink.
    std::complex<double> term = 1.0;
    std::complex<double> series = 1.0;
    bool settled = false;
    for (int k = 0; k < 60; ++k) {
      const std::complex<double> next = term * ((p + k) / start) * -1.0i;
      if (std::abs(next) >= std::abs(term)) break;
      term = next;
      series += term;
      if (std::abs(term) <= 1e-17 * std::abs(series)) {
        settled = true;
        break;
      }
    }
    if (settled) return 1.0i * std::exp(1.0i * start) * std::pow(start, -p) * series;
  }
  std::complex<double> sum = 0.0;
  for (std::size_t k = 0; k < detail::kLaguerreNodes.size(); ++k) {
    const std::complex<double> u(start, detail::kLaguerreNodes[k]);
    sum += detail::kLaguerreWeights[k] * std::exp(-p * std::log(u));
  }
  return 1.0i * std::exp(1.0i * start) * sum;
}

}  // namespace zeroavoid::quad

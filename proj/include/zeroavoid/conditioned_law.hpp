#pragma once

// The conditioned laws P_x^(gamma). From x != 0 they are realized by weighting
// killed paths with h^(gamma)(X_t)/h^(gamma)(x); from 0 by the last-zero
// surgery sampler under a random clock. The estimators below check the
// conditioned laws against h and the conditioned resolvent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "zeroavoid/closed_forms.hpp"
#include "zeroavoid/error.hpp"
#include "zeroavoid/levy_model.hpp"
#include "zeroavoid/path_engine.hpp"
#include "zeroavoid/quadrature.hpp"
#include "zeroavoid/report.hpp"
#include "zeroavoid/resolvent_kernel.hpp"

namespace zeroavoid {

// ---------------------------------------------------------------------------
// Order-independent reductions

/// Pairwise summation: the result depends only on the order of the input.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
  std::size_t n = 0;
};

/// Sample mean and its standard error.
inline McEstimate mean_of(std::span<const double> v) {
  McEstimate e;
  e.n = v.size();
  e.ess = static_cast<double>(v.size());
  if (v.empty()) return e;
  const double n = static_cast<double>(v.size());
  e.value = pairwise_sum(v) / n;
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - e.value) * (v[i] - e.value);
  e.std_error = v.size() > 1 ? std::sqrt(pairwise_sum(dev) / (n - 1.0) / n) : 0.0;
  return e;
}

/// Ratio sum(num)/sum(den) with a delta-method standard error; ess is the
/// effective sample size of the weights `den`.
inline McEstimate ratio_of(std::span<const double> num, std::span<const double> den) {
  McEstimate e;
  e.n = num.size();
  const double sd = pairwise_sum(den);
  if (sd <= 0.0) return e;
  e.value = pairwise_sum(num) / sd;
  std::vector<double> sq(num.size());
  std::vector<double> infl(num.size());
  for (std::size_t i = 0; i < num.size(); ++i) {
    sq[i] = den[i] * den[i];
    infl[i] = (num[i] - e.value * den[i]) * (num[i] - e.value * den[i]);
  }
  e.ess = sd * sd / pairwise_sum(sq);
  e.std_error = std::sqrt(pairwise_sum(infl)) / sd;
  return e;
}

// ---------------------------------------------------------------------------
// h for Monte Carlo use

/// h of a model as a cheap, thread-safe function: closed forms where they
/// exist, otherwise a table of quadrature values with linear interpolation
/// (and linear extrapolation beyond the table).
class HFunction {
 public:
  explicit HFunction(const LevyModel& model, const QuadratureSpec& spec = {}, double radius = 20.0,
                     std::size_t points = 2001)
      : m2_(model.second_moment()) {
    if (const auto* b = std::get_if<Brownian>(&model.kind())) {
      const double s2 = b->sigma2;
      h_ = [s2](double x) { return std::abs(x) / s2; };
      exact_ = true;
    } else if (auto sp = model.stable_params()) {
      const StableParams p = *sp;
      h_ = [p](double x) { return stable_h(p, x); };
      exact_ = true;
    } else {
      require(points >= 3 && points % 2 == 1 && radius > 0.0, ErrorCode::invalid_parameters,
              "h table needs an odd number of points");
      HEvaluator ev(model, spec);
      auto table = std::make_shared<std::vector<double>>(points);
      const double step = 2.0 * radius / static_cast<double>(points - 1);
      for (std::size_t i = 0; i < points; ++i) (*table)[i] = ev.h(-radius + step * static_cast<double>(i));
      h_ = [table, radius, step](double x) {
        const auto& t = *table;
        const double u = (x + radius) / step;
        const auto last = static_cast<double>(t.size() - 1);
        const double k = std::clamp(std::floor(u), 0.0, last - 1.0);
        const auto i = static_cast<std::size_t>(k);
        return std::max(0.0, t[i] + (u - k) * (t[i + 1] - t[i]));
      };
    }
  }

  double h(double x) const { return h_(x); }
  SecondMoment second_moment() const { return m2_; }
  bool exact() const { return exact_; }

  double h_gamma(double gamma, double x) const {
    require(gamma >= -1.0 && gamma <= 1.0, ErrorCode::invalid_parameters, "gamma must lie in [-1,1]");
    return harmonic(*this, gamma, x);
  }

 private:
  std::function<double(double)> h_;
  SecondMoment m2_;
  bool exact_ = false;
};

// ---------------------------------------------------------------------------
// Clocks and run settings

struct ClockSpec {
  struct Exp {
    double q = 1.0;
  };
  struct Hit {
    double a = 1.0;
  };
  struct TwoHit {
    double a = 1.0;
    double b = 1.0;
  };
  std::variant<Exp, Hit, TwoHit> kind = Exp{};

  static ClockSpec exp(double q) { return checked({Exp{q}}); }
  static ClockSpec hit(double a) { return checked({Hit{a}}); }
  static ClockSpec two_hit(double a, double b) { return checked({TwoHit{a, b}}); }

  void validate() const {
    if (const auto* e = std::get_if<Exp>(&kind)) {
      require(e->q > 0.0 && std::isfinite(e->q), ErrorCode::invalid_parameters, "Exp clock needs q > 0");
    } else if (const auto* h = std::get_if<Hit>(&kind)) {
      require(h->a != 0.0 && std::isfinite(h->a), ErrorCode::invalid_parameters, "Hit clock needs a != 0");
    } else {
      const auto& t = std::get<TwoHit>(kind);
      require(t.a > 0.0 && t.b > 0.0 && std::isfinite(t.a + t.b), ErrorCode::invalid_parameters,
              "TwoHit clock needs a, b > 0");
    }
  }

  /// gamma of the limit law: 0 for Exp, sgn a for Hit, (b - a)/(a + b) for TwoHit.
  double gamma_target() const {
    if (std::holds_alternative<Exp>(kind)) return 0.0;
    if (const auto* h = std::get_if<Hit>(&kind)) return h->a > 0.0 ? 1.0 : -1.0;
    const auto& t = std::get<TwoHit>(kind);
    return (t.b - t.a) / (t.a + t.b);
  }

  /// Levels whose first visit rings the clock.
  std::vector<double> levels() const {
    if (const auto* h = std::get_if<Hit>(&kind)) return {h->a};
    if (const auto* t = std::get_if<TwoHit>(&kind)) return {t->a, -t->b};
    return {};
  }

  std::optional<double> rate() const {
    if (const auto* e = std::get_if<Exp>(&kind)) return e->q;
    return std::nullopt;
  }

  std::string label() const {
    if (const auto* e = std::get_if<Exp>(&kind)) return "exp(q=" + csv::shortest(e->q) + ")";
    if (const auto* h = std::get_if<Hit>(&kind)) return "hit(a=" + csv::shortest(h->a) + ")";
    const auto& t = std::get<TwoHit>(kind);
    return "twohit(a=" + csv::shortest(t.a) + ";b=" + csv::shortest(t.b) + ")";
  }

 private:
  static ClockSpec checked(ClockSpec c) {
    c.validate();
    return c;
  }
};

struct MonteCarlo {
  std::size_t n = 100000;
  std::uint64_t seed = 20240611;
  std::uint32_t stream = 0;
  unsigned workers = 1;
  SimulationSpec sim{};
  double horizon_cap = 1e8;  // a hitting clock that has not rung by then is reported as failed

  void validate() const {
    require(n > 0, ErrorCode::invalid_parameters, "need at least one path");
    require(horizon_cap > 0.0, ErrorCode::invalid_parameters, "horizon cap must be positive");
    sim.validate();
  }
};

/// Path information at the analysis time t, for functionals F_t.
struct PathSummary {
  double value = 0.0;    // X_t
  double maximum = 0.0;  // sup of X over [0, t]
  double minimum = 0.0;  // inf of X over [0, t]
};

using Functional = std::function<double(const PathSummary&)>;

/// The fixed test set: five boxes for X_t/x and three running-extremum thresholds.
inline std::vector<std::pair<std::string, Functional>> test_events(double x) {
  require(x != 0.0, ErrorCode::invalid_parameters, "test events are scaled by x != 0");
  const auto ratio = [x](const PathSummary& p) { return p.value / x; };
  const auto extreme = [x](const PathSummary& p) { return (x > 0.0 ? p.maximum : p.minimum) / x; };
  std::vector<std::pair<std::string, Functional>> out;
  out.emplace_back("X<=0.5x", [=](const PathSummary& p) { return ratio(p) <= 0.5 ? 1.0 : 0.0; });
  out.emplace_back("0.5x<X<=x", [=](const PathSummary& p) { return ratio(p) > 0.5 && ratio(p) <= 1.0 ? 1.0 : 0.0; });
  out.emplace_back("x<X<=1.5x", [=](const PathSummary& p) { return ratio(p) > 1.0 && ratio(p) <= 1.5 ? 1.0 : 0.0; });
  out.emplace_back("1.5x<X<=2.5x", [=](const PathSummary& p) { return ratio(p) > 1.5 && ratio(p) <= 2.5 ? 1.0 : 0.0; });
  out.emplace_back("X>2.5x", [=](const PathSummary& p) { return ratio(p) > 2.5 ? 1.0 : 0.0; });
  for (double c : {1.5, 2.0, 3.0}) {
    out.emplace_back("max>" + csv::shortest(c) + "x", [=](const PathSummary& p) { return extreme(p) > c ? 1.0 : 0.0; });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single-path runs

namespace detail {

struct ClockedRun {
  PathSummary at_t;
  bool alive_at_t = false;  // T_0 > t
  bool accepted = false;    // T_0 > clock
  bool rang = true;         // false when a hitting clock did not ring before the cap
};

// Step length clipped so the walker lands exactly on `stop`.
inline double clip_to(double dt, double now, double stop, bool& lands) {
  const double remaining = stop - now;
  lands = dt >= remaining || remaining - dt < 1e-12 * std::max(1.0, stop);
  return lands ? remaining : dt;
}

/// One path from x, run to time t and, when a clock is given, on until the
/// clock or T_0 decides the event {T_0 > clock}.
inline ClockedRun run_clocked(const LevyModel& model, const IncrementSampler& inc, const ZeroDetectPolicy& policy,
                              const MonteCarlo& mc, double x, double t, const ClockSpec* clock, std::uint32_t stream,
                              std::uint32_t index) {
  Walker w(model, inc, policy, x, mc.seed, stream, index);
  const bool jumps = model.has_jumps();
  const std::vector<double> levels = clock ? clock->levels() : std::vector<double>{};
  double ring = std::numeric_limits<double>::infinity();
  if (clock && clock->rate()) {
    RandomStream c(mc.seed, stream, index, Purpose::clock);
    ring = c.exponential() / *clock->rate();
  }
  ClockedRun out;
  out.at_t = {x, x, x};
  bool killed = false;
  bool decided = clock == nullptr;

  auto record = [&](const Walker::Step& s) {
    if (!killed && s.zero) {
      killed = true;
      if (!decided) {
        decided = true;
        out.accepted = false;
      }
    }
    if (!decided && s.level >= 0) {
      decided = true;
      out.accepted = true;
    }
    if (!decided && w.time() >= ring) {
      decided = true;
      out.accepted = true;
    }
  };
  auto step_length = [&](bool watch) {
    if (jumps) return mc.sim.dt;
    return next_step(model, mc.sim, w.position(), watch ? std::span<const double>(levels) : std::span<const double>{});
  };

  while (w.time() < t) {
    if (killed && (clock == nullptr)) break;
    if (killed && !jumps) {
      // after T_0 only X_t and the running extremes matter: one exact bridge step
      const auto s = w.step(t - w.time());
      out.at_t.maximum = std::max(out.at_t.maximum, s.high);
      out.at_t.minimum = std::min(out.at_t.minimum, s.low);
      w.set_time(t);
      break;
    }
    const bool watch = !decided;
    const double stop = std::min(t, decided ? t : ring);
    bool lands = false;
    const double dt = clip_to(step_length(watch), w.time(), stop, lands);
    const auto s = w.step(dt, watch ? std::span<const double>(levels) : std::span<const double>{});
    if (lands) w.set_time(stop);
    out.at_t.maximum = std::max(out.at_t.maximum, s.high);
    out.at_t.minimum = std::min(out.at_t.minimum, s.low);
    record(s);
  }
  out.at_t.value = w.position();
  out.alive_at_t = !killed;
  if (clock == nullptr) return out;
  while (!decided && w.time() < mc.horizon_cap) {
    const double stop = std::min(ring, mc.horizon_cap);
    bool lands = false;
    const double dt = clip_to(step_length(true), w.time(), stop, lands);
    const auto s = w.step(dt, levels);
    if (lands) w.set_time(stop);
    record(s);
  }
  out.rang = decided;
  return out;
}

inline void check_support(const HFunction& hf, double gamma, double x) {
  require(x != 0.0, ErrorCode::invalid_parameters, "weighting needs a start x != 0");
  require(hf.h_gamma(gamma, x) > 1e-12, ErrorCode::outside_harmonic_support, "h^(gamma)(x) vanishes at the start");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weighted ensembles from x != 0

/// Per-path weights h^(gamma)(X_t)/h^(gamma)(x) 1{T_0 > t} with the path summaries.
struct WeightedRuns {
  std::vector<PathSummary> paths;
  std::vector<double> weights;
  double gamma = 0.0;
  double x = 0.0;
  double horizon = 0.0;

  double ess() const {
    std::vector<double> sq(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) sq[i] = weights[i] * weights[i];
    const double s = pairwise_sum(weights);
    const double s2 = pairwise_sum(sq);
    return s2 > 0.0 ? s * s / s2 : 0.0;
  }
};

inline WeightedRuns weighted_runs(const LevyModel& model, const HFunction& hf, double gamma, double x, double t,
                                  const MonteCarlo& mc) {
  mc.validate();
  detail::check_support(hf, gamma, x);
  require(t > 0.0, ErrorCode::invalid_parameters, "horizon must be positive");
  const IncrementSampler inc(model, mc.sim);
  const auto policy = default_policy(model, mc.sim);
  WeightedRuns out;
  out.gamma = gamma;
  out.x = x;
  out.horizon = t;
  out.paths.resize(mc.n);
  out.weights.resize(mc.n);
  const double hx = hf.h_gamma(gamma, x);
  parallel_for(mc.n, mc.workers, [&](std::size_t i) {
    const auto r = detail::run_clocked(model, inc, policy, mc, x, t, nullptr, mc.stream, static_cast<std::uint32_t>(i));
    out.paths[i] = r.at_t;
    out.weights[i] = r.alive_at_t ? std::max(0.0, hf.h_gamma(gamma, r.at_t.value)) / hx : 0.0;
  });
  return out;
}

/// (1/n) sum F(path) h^(gamma)(X_t)/h^(gamma)(x) 1{T_0 > t}, an estimate of P_x^(gamma)[F_t].
inline McEstimate weighted_expectation(const LevyModel& model, const HFunction& hf, double gamma, double x, double t,
                                       const Functional& f, const MonteCarlo& mc) {
  const auto runs = weighted_runs(model, hf, gamma, x, t, mc);
  std::vector<double> v(runs.weights.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = runs.weights[i] > 0.0 ? f(runs.paths[i]) * runs.weights[i] : 0.0;
  auto e = mean_of(v);
  e.ess = runs.ess();
  return e;
}

// ---------------------------------------------------------------------------
// Meander surgery from 0

/// Segments after the last zero before a clock. Each keeps its first `window`
/// of time; `weights` are all one and kept for a uniform ensemble interface.
struct WeightedEnsemble {
  std::vector<PathSegment> segments;
  std::vector<double> weights;
  double gamma = 0.0;  // target of the clock
  double window = 0.0;
  std::size_t discarded = 0;       // lifetime not longer than the window
  std::size_t clock_failures = 0;  // hitting clock never rang before the cap
  std::size_t attempted = 0;

  double discard_fraction() const {
    return attempted ? static_cast<double>(discarded) / static_cast<double>(attempted) : 0.0;
  }
  double ess() const {
    double s = 0.0;
    double s2 = 0.0;
    for (double w : weights) {
      s += w;
      s2 += w * w;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
  }
};

/// Runs n paths from 0 until the clock rings and keeps the part of each path
/// after its last zero. Brownian steps are capped at sim.dt within `window` of
/// the latest zero; jump models use sim.dt throughout.
inline WeightedEnsemble meander_sample(const LevyModel& model, const ClockSpec& clock, double window,
                                       const MonteCarlo& mc) {
  mc.validate();
  clock.validate();
  require(window > 0.0, ErrorCode::invalid_parameters, "window must be positive");
  const IncrementSampler inc(model, mc.sim);
  const auto policy = default_policy(model, mc.sim);
  const auto levels = clock.levels();
  const bool jumps = model.has_jumps();

  std::vector<std::optional<PathSegment>> slot(mc.n);
  std::vector<std::uint8_t> failed(mc.n, 0);
  parallel_for(mc.n, mc.workers, [&](std::size_t i) {
    const auto index = static_cast<std::uint32_t>(i);
    Walker w(model, inc, policy, 0.0, mc.seed, mc.stream, index);
    double ring = std::numeric_limits<double>::infinity();
    if (auto q = clock.rate()) {
      RandomStream c(mc.seed, mc.stream, index, Purpose::clock);
      ring = c.exponential() / *q;
    }
    const double stop = std::min(ring, mc.horizon_cap);
    double g = 0.0;
    PathSegment seg;
    seg.times = {0.0};
    seg.values = {0.0};
    bool rang = false;
    while (w.time() < stop) {
      double dt = jumps ? mc.sim.dt : next_step(model, mc.sim, w.position(), levels);
      if (w.time() - g < window) dt = std::min(dt, mc.sim.dt);
      bool lands = false;
      dt = detail::clip_to(dt, w.time(), stop, lands);
      const auto s = w.step(dt, levels);
      if (lands) w.set_time(stop);
      if (s.zero) {
        g = w.time();
        seg.times.assign(1, 0.0);
        seg.values.assign(1, w.position());
      } else if (w.time() - g <= window) {
        seg.times.push_back(w.time() - g);
        seg.values.push_back(w.position());
      }
      if (s.level >= 0 || (lands && stop == ring)) {
        rang = true;
        break;
      }
    }
    if (!rang) {
      failed[i] = 1;
      return;
    }
    seg.zeta = w.time() - g;
    seg.terminal = w.position();
    seg.origin = clock.label();
    seg.short_lived = seg.zeta <= window;
    slot[i] = std::move(seg);
  });

  WeightedEnsemble out;
  out.gamma = clock.gamma_target();
  out.window = window;
  out.attempted = mc.n;
  for (std::size_t i = 0; i < mc.n; ++i) {
    if (failed[i]) {
      ++out.clock_failures;
    } else if (slot[i]->short_lived) {
      ++out.discarded;
    } else {
      out.segments.push_back(std::move(*slot[i]));
      out.weights.push_back(1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Drift to +-infinity

struct DriftStats {
  double p_plus = 0.0;
  double p_minus = 0.0;
  double p_unresolved = 0.0;
  double se_plus = 0.0;
  double se_minus = 0.0;
  double se_unresolved = 0.0;
  double ess = 0.0;
};

/// P_x^(gamma)(Omega_inf^+-) = ((1 +- gamma)/2) h^(+-1)(x)/h^(gamma)(x), and (1 +- gamma)/2 at x = 0.
template <HSource S>
std::pair<double, double> drift_targets(const S& source, double gamma, double x) {
  if (x == 0.0) return {(1.0 + gamma) / 2.0, (1.0 - gamma) / 2.0};
  const double hx = harmonic(source, gamma, x);
  return {(1.0 + gamma) / 2.0 * harmonic(source, 1.0, x) / hx, (1.0 - gamma) / 2.0 * harmonic(source, -1.0, x) / hx};
}

namespace detail {

inline DriftStats classify(std::span<const double> terminal, std::span<const double> weights, double level) {
  std::vector<double> plus(terminal.size());
  std::vector<double> minus(terminal.size());
  std::vector<double> unresolved(terminal.size());
  for (std::size_t i = 0; i < terminal.size(); ++i) {
    plus[i] = terminal[i] >= level ? weights[i] : 0.0;
    minus[i] = terminal[i] <= -level ? weights[i] : 0.0;
    unresolved[i] = weights[i] - plus[i] - minus[i];
  }
  DriftStats d;
  const auto ep = ratio_of(plus, weights);
  const auto em = ratio_of(minus, weights);
  d.p_plus = ep.value;
  d.p_minus = em.value;
  d.p_unresolved = 1.0 - d.p_plus - d.p_minus;
  d.se_plus = ep.std_error;
  d.se_minus = em.std_error;
  d.se_unresolved = ratio_of(unresolved, weights).std_error;
  d.ess = ep.ess;
  return d;
}

}  // namespace detail

/// Weighted classification of X_T from x by sign when |X_T| >= K.
inline DriftStats drift_direction_stats(const LevyModel& model, const HFunction& hf, double gamma, double x,
                                        double horizon, double level, const MonteCarlo& mc) {
  require(level > 0.0 && horizon > 0.0, ErrorCode::invalid_parameters, "need T > 0 and K > 0");
  const auto runs = weighted_runs(model, hf, gamma, x, horizon, mc);
  std::vector<double> terminal(runs.paths.size());
  for (std::size_t i = 0; i < terminal.size(); ++i) terminal[i] = runs.paths[i].value;
  return detail::classify(terminal, runs.weights, level);
}

/// Drift of a meander ensemble: each segment is continued from its terminal
/// value for time T under the weighted law P^(gamma) (the conditioned process
/// is Markov), and the pooled weighted classification is returned.
inline DriftStats drift_direction_stats(const WeightedEnsemble& ens, const LevyModel& model, const HFunction& hf,
                                        double horizon, double level, const MonteCarlo& mc) {
  mc.validate();
  require(level > 0.0 && horizon > 0.0, ErrorCode::invalid_parameters, "need T > 0 and K > 0");
  require(!ens.segments.empty(), ErrorCode::invalid_parameters, "empty ensemble");
  const IncrementSampler inc(model, mc.sim);
  const auto policy = default_policy(model, mc.sim);
  const std::size_t n = ens.segments.size();
  std::vector<double> terminal(n);
  std::vector<double> weights(n);
  parallel_for(n, mc.workers, [&](std::size_t i) {
    const double start = ens.segments[i].terminal;
    const double hx = hf.h_gamma(ens.gamma, start);
    if (start == 0.0 || hx <= 0.0) {
      terminal[i] = 0.0;
      weights[i] = 0.0;
      return;
    }
    const auto r =
        detail::run_clocked(model, inc, policy, mc, start, horizon, nullptr, mc.stream, static_cast<std::uint32_t>(i));
    terminal[i] = r.at_t.value;
    weights[i] = r.alive_at_t ? ens.weights[i] * std::max(0.0, hf.h_gamma(ens.gamma, r.at_t.value)) / hx : 0.0;
  });
  return detail::classify(terminal, weights, level);
}

// ---------------------------------------------------------------------------
// Entrance signs

struct EntranceLevel {
  double window = 0.0;
  double dt = 0.0;
  double p_plus = 0.0;
  double p_minus = 0.0;
  double p_mixed = 0.0;
  double se_plus = 0.0;
  double se_minus = 0.0;
  double se_mixed = 0.0;
  std::size_t classified = 0;
  std::size_t empty = 0;  // no grid value inside the window
  double discard_fraction = 0.0;
};

namespace detail {

inline EntranceLevel classify_window(const WeightedEnsemble& ens, double window) {
  std::vector<double> plus;
  std::vector<double> minus;
  std::vector<double> mixed;
  std::vector<double> w;
  EntranceLevel out;
  out.window = window;
  out.discard_fraction = ens.discard_fraction();
  for (std::size_t i = 0; i < ens.segments.size(); ++i) {
    const auto& s = ens.segments[i];
    bool any_pos = false;
    bool any_neg = false;
    bool any = false;
    for (std::size_t k = 1; k < s.times.size() && s.times[k] <= window; ++k) {
      any = true;
      any_pos = any_pos || s.values[k] > 0.0;
      any_neg = any_neg || s.values[k] <= 0.0;
    }
    if (!any) {
      ++out.empty;
      continue;
    }
    w.push_back(ens.weights[i]);
    plus.push_back(any_pos && !any_neg ? ens.weights[i] : 0.0);
    minus.push_back(any_neg && !any_pos ? ens.weights[i] : 0.0);
    mixed.push_back(any_pos && any_neg ? ens.weights[i] : 0.0);
  }
  out.classified = w.size();
  const auto p = ratio_of(plus, w);
  const auto m = ratio_of(minus, w);
  const auto x = ratio_of(mixed, w);
  out.p_plus = p.value;
  out.p_minus = m.value;
  out.p_mixed = x.value;
  out.se_plus = p.std_error;
  out.se_minus = m.std_error;
  out.se_mixed = x.std_error;
  return out;
}

}  // namespace detail

/// Sign classification over the windows (0, delta 2^-j], j = 0..levels-1, of one ensemble.
inline std::vector<EntranceLevel> entrance_sign_stats(const WeightedEnsemble& ens, double delta, int levels) {
  require(levels >= 1 && delta > 0.0, ErrorCode::invalid_parameters, "need delta > 0 and at least one level");
  require(delta <= ens.window, ErrorCode::window_exceeds_lifetime, "window longer than the kept segment lifetime");
  std::vector<EntranceLevel> out;
  for (int j = 0; j < levels; ++j) out.push_back(detail::classify_window(ens, std::ldexp(delta, -j)));
  return out;
}

enum class Refinement {
  grid,    // fixed window delta, step delta/steps 2^-j
  window,  // window delta 2^-j, step window/steps
};

/// Level j resamples the ensemble on a finer grid (with the eps band that goes
/// with it) and classifies the level's window; see Refinement.
inline std::vector<EntranceLevel> entrance_refinement(const LevyModel& model, const ClockSpec& clock, double delta,
                                                      int levels, const MonteCarlo& mc, double steps = 8.0,
                                                      Refinement mode = Refinement::grid) {
  require(levels >= 1 && steps >= 1.0 && delta > 0.0, ErrorCode::invalid_parameters,
          "need a level, delta > 0 and steps >= 1");
  std::vector<EntranceLevel> out;
  for (int j = 0; j < levels; ++j) {
    const double window = mode == Refinement::grid ? delta : std::ldexp(delta, -j);
    MonteCarlo level_mc = mc;
    level_mc.sim.dt = mode == Refinement::grid ? std::ldexp(delta / steps, -j) : window / steps;
    level_mc.stream = mc.stream + static_cast<std::uint32_t>(j);
    const auto ens = meander_sample(model, clock, window, level_mc);
    require(!ens.segments.empty(), ErrorCode::window_exceeds_lifetime, "every segment was shorter than the window");
    auto lv = detail::classify_window(ens, window);
    lv.dt = level_mc.sim.dt;
    out.push_back(lv);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checks that produce report rows

struct CheckResult {
  std::vector<ReportRow> rows;
  bool passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass != Verdict::fail; });
  }
  bool conclusive() const {
    return std::none_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass == Verdict::inconclusive; });
  }
};

namespace detail {

inline Verdict judged(bool ok, double ess) {
  if (ess < kMinEss) return Verdict::inconclusive;
  return verdict(ok);
}

}  // namespace detail

/// E_x^0[h^(gamma)(X_t); T_0 > t] / h^(gamma)(x) against 1, within 3 standard
/// errors plus `allowance` for discretization.
inline CheckResult harmonicity_check(const LevyModel& model, const HFunction& hf, double gamma, double x, double t,
                                     const MonteCarlo& mc, double allowance = 0.0,
                                     Provenance provenance = Provenance::paper) {
  const auto runs = weighted_runs(model, hf, gamma, x, t, mc);
  const auto e = mean_of(runs.weights);
  const double ess = runs.ess();
  CheckResult out;
  out.rows.push_back({"harmonicity", model.label(), gamma, "x=" + csv::shortest(x) + ";t=" + csv::shortest(t), e.value,
                      e.std_error, 1.0, provenance,
                      detail::judged(std::abs(e.value - 1.0) <= 3.0 * e.std_error + allowance, ess)});
  return out;
}

struct MartingalePoint {
  double time = 0.0;
  McEstimate inverse;  // mean of 1/h^(g1)(X_t) under P^(g1)
  McEstimate ratio;    // mean of h^(g2)/h^(g1)(X_t) under P^(g1)
};

/// Under P_x^(g1): 1/h^(g1)(X_t) is a supermartingale and h^(g2)/h^(g1)(X_t) a martingale.
inline CheckResult martingale_check(const LevyModel& model, const HFunction& hf, double g1, double g2, double x,
                                    const std::vector<double>& times, const MonteCarlo& mc,
                                    std::vector<MartingalePoint>* points = nullptr) {
  mc.validate();
  detail::check_support(hf, g1, x);
  require(!times.empty() && std::is_sorted(times.begin(), times.end()) && times.front() > 0.0,
          ErrorCode::invalid_parameters, "times must be positive and increasing");
  const IncrementSampler inc(model, mc.sim);
  const auto policy = default_policy(model, mc.sim);
  const double hx = hf.h_gamma(g1, x);
  const std::size_t m = times.size();
  std::vector<double> inv(mc.n * m, 0.0);
  std::vector<double> rat(mc.n * m, 0.0);
  std::vector<double> wts(mc.n * m, 0.0);
  parallel_for(mc.n, mc.workers, [&](std::size_t i) {
    Walker w(model, inc, policy, x, mc.seed, mc.stream, static_cast<std::uint32_t>(i));
    bool killed = false;
    for (std::size_t k = 0; k < m && !killed; ++k) {
      while (w.time() < times[k] && !killed) {
        bool lands = false;
        const double dt = detail::clip_to(next_step(model, mc.sim, w.position()), w.time(), times[k], lands);
        killed = w.step(dt).zero;
        if (lands) w.set_time(times[k]);
      }
      if (killed) break;
      const double hy = hf.h_gamma(g1, w.position());
      const double weight = std::max(0.0, hy) / hx;
      wts[k * mc.n + i] = weight;
      inv[k * mc.n + i] = hy > 0.0 ? weight / hy : 0.0;
      rat[k * mc.n + i] = hy > 0.0 ? weight * hf.h_gamma(g2, w.position()) / hy : 0.0;
    }
  });
  CheckResult out;
  const double target = hf.h_gamma(g2, x) / hx;
  std::vector<MartingalePoint> pts;
  for (std::size_t k = 0; k < m; ++k) {
    const std::span<const double> iv(inv.data() + k * mc.n, mc.n);
    const std::span<const double> rv(rat.data() + k * mc.n, mc.n);
    const std::span<const double> wv(wts.data() + k * mc.n, mc.n);
    std::vector<double> sq(mc.n);
    for (std::size_t i = 0; i < mc.n; ++i) sq[i] = wv[i] * wv[i];
    const double sw = pairwise_sum(wv);
    const double ess = sw * sw / std::max(pairwise_sum(sq), std::numeric_limits<double>::min());
    MartingalePoint p{times[k], mean_of(iv), mean_of(rv)};
    p.inverse.ess = p.ratio.ess = ess;
    const std::string param = "x=" + csv::shortest(x) + ";t=" + csv::shortest(times[k]) + ";gamma2=" + csv::shortest(g2);
    out.rows.push_back({"martingale-ratio", model.label(), g1, param, p.ratio.value, p.ratio.std_error, target,
                        Provenance::derived,
                        detail::judged(std::abs(p.ratio.value - target) <= 3.0 * p.ratio.std_error + 1e-12, ess)});
    bool decreasing = true;
    if (k > 0) {
      // paired difference of consecutive times on the same paths
      std::vector<double> diff(mc.n);
      const std::span<const double> prev(inv.data() + (k - 1) * mc.n, mc.n);
      for (std::size_t i = 0; i < mc.n; ++i) diff[i] = iv[i] - prev[i];
      const auto d = mean_of(diff);
      decreasing = d.value <= 3.0 * d.std_error;
    }
    out.rows.push_back({"supermartingale-inverse", model.label(), g1, "x=" + csv::shortest(x) + ";t=" + csv::shortest(times[k]),
                        p.inverse.value, p.inverse.std_error, std::nullopt, Provenance::derived,
                        detail::judged(decreasing, ess)});
    pts.push_back(p);
  }
  if (points) *points = std::move(pts);
  return out;
}

// ---------------------------------------------------------------------------
// Conditioning by a random clock

struct GapPoint {
  ClockSpec clock;
  double parameter = 0.0;
  double gap = 0.0;  // sup over the test set
  double std_error = 0.0;
  std::size_t worst_event = 0;
  std::vector<double> event_gaps;  // signed, conditioned minus weighted
  std::vector<double> event_se;
  double acceptance = 0.0;
  double ess = 0.0;
  std::size_t clock_failures = 0;
};

/// Gaps between P_x[F_t | T_0 > clock] (rejection) and P_x^(gamma)[F_t]
/// (weighting of the same paths) over the test set.
inline GapPoint conditioning_gap(const LevyModel& model, const HFunction& hf, double gamma, double x, double t,
                                 const ClockSpec& clock, const MonteCarlo& mc) {
  mc.validate();
  clock.validate();
  detail::check_support(hf, gamma, x);
  const auto events = test_events(x);
  const IncrementSampler inc(model, mc.sim);
  const auto policy = default_policy(model, mc.sim);
  const double hx = hf.h_gamma(gamma, x);
  std::vector<detail::ClockedRun> runs(mc.n);
  parallel_for(mc.n, mc.workers, [&](std::size_t i) {
    runs[i] = detail::run_clocked(model, inc, policy, mc, x, t, &clock, mc.stream, static_cast<std::uint32_t>(i));
  });
  GapPoint out;
  out.clock = clock;
  if (auto q = clock.rate()) {
    out.parameter = *q;
  } else {
    out.parameter = std::abs(clock.levels().front());
  }
  std::vector<double> acc(mc.n);
  std::vector<double> w(mc.n);
  for (std::size_t i = 0; i < mc.n; ++i) {
    out.clock_failures += runs[i].rang ? 0 : 1;
    acc[i] = runs[i].rang && runs[i].accepted ? 1.0 : 0.0;
    w[i] = runs[i].alive_at_t ? std::max(0.0, hf.h_gamma(gamma, runs[i].at_t.value)) / hx : 0.0;
  }
  const double n = static_cast<double>(mc.n);
  const double accepted = pairwise_sum(acc);
  out.acceptance = accepted / n;
  require(accepted >= 30.0, ErrorCode::vanishing_acceptance,
          "acceptance rate " + csv::shortest(out.acceptance) + " too small for " + clock.label());
  {
    std::vector<double> sq(mc.n);
    for (std::size_t i = 0; i < mc.n; ++i) sq[i] = w[i] * w[i];
    const double sw = pairwise_sum(w);
    out.ess = sw * sw / std::max(pairwise_sum(sq), std::numeric_limits<double>::min());
  }
  std::vector<double> fa(mc.n);
  std::vector<double> fw(mc.n);
  std::vector<double> infl(mc.n);
  for (std::size_t e = 0; e < events.size(); ++e) {
    for (std::size_t i = 0; i < mc.n; ++i) {
      const double f = events[e].second(runs[i].at_t);
      fa[i] = acc[i] * f;
      fw[i] = w[i] * f;
    }
    const double pc = pairwise_sum(fa) / accepted;
    const double pw = pairwise_sum(fw) / n;
    // influence function of the difference of the two estimators
    for (std::size_t i = 0; i < mc.n; ++i) infl[i] = (fa[i] - pc * acc[i]) / out.acceptance - (fw[i] - pw);
    const auto d = mean_of(infl);
    out.event_gaps.push_back(pc - pw);
    out.event_se.push_back(d.std_error);
    if (std::abs(pc - pw) > out.gap) {
      out.gap = std::abs(pc - pw);
      out.std_error = d.std_error;
      out.worst_event = e;
    }
  }
  return out;
}

struct TrendTest {
  double slope = 0.0;
  double slope_se = 0.0;
  bool decreasing = false;         // one-sided 95% test of a negative slope
  std::vector<bool> pairwise;      // gap_k > gap_{k+1} at one-sided 95%
};

/// Weighted least squares of the gaps on the schedule index.
inline TrendTest trend_test(const std::vector<GapPoint>& pts) {
  require(pts.size() >= 2, ErrorCode::invalid_parameters, "trend needs two points");
  constexpr double z95 = 1.6448536269514722;
  double sw = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  std::vector<double> w(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double se = std::max(pts[k].std_error, 1e-12);
    w[k] = 1.0 / (se * se);
    sw += w[k];
    sx += w[k] * static_cast<double>(k);
    sy += w[k] * pts[k].gap;
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double dx = static_cast<double>(k) - mx;
    sxx += w[k] * dx * dx;
    sxy += w[k] * dx * (pts[k].gap - my);
  }
  TrendTest out;
  out.slope = sxy / sxx;
  out.slope_se = std::sqrt(1.0 / sxx);
  out.decreasing = out.slope + z95 * out.slope_se < 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double se = std::hypot(pts[k].std_error, pts[k + 1].std_error);
    out.pairwise.push_back(pts[k].gap - pts[k + 1].gap > z95 * se);
  }
  return out;
}

/// Gap rows for a clock schedule plus one trend row.
inline CheckResult conditioning_gap_schedule(const LevyModel& model, const HFunction& hf, double gamma, double x,
                                             double t, const std::vector<ClockSpec>& schedule, const MonteCarlo& mc,
                                             std::vector<GapPoint>* points = nullptr,
                                             const std::string& experiment = "conditioning-gap") {
  std::vector<GapPoint> pts;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    require(std::abs(schedule[k].gamma_target() - gamma) < 1e-12, ErrorCode::invalid_parameters,
            "clock targets a different gamma");
    MonteCarlo m = mc;
    m.stream = mc.stream + static_cast<std::uint32_t>(k);
    pts.push_back(conditioning_gap(model, hf, gamma, x, t, schedule[k], m));
  }
  const auto trend = trend_test(pts);
  CheckResult out;
  double min_ess = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    min_ess = std::min(min_ess, p.ess);
    out.rows.push_back({experiment, model.label(), gamma, p.clock.label(), p.gap, p.std_error, std::nullopt,
                        Provenance::paper, detail::judged(true, p.ess)});
  }
  out.rows.push_back({experiment + "-trend", model.label(), gamma, "slope", trend.slope, trend.slope_se, std::nullopt,
                      Provenance::paper, detail::judged(trend.decreasing, min_ess)});
  if (points) *points = std::move(pts);
  return out;
}

// ---------------------------------------------------------------------------
// Occupation measure against the conditioned resolvent

struct OccupationGrid {
  // consecutive (end time, step) pieces starting at 0; each piece has an even step count
  std::vector<std::pair<double, double>> pieces{{1.0, 1e-3}, {5.0, 1e-2}, {28.0, 0.05}};

  std::vector<double> times() const {
    std::vector<double> out{0.0};
    double start = 0.0;
    for (auto [end, step] : pieces) {
      const auto k = static_cast<std::size_t>(std::llround((end - start) / step));
      require(k % 2 == 0 && end > start, ErrorCode::invalid_parameters, "grid pieces need an even step count");
      for (std::size_t j = 1; j <= k; ++j) out.push_back(j == k ? end : start + static_cast<double>(j) * step);
      start = end;
    }
    return out;
  }
};

struct OccupationBin {
  double lo = 0.0;
  double hi = 0.0;
  McEstimate estimate;
  double bias_band = 0.0;  // |S_dt - S_2dt|
  double target = 0.0;
};

/// int_0^inf e^{-qt} E_x^(gamma)[1_bin(X_t)] dt by trapezoidal time sums of
/// weighted killed paths, against int_bin r_q^(gamma)(x, y) dy.
template <QResolventSource S>
CheckResult occupation_check(const LevyModel& model, const HFunction& hf, const S& oracle, double gamma, double q,
                             double x, const std::vector<double>& edges, const MonteCarlo& mc,
                             const OccupationGrid& grid = {}, std::vector<OccupationBin>* bins_out = nullptr) {
  mc.validate();
  detail::check_support(hf, gamma, x);
  require(q > 0.0, ErrorCode::invalid_parameters, "q must be positive");
  require(edges.size() >= 2 && std::is_sorted(edges.begin(), edges.end()), ErrorCode::invalid_parameters,
          "bin edges must be increasing");
  const auto times = grid.times();
  const std::size_t nb = edges.size() - 1;
  const IncrementSampler inc(model, mc.sim);
  const auto policy = default_policy(model, mc.sim);
  const double hx = hf.h_gamma(gamma, x);
  std::vector<double> fine(mc.n * nb, 0.0);
  std::vector<double> coarse(mc.n * nb, 0.0);
  auto bin_of = [&](double y) -> std::ptrdiff_t {
    if (y < edges.front() || y >= edges.back()) return -1;
    return std::upper_bound(edges.begin(), edges.end(), y) - edges.begin() - 1;
  };
  parallel_for(mc.n, mc.workers, [&](std::size_t i) {
    Walker w(model, inc, policy, x, mc.seed, mc.stream, static_cast<std::uint32_t>(i));
    double* f = fine.data() + i * nb;
    double* c = coarse.data() + i * nb;
    // trapezoid weights: piece ends get half a step on each side
    auto add = [&](std::size_t k, double y, double weight) {
      const auto b = bin_of(y);
      if (b < 0) return;
      const double left = k > 0 ? times[k] - times[k - 1] : 0.0;
      const double right = k + 1 < times.size() ? times[k + 1] - times[k] : 0.0;
      const double v = std::exp(-q * times[k]) * weight;
      f[b] += 0.5 * (left + right) * v;
      if (k % 2 == 0) {
        const double l2 = k > 1 ? times[k] - times[k - 2] : 0.0;
        const double r2 = k + 2 < times.size() ? times[k + 2] - times[k] : 0.0;
        c[b] += 0.5 * (l2 + r2) * v;
      }
    };
    add(0, x, 1.0);
    for (std::size_t k = 1; k < times.size(); ++k) {
      bool killed = false;
      while (w.time() < times[k]) {
        bool lands = false;
        const double dt = detail::clip_to(next_step(model, mc.sim, w.position()), w.time(), times[k], lands);
        killed = w.step(dt).zero || killed;
        if (lands) w.set_time(times[k]);
        if (killed) break;
      }
      if (killed) break;
      add(k, w.position(), std::max(0.0, hf.h_gamma(gamma, w.position())) / hx);
    }
  });
  CheckResult out;
  std::vector<OccupationBin> bins;
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<double> fv(mc.n);
    std::vector<double> cv(mc.n);
    for (std::size_t i = 0; i < mc.n; ++i) {
      fv[i] = fine[i * nb + b];
      cv[i] = coarse[i * nb + b];
    }
    OccupationBin bin;
    bin.lo = edges[b];
    bin.hi = edges[b + 1];
    bin.estimate = mean_of(fv);
    bin.bias_band = std::abs(bin.estimate.value - pairwise_sum(cv) / static_cast<double>(mc.n));
    std::vector<double> cuts{bin.lo};
    if (x > bin.lo && x < bin.hi) cuts.push_back(x);
    cuts.push_back(bin.hi);
    const auto integral = quad::integrate([&](double y) { return r_q_gamma(oracle, gamma, q, x, y); }, cuts,
                                          quad::Tolerance{1e-12, 1e-10});
    bin.target = integral.value;
    const bool ok = std::abs(bin.estimate.value - bin.target) <= 3.0 * bin.estimate.std_error + bin.bias_band;
    out.rows.push_back({"occupation", model.label(), gamma,
                        "q=" + csv::shortest(q) + ";bin=[" + csv::shortest(bin.lo) + ";" + csv::shortest(bin.hi) + ")",
                        bin.estimate.value, bin.estimate.std_error, bin.target, Provenance::derived, verdict(ok)});
    bins.push_back(bin);
  }
  if (bins_out) *bins_out = std::move(bins);
  return out;
}

// ---------------------------------------------------------------------------
// Equivalence bounds

struct EquivalenceRow {
  std::string event;
  double p0 = 0.0;
  double pg = 0.0;
  double lower = 0.0;  // bound factors times p0
  double upper = 0.0;
  double se_lower = 0.0;
  double se_upper = 0.0;
  bool ok = false;
};

/// (1 - |g|) h(x)/h^(g)(x) P^0(A) <= P^(g)(A) <= (1 + |g|) h(x)/h^(g)(x) P^0(A)
/// for the test events, within 3 pooled standard errors. For |g| = 1 only the
/// upper bound is asserted.
inline CheckResult equivalence_bound_check(const LevyModel& model, const HFunction& hf, double gamma, double x, double t,
                                           const MonteCarlo& mc, std::vector<EquivalenceRow>* detail_rows = nullptr) {
  require(model.second_moment().finite(), ErrorCode::invalid_parameters, "equivalence bounds need m^2 < inf");
  detail::check_support(hf, gamma, x);
  detail::check_support(hf, 0.0, x);
  const auto runs = weighted_runs(model, hf, 0.0, x, t, mc);
  const double ratio = hf.h(x) / hf.h_gamma(gamma, x);
  const double lo_f = (1.0 - std::abs(gamma)) * ratio;
  const double hi_f = (1.0 + std::abs(gamma)) * ratio;
  const double hxg = hf.h_gamma(gamma, x);
  const auto events = test_events(x);
  CheckResult out;
  std::vector<EquivalenceRow> rows;
  std::vector<double> a(mc.n);
  std::vector<double> b(mc.n);
  std::vector<double> d(mc.n);
  for (const auto& [name, f] : events) {
    for (std::size_t i = 0; i < mc.n; ++i) {
      const double w0 = runs.weights[i];
      const double wg = w0 > 0.0 ? std::max(0.0, hf.h_gamma(gamma, runs.paths[i].value)) / hxg : 0.0;
      const double v = f(runs.paths[i]);
      a[i] = w0 * v;
      b[i] = wg * v;
    }
    EquivalenceRow r;
    r.event = name;
    r.p0 = mean_of(a).value;
    r.pg = mean_of(b).value;
    r.lower = lo_f * r.p0;
    r.upper = hi_f * r.p0;
    for (std::size_t i = 0; i < mc.n; ++i) d[i] = b[i] - lo_f * a[i];
    r.se_lower = mean_of(d).std_error;
    for (std::size_t i = 0; i < mc.n; ++i) d[i] = hi_f * a[i] - b[i];
    r.se_upper = mean_of(d).std_error;
    const double slack = 1e-12 * std::max(1.0, r.upper);
    const bool lower_ok = std::abs(gamma) >= 1.0 || r.lower <= r.pg + 3.0 * r.se_lower + slack;
    const bool upper_ok = r.pg <= r.upper + 3.0 * r.se_upper + slack;
    r.ok = lower_ok && upper_ok;
    out.rows.push_back({"equivalence", model.label(), gamma, "x=" + csv::shortest(x) + ";A=" + name, r.pg,
                        std::max(r.se_lower, r.se_upper), r.upper, Provenance::paper,
                        detail::judged(r.ok, runs.ess())});
    rows.push_back(r);
  }
  if (detail_rows) *detail_rows = std::move(rows);
  return out;
}

}  // namespace zeroavoid

#pragma once

// Trajectory simulation, zero and level detection, and the last-zero
// surgery that cuts a path at its last visit to zero before a clock.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "zeroavoid/error.hpp"
#include "zeroavoid/levy_model.hpp"
#include "zeroavoid/random.hpp"

namespace zeroavoid {

struct SimulationSpec {
  double dt = 1e-3;           // grid step for jump models, and the cap before analysis times
  double eps_scale = 1.0;     // eps-band half width in units of dt^{1/index}
  double jump_cutoff = 1e-3;  // jumps below this size are folded into the Gaussian part
  // Brownian adaptive steps: clamp((kappa * distance)^2, dt_min, dt_max)
  double adapt_kappa = 0.2;
  double dt_min = 1e-5;
  double dt_max = 0.25;

  void validate() const {
    require(dt > 0.0 && std::isfinite(dt), ErrorCode::invalid_parameters, "time step must be positive");
    require(eps_scale > 0.0, ErrorCode::invalid_parameters, "eps scale must be positive");
    require(jump_cutoff > 0.0, ErrorCode::invalid_parameters, "jump cutoff must be positive");
    require(adapt_kappa > 0.0 && dt_min > 0.0 && dt_max >= dt_min, ErrorCode::invalid_parameters,
            "adaptive step bounds are inconsistent");
  }
};

struct ZeroDetectPolicy {
  enum class Kind { bridge_exact, eps_band };
  Kind kind = Kind::bridge_exact;
  double eps = 0.0;

  static ZeroDetectPolicy bridge_exact() { return {Kind::bridge_exact, 0.0}; }
  static ZeroDetectPolicy eps_band(double eps) {
    require(eps > 0.0, ErrorCode::invalid_parameters, "eps must be positive");
    return {Kind::eps_band, eps};
  }

  void check(const LevyModel& model) const {
    if (kind == Kind::bridge_exact) {
      require(!model.has_jumps(), ErrorCode::policy_model_mismatch, "bridge-exact detection needs a continuous model");
    } else {
      require(eps > 0.0, ErrorCode::invalid_parameters, "eps must be positive");
    }
  }
};

/// Bridge-exact for Brownian motion, otherwise an eps-band of half width
/// eps_scale * dt^{1/index} with index 2 under a Gaussian part and alpha without.
inline ZeroDetectPolicy default_policy(const LevyModel& model, const SimulationSpec& spec) {
  if (!model.has_jumps()) return ZeroDetectPolicy::bridge_exact();
  return ZeroDetectPolicy::eps_band(spec.eps_scale * std::pow(spec.dt, 1.0 / model.small_time_index()));
}

/// Exact-in-law increments over a step of length dt.
class IncrementSampler {
 public:
  struct Draw {
    double dx = 0.0;
    bool jumped = false;  // a compound-Poisson jump occurred in the step
  };

  IncrementSampler(const LevyModel& model, const SimulationSpec& spec)
      : kind_(model.kind().index()), stable_(1.5, 0.0) {
    spec.validate();
    if (const auto* b = std::get_if<Brownian>(&model.kind())) {
      gauss_var_ = b->sigma2;
    } else if (auto sp = model.stable_params()) {
      stable_ = StableSampler(sp->alpha, sp->beta);
      alpha_ = sp->alpha;
      scale_ = sp->c;
    } else {
      const auto& t = std::get<SymmetricTruncatedStable>(model.kind());
      const double cut = std::min(spec.jump_cutoff, t.radius);
      alpha_ = t.alpha;
      gauss_var_ = t.sigma2 + 2.0 * t.intensity * std::pow(cut, 2.0 - t.alpha) / (2.0 - t.alpha);
      low_pow_ = std::pow(cut, -t.alpha);
      high_pow_ = std::pow(t.radius, -t.alpha);
      jump_rate_ = 2.0 * t.intensity * (low_pow_ - high_pow_) / t.alpha;
    }
  }

  Draw operator()(RandomStream& rng, double dt) const {
    Draw out;
    if (kind_ == 0) {
      out.dx = std::sqrt(gauss_var_ * dt) * rng.normal();
    } else if (kind_ == 1 || kind_ == 2) {
      out.dx = std::pow(scale_ * dt, 1.0 / alpha_) * stable_(rng);
    } else {
      out.dx = gauss_var_ > 0.0 ? std::sqrt(gauss_var_ * dt) * rng.normal() : 0.0;
      const double mean = jump_rate_ * dt;
      if (mean > 0.0) {
        // Poisson count by sequential inversion
        double u = rng.uniform();
        double p = std::exp(-mean);
        int count = 0;
        while (u > p && count < 10000) {
          u -= p;
          ++count;
          p *= mean / count;
        }
        for (int j = 0; j < count; ++j) {
          const double size = std::pow(low_pow_ - rng.uniform() * (low_pow_ - high_pow_), -1.0 / alpha_);
          out.dx += rng.uniform() < 0.5 ? -size : size;
          out.jumped = true;
        }
      }
    }
    return out;
  }

  double gaussian_variance() const { return gauss_var_; }
  double jump_rate() const { return jump_rate_; }

 private:
  std::size_t kind_;
  StableSampler stable_;
  double alpha_ = 2.0;
  double scale_ = 1.0;
  double gauss_var_ = 0.0;
  double low_pow_ = 0.0;
  double high_pow_ = 0.0;
  double jump_rate_ = 0.0;
};

namespace detail {

// Whether the path visits `level` during a step from x to y of length dt.
// Bridge-exact uses the Brownian bridge extremum law; the eps-band counts an
// endpoint inside the band, or a crossing the model can only make by creeping.
inline bool level_visited(const LevyModel& model, const ZeroDetectPolicy& policy, double variance, double level,
                          double x, double y, double dt, bool jumped, RandomStream& detect) {
  const double a = x - level;
  const double b = y - level;
  if (policy.kind == ZeroDetectPolicy::Kind::bridge_exact) {
    if (a * b <= 0.0) return true;
    const double p = std::exp(-2.0 * a * b / (variance * dt));
    return detect.uniform() < p;
  }
  if (std::abs(b) <= policy.eps) return true;
  if (a * b >= 0.0) return false;
  const bool upward = b > 0.0;
  if (upward && !model.has_positive_jumps()) return true;
  if (!upward && !model.has_negative_jumps()) return true;
  // no compound-Poisson jump in the step: the crossing was continuous
  return std::holds_alternative<SymmetricTruncatedStable>(model.kind()) && !jumped;
}

}  // namespace detail

/// One trajectory advanced step by step, with zero and level detection.
class Walker {
 public:
  struct Step {
    bool zero = false;
    int level = -1;  // index into the level list of the first level visited
    bool jumped = false;
    double high = 0.0;  // path maximum over the step (sampled bridge maximum for Brownian motion)
    double low = 0.0;
  };

  Walker(const LevyModel& model, const IncrementSampler& sampler, const ZeroDetectPolicy& policy, double x0,
         std::uint64_t seed, std::uint32_t stream, std::uint32_t index)
      : model_(&model),
        sampler_(&sampler),
        policy_(policy),
        increments_(seed, stream, index, Purpose::increments),
        detect_(seed, stream, index, Purpose::detection),
        x_(x0) {
    policy_.check(model);
  }

  double time() const { return t_; }
  double position() const { return x_; }
  void set_time(double t) { t_ = t; }

  Step step(double dt, std::span<const double> levels = {}) {
    const auto draw = (*sampler_)(increments_, dt);
    const double y = x_ + draw.dx;
    Step out;
    out.jumped = draw.jumped;
    const bool bridge = policy_.kind == ZeroDetectPolicy::Kind::bridge_exact;
    if (bridge) {
      // extremes of the Brownian bridge from x to y, drawn by inversion
      const double two_var = 2.0 * sampler_->gaussian_variance() * dt;
      const double d2 = (y - x_) * (y - x_);
      out.high = 0.5 * (x_ + y + std::sqrt(d2 - two_var * std::log(detect_.uniform())));
      out.low = 0.5 * (x_ + y - std::sqrt(d2 - two_var * std::log(detect_.uniform())));
    } else {
      out.high = std::max(x_, y);
      out.low = std::min(x_, y);
    }
    auto visited = [&](double level) {
      if (bridge) return out.low <= level && level <= out.high;
      return detail::level_visited(*model_, policy_, 0.0, level, x_, y, dt, draw.jumped, detect_);
    };
    out.zero = visited(0.0);
    double nearest = out.zero ? std::abs(x_) : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (!visited(levels[i])) continue;
      // two barriers in one step: the one nearer the start wins
      const double d = std::abs(x_ - levels[i]);
      if (d < nearest) {
        nearest = d;
        out.level = static_cast<int>(i);
      }
    }
    if (out.level >= 0) out.zero = false;
    x_ = y;
    t_ += dt;
    return out;
  }

 private:
  const LevyModel* model_;
  const IncrementSampler* sampler_;
  ZeroDetectPolicy policy_;
  RandomStream increments_;
  RandomStream detect_;
  double x_;
  double t_ = 0.0;
};

/// Step length for the next move: adaptive for Brownian motion, the fixed grid otherwise.
inline double next_step(const LevyModel& model, const SimulationSpec& spec, double x,
                        std::span<const double> levels = {}) {
  if (model.has_jumps()) return spec.dt;
  double d = std::abs(x);
  for (double a : levels) d = std::min(d, std::abs(x - a));
  const double s = spec.adapt_kappa * d;
  return std::clamp(s * s, spec.dt_min, spec.dt_max);
}

/// Advances `walker` up to time `until`. Steps are adaptive for Brownian
/// motion (capped at spec.dt before `fine_until`) and land exactly on `until`.
/// on_step(step) is called after every move and returns false to stop early.
template <class OnStep>
void advance(Walker& walker, const LevyModel& model, const SimulationSpec& spec, double until,
             std::span<const double> levels, double fine_until, OnStep&& on_step) {
  while (walker.time() < until) {
    double dt = next_step(model, spec, walker.position(), levels);
    if (walker.time() < fine_until) {
      dt = std::min(dt, spec.dt);
      if (!model.has_jumps()) dt = std::min(dt, fine_until - walker.time());
    }
    const double remaining = until - walker.time();
    if (dt >= remaining || remaining - dt < 1e-12 * until) dt = remaining;
    const auto step = walker.step(dt, levels);
    if (dt == remaining) {
      // land exactly on the target time
      walker.set_time(until);
    }
    if (!on_step(step)) return;
  }
}

struct PathSample {
  double x0 = 0.0;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<std::uint8_t> jumped;  // per step, empty for models without compound-Poisson jumps
  std::string model;
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::uint32_t index = 0;

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
};

/// Trajectory on the uniform grid 0, dt, 2dt, ..., horizon (last step clipped).
inline PathSample sample_path(const LevyModel& model, double x0, double horizon, double dt, std::uint64_t seed,
                              std::uint32_t stream, std::uint32_t index = 0, SimulationSpec spec = {}) {
  require(horizon > 0.0 && dt > 0.0 && dt <= horizon, ErrorCode::invalid_parameters,
          "need 0 < dt <= horizon");
  require(std::isfinite(x0), ErrorCode::invalid_parameters, "start must be finite");
  spec.dt = dt;
  IncrementSampler sampler(model, spec);
  RandomStream rng(seed, stream, index, Purpose::increments);
  PathSample p;
  p.x0 = x0;
  p.model = model.label();
  p.seed = seed;
  p.stream = stream;
  p.index = index;
  const auto n = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  p.times.reserve(n + 1);
  p.values.reserve(n + 1);
  p.times.push_back(0.0);
  p.values.push_back(x0);
  const bool track_jumps = std::holds_alternative<SymmetricTruncatedStable>(model.kind());
  for (std::size_t k = 1; k <= n; ++k) {
    const double t = std::min(horizon, static_cast<double>(k) * dt);
    const auto d = sampler(rng, t - p.times.back());
    p.times.push_back(t);
    p.values.push_back(p.values.back() + d.dx);
    if (track_jumps) p.jumped.push_back(d.jumped ? 1 : 0);
  }
  return p;
}

/// Per-step zero flags of a stored path. Detection randomness comes from the
/// path's own detection stream, so every trace of the same path agrees.
class ZeroTrace {
 public:
  ZeroTrace(const PathSample& path, const LevyModel& model, const ZeroDetectPolicy& policy) : path_(&path) {
    policy.check(model);
    RandomStream detect(path.seed, path.stream, path.index, Purpose::detection);
    const double var = model.gaussian_variance();
    hit_.resize(path.steps(), 0);
    for (std::size_t k = 0; k < path.steps(); ++k) {
      const bool jumped = !path.jumped.empty() && path.jumped[k];
      hit_[k] = detail::level_visited(model, policy, var, 0.0, path.values[k], path.values[k + 1],
                                      path.times[k + 1] - path.times[k], jumped, detect);
    }
  }

  /// Hit attributed to the right end of its step.
  std::optional<double> first_zero() const {
    for (std::size_t k = 0; k < hit_.size(); ++k) {
      if (hit_[k]) return path_->times[k + 1];
    }
    return std::nullopt;
  }

  /// Largest zero time <= tau; the start counts when the path starts at zero.
  std::optional<double> last_zero_before(double tau) const {
    for (std::size_t k = hit_.size(); k-- > 0;) {
      if (hit_[k] && path_->times[k + 1] <= tau) return path_->times[k + 1];
    }
    if (path_->x0 == 0.0) return 0.0;
    return std::nullopt;
  }

  const std::vector<std::uint8_t>& flags() const { return hit_; }

 private:
  const PathSample* path_;
  std::vector<std::uint8_t> hit_;
};

inline std::optional<double> first_zero(const PathSample& path, const LevyModel& model,
                                        const ZeroDetectPolicy& policy) {
  require(path.x0 != 0.0, ErrorCode::invalid_parameters, "first_zero needs a non-zero start");
  return ZeroTrace(path, model, policy).first_zero();
}

inline std::optional<double> last_zero_before(const PathSample& path, const LevyModel& model, double tau,
                                              const ZeroDetectPolicy& policy) {
  require(tau <= path.times.back() + 1e-12, ErrorCode::invalid_parameters, "tau beyond the horizon");
  return ZeroTrace(path, model, policy).last_zero_before(tau);
}

/// First grid time at which the path crosses `level`, or comes within eps of it.
inline std::optional<double> first_hit_level(const PathSample& path, double level, double eps = 0.0) {
  for (std::size_t k = 0; k + 1 < path.values.size(); ++k) {
    const double a = path.values[k] - level;
    const double b = path.values[k + 1] - level;
    if (a * b <= 0.0 || std::abs(b) <= eps) return path.times[k + 1];
  }
  return std::nullopt;
}

struct TwoLevelHit {
  double time = 0.0;
  bool upper = true;  // true when +a was reached first
};

inline std::optional<TwoLevelHit> first_hit_two(const PathSample& path, double a, double b, double eps = 0.0) {
  require(a > 0.0 && b > 0.0, ErrorCode::invalid_parameters, "levels must be positive");
  const auto up = first_hit_level(path, a, eps);
  const auto down = first_hit_level(path, -b, eps);
  if (!up && !down) return std::nullopt;
  if (up && (!down || *up <= *down)) return TwoLevelHit{*up, true};
  return TwoLevelHit{*down, false};
}

struct PathSegment {
  std::vector<double> times;   // s = t - g, starting at 0
  std::vector<double> values;  // X_{g+s} for s < zeta
  double zeta = 0.0;           // lifetime tau - g
  double terminal = 0.0;       // value at the clock time
  std::string origin;          // which surgery produced the segment
  bool short_lived = false;    // zeta <= one grid step

  int start_sign() const { return values.empty() ? 0 : (values.front() > 0.0) - (values.front() < 0.0); }
};

/// The path shifted to its last zero before tau and killed at tau.
inline PathSegment surgery(const PathSample& path, const ZeroTrace& trace, double tau, std::string origin = "surgery") {
  require(tau > 0.0 && tau <= path.times.back() + 1e-12, ErrorCode::invalid_parameters, "tau outside the path");
  const auto g = trace.last_zero_before(tau);
  require(g.has_value(), ErrorCode::invalid_parameters, "no zero before tau");
  PathSegment seg;
  seg.zeta = tau - *g;
  seg.origin = std::move(origin);
  double step = 0.0;
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    const double t = path.times[k];
    if (k > 0) step = std::max(step, t - path.times[k - 1]);
    if (t >= *g && t < tau) {
      seg.times.push_back(t - *g);
      seg.values.push_back(path.values[k]);
    }
    if (t <= tau) seg.terminal = path.values[k];
  }
  seg.short_lived = seg.zeta <= step;
  return seg;
}

inline PathSegment surgery(const PathSample& path, const LevyModel& model, double tau, const ZeroDetectPolicy& policy) {
  return surgery(path, ZeroTrace(path, model, policy), tau);
}

/// Runs body(i) for i in [0, n) on `workers` threads. Each index is handled
/// exactly once; callers store results by index so the outcome does not
/// depend on scheduling.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  constexpr std::size_t chunk = 64;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto run = [&] {
    try {
      for (;;) {
        const std::size_t begin = next.fetch_add(chunk);
        if (begin >= n || failed.load()) return;
        const std::size_t end = std::min(n, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) body(i);
      }
    } catch (...) {
      if (!failed.exchange(true)) failure = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline void write_paths_csv(const std::vector<PathSample>& paths, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::io_failure, "cannot open " + file);
  out << "path_id,t,x\n" << std::setprecision(17);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::size_t k = 0; k < paths[i].times.size(); ++k) {
      out << i << ',' << paths[i].times[k] << ',' << paths[i].values[k] << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::io_failure, "write failed for " + file);
}

inline void write_segments_csv(const std::vector<PathSegment>& segments, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::io_failure, "cannot open " + file);
  out << "segment_id,s,x,zeta\n" << std::setprecision(17);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t k = 0; k < segments[i].times.size(); ++k) {
      out << i << ',' << segments[i].times[k] << ',' << segments[i].values[k] << ',' << segments[i].zeta << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::io_failure, "write failed for " + file);
}

}  // namespace zeroavoid

#pragma once

// Experiment configuration and its INI encoding. The writer emits an
// annotated file; the reader accepts exactly the keys the writer produces.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "zeroavoid/conditioned_law.hpp"
#include "zeroavoid/error.hpp"
#include "zeroavoid/levy_model.hpp"
#include "zeroavoid/report.hpp"
#include "zeroavoid/resolvent_kernel.hpp"

namespace zeroavoid {

struct ModelSpec {
  std::string name = "brownian";  // brownian | stable | sn-stable | truncated-stable
  double sigma2 = 1.0;
  double alpha = 1.5;
  double beta = 0.0;
  double scale = 1.0;
  double intensity = 1.0;
  double radius = 1.0;

  LevyModel build() const {
    if (name == "brownian") return LevyModel(Brownian{sigma2});
    if (name == "stable") return LevyModel(Stable{alpha, beta, scale});
    if (name == "sn-stable") return LevyModel(SpectrallyNegativeStable{alpha});
    if (name == "truncated-stable") return LevyModel(SymmetricTruncatedStable{alpha, intensity, sigma2, radius});
    throw Error(ErrorCode::config_invalid, "unknown model '" + name + "'");
  }

  bool operator==(const ModelSpec&) const = default;
};

struct ClockSchedules {
  std::vector<double> exp_rates{1.0, 0.25, 0.0625};
  std::vector<double> hit_levels{2.0, 4.0, 8.0};
  double twohit_a = 1.5;
  double twohit_b = 3.5;
  std::vector<double> twohit_scales{1.0, 2.0, 4.0};

  std::vector<ClockSpec> exp() const {
    std::vector<ClockSpec> out;
    for (double q : exp_rates) out.push_back(ClockSpec::exp(q));
    return out;
  }
  std::vector<ClockSpec> hit() const {
    std::vector<ClockSpec> out;
    for (double a : hit_levels) out.push_back(ClockSpec::hit(a));
    return out;
  }
  std::vector<ClockSpec> two_hit() const {
    std::vector<ClockSpec> out;
    for (double s : twohit_scales) out.push_back(ClockSpec::two_hit(s * twohit_a, s * twohit_b));
    return out;
  }

  bool operator==(const ClockSchedules&) const = default;
};

/// Knobs of the individual experiments.
struct ExperimentParams {
  double x = 1.0;                       // start of the killed and conditioned runs
  std::vector<double> times{0.5, 1.0};  // harmonicity and martingale times
  double gap_time = 1.0;                // F_t horizon of the conditioning gaps
  double q = 0.5;                       // occupation discount
  double bin_lo = 0.25;
  double bin_hi = 3.0;
  std::size_t bins = 12;
  std::size_t occupation_paths = 20000;
  double drift_horizon = 50.0;
  double drift_level = 3.0;
  double window = 0.01;  // meander window kept after the last zero
  std::size_t ensemble_paths = 5000;
  double singular_level = 8.0;
  double singular_horizon = 500.0;
  // entrance refinement
  int levels = 4;
  double gauss_steps = 8.0;
  double entrance_eps_scale = 0.05;
  double stable_q = 4.0;
  double stable_delta = 0.01;
  double stable_steps = 128.0;
  std::size_t stable_paths = 2000;
  double stable_window_delta = 0.08;
  double stable_window_steps = 1024.0;
  std::size_t stable_window_paths = 1000;
  double one_sided_delta = 5e-4;
  double one_sided_steps = 16.0;
  std::size_t one_sided_paths = 3000;

  bool operator==(const ExperimentParams&) const = default;
};

struct ExperimentConfig {
  ModelSpec model;
  std::vector<double> gammas{-0.4, 0.0, 0.4};
  ClockSchedules clocks;
  QuadratureSpec quadrature;
  SimulationSpec simulation = [] {
    SimulationSpec s;
    s.dt_min = 1e-4;
    return s;
  }();
  double horizon = 1e8;  // hitting clocks that have not rung by then count as failures
  std::size_t n_paths = 100000;
  std::uint64_t seed = 20240611;
  unsigned workers = 1;
  std::string out_dir = "results";
  std::vector<std::string> experiments;  // theorem ids, or "all"
  ExperimentParams params;

  MonteCarlo monte_carlo(std::size_t n, std::uint32_t stream = 0) const {
    MonteCarlo mc;
    mc.n = n;
    mc.seed = seed;
    mc.stream = stream;
    mc.workers = workers;
    mc.sim = simulation;
    mc.horizon_cap = horizon;
    return mc;
  }

  /// Reduced path counts for smoke runs.
  void make_quick() {
    auto cut = [](std::size_t& n, std::size_t floor) { n = std::max<std::size_t>(floor, n / 20); };
    cut(n_paths, 2000);
    cut(params.occupation_paths, 1000);
    cut(params.ensemble_paths, 500);
    cut(params.stable_paths, 200);
    cut(params.stable_window_paths, 200);
    cut(params.one_sided_paths, 200);
  }
};

namespace config_detail {

inline std::string list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + csv::shortest(v[i]);
  return out;
}

inline std::string list(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::config_invalid, key + ": not a number '" + s + "'");
}

inline std::uint64_t to_u64(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    if (!s.empty() && s.front() != '-') {
      const auto v = std::stoull(s, &used);
      if (trim(s.substr(used)).empty()) return v;
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::config_invalid, key + ": not a non-negative integer '" + s + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s)) out.push_back(to_double(key, item));
  return out;
}

inline std::string tail_name(TailMode m) {
  switch (m) {
    case TailMode::automatic: return "automatic";
    case TailMode::extrapolated: return "extrapolated";
    case TailMode::asymptotic_expansion: return "asymptotic";
  }
  return "automatic";
}

inline TailMode tail_mode(const std::string& key, const std::string& s) {
  if (s == "automatic") return TailMode::automatic;
  if (s == "extrapolated") return TailMode::extrapolated;
  if (s == "asymptotic") return TailMode::asymptotic_expansion;
  throw Error(ErrorCode::config_invalid, key + ": unknown tail mode '" + s + "'");
}

// One key: how to print it, how to parse it, and its annotation.
struct Key {
  std::string section;
  std::string name;
  std::string note;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class T>
Key number(std::string section, std::string name, std::string note, T ExperimentConfig::*outer, double T::*field) {
  const std::string key = section + "." + name;
  return {std::move(section), std::move(name), std::move(note),
          [=](const ExperimentConfig& c) { return csv::shortest(c.*outer.*field); },
          [=](ExperimentConfig& c, const std::string& s) { c.*outer.*field = to_double(key, s); }};
}

template <class T>
Key count(std::string section, std::string name, std::string note, T ExperimentConfig::*outer, std::size_t T::*field) {
  const std::string key = section + "." + name;
  return {std::move(section), std::move(name), std::move(note),
          [=](const ExperimentConfig& c) { return std::to_string(c.*outer.*field); },
          [=](ExperimentConfig& c, const std::string& s) { c.*outer.*field = to_u64(key, s); }};
}

inline const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"model", "name", "brownian | stable | sn-stable | truncated-stable",
                 [](const C& c) { return c.model.name; }, [](C& c, const std::string& s) { c.model.name = s; }});
    k.push_back(number("model", "sigma2", "Gaussian variance (brownian, truncated-stable)", &C::model, &ModelSpec::sigma2));
    k.push_back(number("model", "alpha", "stable index", &C::model, &ModelSpec::alpha));
    k.push_back(number("model", "beta", "skewness (stable)", &C::model, &ModelSpec::beta));
    k.push_back(number("model", "scale", "scale c (stable)", &C::model, &ModelSpec::scale));
    k.push_back(number("model", "intensity", "jump intensity (truncated-stable)", &C::model, &ModelSpec::intensity));
    k.push_back(number("model", "radius", "jump truncation radius (truncated-stable)", &C::model, &ModelSpec::radius));

    k.push_back({"run", "gammas", "gamma list, each in [-1,1]", [](const C& c) { return list(c.gammas); },
                 [](C& c, const std::string& s) { c.gammas = to_doubles("run.gammas", s); }});
    k.push_back({"run", "experiments", "theorem ids, comma separated, or all",
                 [](const C& c) { return list(c.experiments); },
                 [](C& c, const std::string& s) { c.experiments = split(s); }});
    k.push_back({"run", "seed", "master seed", [](const C& c) { return std::to_string(c.seed); },
                 [](C& c, const std::string& s) { c.seed = to_u64("run.seed", s); }});
    k.push_back({"run", "workers", "worker threads for path estimators",
                 [](const C& c) { return std::to_string(c.workers); },
                 [](C& c, const std::string& s) {
                   const auto w = to_u64("run.workers", s);
                   require(w >= 1 && w <= 4096, ErrorCode::config_invalid, "run.workers must lie in [1,4096]");
                   c.workers = static_cast<unsigned>(w);
                 }});
    k.push_back({"run", "n_paths", "paths per weighted or clocked estimate",
                 [](const C& c) { return std::to_string(c.n_paths); },
                 [](C& c, const std::string& s) { c.n_paths = to_u64("run.n_paths", s); }});
    k.push_back({"run", "out_dir", "output directory", [](const C& c) { return c.out_dir; },
                 [](C& c, const std::string& s) { c.out_dir = s; }});

    k.push_back({"clocks", "exp_rates", "Exp(q) schedule", [](const C& c) { return list(c.clocks.exp_rates); },
                 [](C& c, const std::string& s) { c.clocks.exp_rates = to_doubles("clocks.exp_rates", s); }});
    k.push_back({"clocks", "hit_levels", "Hit(a) schedule", [](const C& c) { return list(c.clocks.hit_levels); },
                 [](C& c, const std::string& s) { c.clocks.hit_levels = to_doubles("clocks.hit_levels", s); }});
    k.push_back(number("clocks", "twohit_a", "TwoHit upper level a (targets gamma = (b-a)/(a+b))", &C::clocks,
                       &ClockSchedules::twohit_a));
    k.push_back(number("clocks", "twohit_b", "TwoHit lower level -b", &C::clocks, &ClockSchedules::twohit_b));
    k.push_back({"clocks", "twohit_scales", "factors applied to (a, b)",
                 [](const C& c) { return list(c.clocks.twohit_scales); },
                 [](C& c, const std::string& s) { c.clocks.twohit_scales = to_doubles("clocks.twohit_scales", s); }});

    k.push_back(number("quadrature", "truncation", "lambda where the tail rule starts", &C::quadrature,
                       &QuadratureSpec::truncation));
    k.push_back(number("quadrature", "absolute_tolerance", "", &C::quadrature, &QuadratureSpec::absolute_tolerance));
    k.push_back(number("quadrature", "relative_tolerance", "", &C::quadrature, &QuadratureSpec::relative_tolerance));
    k.push_back(count("quadrature", "max_subdivisions", "", &C::quadrature, &QuadratureSpec::max_subdivisions));
    k.push_back({"quadrature", "tail_mode", "automatic | extrapolated | asymptotic",
                 [](const C& c) { return tail_name(c.quadrature.tail_mode); },
                 [](C& c, const std::string& s) { c.quadrature.tail_mode = tail_mode("quadrature.tail_mode", s); }});
    k.push_back(number("quadrature", "derivative_tolerance", "relative step of h(x)/x that ends the slope search",
                       &C::quadrature, &QuadratureSpec::derivative_tolerance));

    k.push_back(number("simulation", "dt", "time step (jump models; Brownian cap near analysis times)",
                       &C::simulation, &SimulationSpec::dt));
    k.push_back(number("simulation", "eps_scale", "eps band half width in units of dt^(1/index)", &C::simulation,
                       &SimulationSpec::eps_scale));
    k.push_back(number("simulation", "jump_cutoff", "jumps below this size become Gaussian", &C::simulation,
                       &SimulationSpec::jump_cutoff));
    k.push_back(number("simulation", "adapt_kappa", "Brownian step (kappa * distance)^2", &C::simulation,
                       &SimulationSpec::adapt_kappa));
    k.push_back(number("simulation", "dt_min", "", &C::simulation, &SimulationSpec::dt_min));
    k.push_back(number("simulation", "dt_max", "", &C::simulation, &SimulationSpec::dt_max));
    k.push_back({"simulation", "horizon", "cap on hitting-clock runs",
                 [](const C& c) { return csv::shortest(c.horizon); },
                 [](C& c, const std::string& s) { c.horizon = to_double("simulation.horizon", s); }});

    using P = ExperimentParams;
    k.push_back(number("experiment", "x", "start point", &C::params, &P::x));
    k.push_back({"experiment", "times", "harmonicity and martingale times",
                 [](const C& c) { return list(c.params.times); },
                 [](C& c, const std::string& s) { c.params.times = to_doubles("experiment.times", s); }});
    k.push_back(number("experiment", "gap_time", "horizon t of the conditioning gaps", &C::params, &P::gap_time));
    k.push_back(number("experiment", "q", "occupation discount rate", &C::params, &P::q));
    k.push_back(number("experiment", "bin_lo", "occupation bins cover [bin_lo, bin_hi)", &C::params, &P::bin_lo));
    k.push_back(number("experiment", "bin_hi", "", &C::params, &P::bin_hi));
    k.push_back(count("experiment", "bins", "", &C::params, &P::bins));
    k.push_back(count("experiment", "occupation_paths", "", &C::params, &P::occupation_paths));
    k.push_back(number("experiment", "drift_horizon", "drift classification time T", &C::params, &P::drift_horizon));
    k.push_back(number("experiment", "drift_level", "drift classification level K", &C::params, &P::drift_level));
    k.push_back(number("experiment", "window", "meander window after the last zero", &C::params, &P::window));
    k.push_back(count("experiment", "ensemble_paths", "paths per meander ensemble", &C::params, &P::ensemble_paths));
    k.push_back(number("experiment", "singular_level", "Hit(+-a) level of the singularity witness", &C::params,
                       &P::singular_level));
    k.push_back(number("experiment", "singular_horizon", "drift classification time of the singularity witness",
                       &C::params, &P::singular_horizon));

    k.push_back({"entrance", "levels", "dyadic refinement levels",
                 [](const C& c) { return std::to_string(c.params.levels); },
                 [](C& c, const std::string& s) {
                   const auto v = to_u64("entrance.levels", s);
                   require(v >= 1 && v <= 30, ErrorCode::config_invalid, "entrance.levels must lie in [1,30]");
                   c.params.levels = static_cast<int>(v);
                 }});
    k.push_back(number("entrance", "gauss_steps", "grid steps per Brownian window", &C::params, &P::gauss_steps));
    k.push_back(number("entrance", "eps_scale", "eps scale for the stable entrance runs", &C::params,
                       &P::entrance_eps_scale));
    k.push_back(number("entrance", "stable_q", "Exp clock rate for the stable ensembles", &C::params, &P::stable_q));
    k.push_back(number("entrance", "stable_delta", "fixed window of the grid refinement", &C::params,
                       &P::stable_delta));
    k.push_back(number("entrance", "stable_steps", "steps per window at the coarsest grid", &C::params,
                       &P::stable_steps));
    k.push_back(count("entrance", "stable_paths", "", &C::params, &P::stable_paths));
    k.push_back(number("entrance", "stable_window_delta", "coarsest window of the window refinement", &C::params,
                       &P::stable_window_delta));
    k.push_back(number("entrance", "stable_window_steps", "steps per window", &C::params, &P::stable_window_steps));
    k.push_back(count("entrance", "stable_window_paths", "", &C::params, &P::stable_window_paths));
    k.push_back(number("entrance", "one_sided_delta", "coarsest window, one-sided stable", &C::params,
                       &P::one_sided_delta));
    k.push_back(number("entrance", "one_sided_steps", "steps per window", &C::params, &P::one_sided_steps));
    k.push_back(count("entrance", "one_sided_paths", "", &C::params, &P::one_sided_paths));
    return k;
  }();
  return table;
}

}  // namespace config_detail

/// Range checks; every failure is config-invalid.
inline void validate(const ExperimentConfig& c) {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::config_invalid, what); };
  try {
    c.model.build();
    c.quadrature.validate();
    c.simulation.validate();
    for (double q : c.clocks.exp_rates) ClockSpec::exp(q);
    for (double a : c.clocks.hit_levels) ClockSpec::hit(a);
    for (const auto& clock : c.clocks.two_hit()) clock.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config_invalid) throw;
    throw Error(ErrorCode::config_invalid, e.what());
  }
  check(!c.gammas.empty(), "gamma list is empty");
  for (double g : c.gammas) check(g >= -1.0 && g <= 1.0, "gamma " + csv::shortest(g) + " outside [-1,1]");
  check(c.n_paths > 0, "n_paths must be positive");
  check(c.workers >= 1, "workers must be at least 1");
  check(c.horizon > 0.0, "horizon must be positive");
  check(!c.out_dir.empty(), "output directory is empty");
  check(!c.clocks.exp_rates.empty() && !c.clocks.hit_levels.empty() && !c.clocks.twohit_scales.empty(),
        "clock schedules need at least one entry");
  for (double s : c.clocks.twohit_scales) check(s > 0.0, "TwoHit scale must be positive");
  const auto& p = c.params;
  check(std::isfinite(p.x) && p.x != 0.0, "experiment.x must be a finite non-zero start");
  check(!p.times.empty() && std::is_sorted(p.times.begin(), p.times.end()) && p.times.front() > 0.0,
        "experiment.times must be positive and increasing");
  check(p.gap_time > 0.0 && p.q > 0.0, "gap_time and q must be positive");
  check(p.bin_lo < p.bin_hi && p.bins >= 1, "occupation bins are empty");
  check(p.occupation_paths > 0 && p.ensemble_paths > 0 && p.stable_paths > 0 && p.stable_window_paths > 0 &&
            p.one_sided_paths > 0,
        "path counts must be positive");
  check(p.drift_horizon > 0.0 && p.drift_level > 0.0, "drift horizon and level must be positive");
  check(p.window > 0.0 && p.singular_level > 0.0 && p.singular_horizon > 0.0,
        "window, singular level and singular horizon must be positive");
  check(p.levels >= 1, "entrance needs a refinement level");
  check(p.gauss_steps >= 1.0 && p.stable_steps >= 1.0 && p.stable_window_steps >= 1.0 && p.one_sided_steps >= 1.0,
        "entrance steps must be at least 1");
  check(p.entrance_eps_scale > 0.0 && p.stable_q > 0.0, "entrance eps scale and clock rate must be positive");
  check(p.stable_delta > 0.0 && p.stable_window_delta > 0.0 && p.one_sided_delta > 0.0,
        "entrance windows must be positive");
}

/// Annotated INI text; read_config(write_config(c)) reproduces c.
inline std::string write_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "; experiment configuration\n; command-line flags override these values\n";
  std::string section;
  for (const auto& k : config_detail::keys()) {
    if (k.section != section) {
      section = k.section;
      out << "\n[" << section << "]\n";
    }
    if (!k.note.empty()) out << "; " << k.note << "\n";
    out << k.name << " = " << k.get(c) << "\n";
  }
  return out.str();
}

/// Parses INI text over the defaults. Unknown sections or keys are rejected.
inline ExperimentConfig read_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::config_invalid, e.what());
  }
  std::map<std::string, const config_detail::Key*> index;
  for (const auto& k : config_detail::keys()) index[k.section + "." + k.name] = &k;
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    require(!body.empty() || body.data().empty(), ErrorCode::config_invalid, "key '" + section + "' outside a section");
    for (const auto& [name, value] : body) {
      const auto it = index.find(section + "." + name);
      require(it != index.end(), ErrorCode::config_invalid, "unknown key " + section + "." + name);
      it->second->set(c, config_detail::trim(value.data()));
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_failure, "cannot read " + path);
  std::stringstream text;
  text << in.rdbuf();
  return read_config(text.str());
}

}  // namespace zeroavoid

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <vector>

#include "zeroavoid/closed_forms.hpp"
#include "zeroavoid/path_engine.hpp"
#include "zeroavoid/resolvent_kernel.hpp"

using namespace zeroavoid;

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe summarize(const std::vector<double>& v) {
  double s = 0.0;
  double s2 = 0.0;
  for (double x : v) {
    s += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(v.size());
  const double mean = s / n;
  return {mean, std::sqrt(std::max(s2 / n - mean * mean, 0.0) / n)};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Time of the first zero before `horizon` for a Brownian walker from x0.
std::optional<double> brownian_zero(const LevyModel& bm, const IncrementSampler& inc, const SimulationSpec& spec,
                                    double x0, double horizon, std::uint32_t index) {
  Walker w(bm, inc, ZeroDetectPolicy::bridge_exact(), x0, 99, 1, index);
  std::optional<double> hit;
  advance(w, bm, spec, horizon, {}, 0.0, [&](const Walker::Step& s) {
    if (s.zero) hit = w.time();
    return !s.zero;
  });
  return hit;
}

}  // namespace

TEST(SamplePath, GridAndReproducibility) {
  LevyModel bm(Brownian{1.0});
  const auto a = sample_path(bm, 0.5, 1.0, 0.3, 7, 2, 5);
  ASSERT_EQ(a.times.size(), 5u);
  EXPECT_EQ(a.times.back(), 1.0);
  EXPECT_EQ(a.values.front(), 0.5);
  for (std::size_t k = 1; k < a.times.size(); ++k) EXPECT_GT(a.times[k], a.times[k - 1]);
  const auto b = sample_path(bm, 0.5, 1.0, 0.3, 7, 2, 5);
  EXPECT_EQ(a.values, b.values);
  const auto c = sample_path(bm, 0.5, 1.0, 0.3, 7, 2, 6);
  EXPECT_NE(a.values, c.values);
  EXPECT_THROW(sample_path(bm, 0.0, 1.0, 2.0, 1, 0), Error);
}

TEST(SamplePath, BrownianMoments) {
  LevyModel bm(Brownian{1.0});
  std::vector<double> end;
  std::vector<double> sq;
  for (std::uint32_t i = 0; i < 100000; ++i) {
    const auto p = sample_path(bm, 0.0, 1.0, 0.01, 3, 0, i);
    end.push_back(p.values.back());
    sq.push_back(p.values.back() * p.values.back());
  }
  const auto m = summarize(end);
  const auto v = summarize(sq);
  EXPECT_NEAR(m.mean, 0.0, 3.0 * m.se);
  EXPECT_NEAR(v.mean, 1.0, 3.0 * v.se);
}

TEST(SamplePath, StableCharacteristicFunction) {
  LevyModel st(Stable{1.5, 0.0, 1.0});
  std::vector<double> c;
  for (std::uint32_t i = 0; i < 100000; ++i) c.push_back(std::cos(sample_path(st, 0.0, 1.0, 0.1, 4, 0, i).values.back()));
  const auto m = summarize(c);
  EXPECT_NEAR(m.mean, std::exp(-1.0), 3.0 * m.se);
}

TEST(SamplePath, TruncatedVariance) {
  SymmetricTruncatedStable p{0.5, 1.0, 0.5, 1.0};
  LevyModel m(p);
  std::vector<double> sq;
  for (std::uint32_t i = 0; i < 50000; ++i) {
    const double x = sample_path(m, 0.0, 1.0, 0.05, 8, 0, i).values.back();
    sq.push_back(x * x);
  }
  const auto v = summarize(sq);
  EXPECT_NEAR(v.mean, m.second_moment().value, 3.0 * v.se);
}

TEST(ZeroDetection, PolicyMismatch) {
  LevyModel st(Stable{1.5, 0.0, 1.0});
  const auto p = sample_path(st, 1.0, 1.0, 0.01, 1, 0);
  EXPECT_THROW(first_zero(p, st, ZeroDetectPolicy::bridge_exact()), Error);
  EXPECT_THROW(ZeroDetectPolicy::eps_band(0.0), Error);
  EXPECT_EQ(default_policy(st, {}).kind, ZeroDetectPolicy::Kind::eps_band);
  EXPECT_NEAR(default_policy(st, {}).eps, std::pow(1e-3, 1.0 / 1.5), 1e-15);
}

TEST(ZeroDetection, ExactZeroOnGrid) {
  LevyModel st(Stable{1.5, 0.0, 1.0});
  PathSample p;
  p.x0 = 1.0;
  p.times = {0.0, 0.1, 0.2, 0.3};
  p.values = {1.0, 0.5, 0.0, 0.7};
  EXPECT_EQ(*first_zero(p, st, ZeroDetectPolicy::eps_band(1e-3)), 0.2);
  p.values = {1.0, 0.5, 0.2, 0.7};
  EXPECT_FALSE(first_zero(p, st, ZeroDetectPolicy::eps_band(1e-3)).has_value());
  EXPECT_EQ(*first_zero(p, st, ZeroDetectPolicy::eps_band(0.25)), 0.2);
}

TEST(ZeroDetection, CreepingCrossingForOneSidedJumps) {
  // No positive jumps: an upward pass through zero must visit it.
  LevyModel sn(SpectrallyNegativeStable{1.5});
  LevyModel two(Stable{1.5, 0.0, 1.0});
  PathSample p;
  p.x0 = -1.0;
  p.times = {0.0, 0.1, 0.2};
  p.values = {-1.0, 0.8, 1.0};
  EXPECT_EQ(*first_zero(p, sn, ZeroDetectPolicy::eps_band(1e-3)), 0.1);
  EXPECT_FALSE(first_zero(p, two, ZeroDetectPolicy::eps_band(1e-3)).has_value());
}

TEST(ZeroDetection, BrownianLaplaceOfHittingTime) {
  LevyModel bm(Brownian{1.0});
  SimulationSpec spec;
  IncrementSampler inc(bm, spec);
  std::vector<double> v;
  for (std::uint32_t i = 0; i < 40000; ++i) {
    const auto t = brownian_zero(bm, inc, spec, 1.0, 200.0, i);
    v.push_back(t ? std::exp(-0.5 * *t) : 0.0);
  }
  const auto m = summarize(v);
  EXPECT_NEAR(m.mean, laplace_T0(bm, 0.5, 1.0), 3.0 * m.se);
}

TEST(ZeroDetection, ReflectionPrinciple) {
  LevyModel bm(Brownian{1.0});
  SimulationSpec spec;
  IncrementSampler inc(bm, spec);
  for (double t : {0.5, 1.0, 2.0}) {
    std::vector<double> alive;
    for (std::uint32_t i = 0; i < 40000; ++i) alive.push_back(brownian_zero(bm, inc, spec, 1.0, t, i) ? 0.0 : 1.0);
    const auto m = summarize(alive);
    EXPECT_NEAR(m.mean, 2.0 * normal_cdf(1.0 / std::sqrt(t)) - 1.0, 3.0 * m.se) << t;
  }
}

TEST(ZeroDetection, BridgeDetectionOnStoredGridIsUnbiased) {
  // coarse stored grid, exact crossing probabilities
  LevyModel bm(Brownian{1.0});
  std::vector<double> alive;
  for (std::uint32_t i = 0; i < 40000; ++i) {
    const auto p = sample_path(bm, 1.0, 1.0, 0.1, 21, 0, i);
    alive.push_back(first_zero(p, bm, ZeroDetectPolicy::bridge_exact()) ? 0.0 : 1.0);
  }
  const auto m = summarize(alive);
  EXPECT_NEAR(m.mean, 2.0 * normal_cdf(1.0) - 1.0, 3.0 * m.se);
}

TEST(ZeroDetection, EpsRefinementIsCauchy) {
  LevyModel st(Stable{1.5, 0.0, 1.0});
  std::vector<double> estimates;
  for (int k = 0; k < 3; ++k) {
    const double eps = 0.1 * std::ldexp(1.0, -k);
    double hits = 0.0;
    const int n = 4000;
    for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(n); ++i) {
      const auto p = sample_path(st, 1.0, 1.0, 1e-3, 5, 0, i);
      hits += first_zero(p, st, ZeroDetectPolicy::eps_band(eps)).has_value();
    }
    estimates.push_back(hits / n);
  }
  // the same paths with a narrower band can only lose hits
  EXPECT_GE(estimates[0], estimates[1]);
  EXPECT_GE(estimates[1], estimates[2]);
  EXPECT_LE(estimates[1] - estimates[2], estimates[0] - estimates[1] + 0.02);
}

TEST(Levels, MonotoneCrossing) {
  PathSample p;
  p.times = {0.0, 1.0, 2.0, 3.0};
  p.values = {0.0, 0.4, 1.2, 2.0};
  EXPECT_EQ(*first_hit_level(p, 1.0), 2.0);
  EXPECT_FALSE(first_hit_level(p, 5.0).has_value());
  const auto two = first_hit_two(p, 1.0, 1.0);
  ASSERT_TRUE(two.has_value());
  EXPECT_TRUE(two->upper);
}

TEST(Levels, GamblersRuinFrequency) {
  LevyModel bm(Brownian{1.0});
  SimulationSpec spec;
  IncrementSampler inc(bm, spec);
  BrownianExact exact;
  for (auto [x, a] : {std::pair{0.3, 1.0}, {0.5, 2.0}}) {
    std::vector<double> hit;
    const std::vector<double> levels{a};
    for (std::uint32_t i = 0; i < 40000; ++i) {
      Walker w(bm, inc, ZeroDetectPolicy::bridge_exact(), x, 31, 0, i);
      double outcome = 0.0;
      advance(w, bm, spec, 1e4, levels, 0.0, [&](const Walker::Step& s) {
        if (s.level == 0) outcome = 1.0;
        return !(s.zero || s.level >= 0);
      });
      hit.push_back(outcome);
    }
    const auto m = summarize(hit);
    EXPECT_NEAR(m.mean, hitting_prob_one(exact, x, a), 3.0 * m.se) << x << " " << a;
  }
}

TEST(Levels, SymmetricExitFromZero) {
  LevyModel bm(Brownian{1.0});
  SimulationSpec spec;
  spec.dt_min = 1e-3;  // exit detection is exact at any step size
  IncrementSampler inc(bm, spec);
  const std::vector<double> levels{1.0, -1.0};
  std::vector<double> up;
  for (std::uint32_t i = 0; i < 40000; ++i) {
    Walker w(bm, inc, ZeroDetectPolicy::bridge_exact(), 0.0, 17, 0, i);
    double outcome = 0.0;
    advance(w, bm, spec, 1e4, levels, 0.0, [&](const Walker::Step& s) {
      if (s.level >= 0) outcome = s.level == 0 ? 1.0 : 0.0;
      return s.level < 0;
    });
    up.push_back(outcome);
  }
  const auto m = summarize(up);
  EXPECT_NEAR(m.mean, 0.5, 3.0 * m.se);
}

TEST(Surgery, DeterministicLastZero) {
  LevyModel st(Stable{1.5, 0.0, 1.0});
  PathSample p;
  p.x0 = 0.0;
  p.times = {0.0, 0.25, 0.5, 0.75};
  p.values = {0.0, 0.0, 0.0, 0.6};
  EXPECT_EQ(*last_zero_before(p, st, 0.4, ZeroDetectPolicy::eps_band(1e-3)), 0.25);
  PathSample never;
  never.x0 = 0.0;
  never.times = {0.0, 0.5, 1.0};
  never.values = {0.0, 0.7, 0.9};
  EXPECT_EQ(*last_zero_before(never, st, 1.0, ZeroDetectPolicy::eps_band(1e-3)), 0.0);
  const auto seg = surgery(never, st, 1.0, ZeroDetectPolicy::eps_band(1e-3));
  EXPECT_EQ(seg.zeta, 1.0);
  EXPECT_EQ(seg.values.size(), 2u);
  const auto cut = surgery(p, st, 0.75, ZeroDetectPolicy::eps_band(1e-3));
  EXPECT_EQ(cut.zeta, 0.25);
}

TEST(Surgery, SegmentsAvoidZeroAndRepeatCalls) {
  LevyModel bm(Brownian{1.0});
  for (std::uint32_t i = 0; i < 200; ++i) {
    const auto p = sample_path(bm, 0.0, 1.0, 1e-3, 12, 0, i);
    const auto g1 = last_zero_before(p, bm, 0.8, ZeroDetectPolicy::bridge_exact());
    const auto g2 = last_zero_before(p, bm, 0.8, ZeroDetectPolicy::bridge_exact());
    ASSERT_EQ(g1, g2);
    const ZeroTrace trace(p, bm, ZeroDetectPolicy::bridge_exact());
    const auto seg = surgery(p, trace, 0.8);
    EXPECT_NEAR(seg.zeta, 0.8 - *g1, 1e-12);
    for (std::size_t k = 1; k < seg.values.size(); ++k) EXPECT_GT(seg.values[k] * seg.values[0], 0.0);
  }
}

TEST(Surgery, ArcsineLaw) {
  LevyModel bm(Brownian{1.0});
  SimulationSpec spec;
  IncrementSampler inc(bm, spec);
  std::vector<double> g;
  const std::uint32_t n = 20000;
  for (std::uint32_t i = 0; i < n; ++i) {
    Walker w(bm, inc, ZeroDetectPolicy::bridge_exact(), 0.0, 5, 0, i);
    double last = 0.0;
    advance(w, bm, spec, 1.0, {}, 0.0, [&](const Walker::Step& s) {
      if (s.zero) last = w.time();
      return true;
    });
    g.push_back(last);
  }
  std::sort(g.begin(), g.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double f = 2.0 / std::numbers::pi * std::asin(std::sqrt(g[i]));
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  EXPECT_LT(ks, 1.63 / std::sqrt(static_cast<double>(n)) + 0.002);
}

TEST(Parallel, IndependentOfWorkerCount) {
  LevyModel st(Stable{1.2, -0.5, 1.0});
  auto run = [&](unsigned workers) {
    std::vector<double> out(500);
    parallel_for(out.size(), workers, [&](std::size_t i) {
      out[i] = sample_path(st, 1.0, 0.5, 0.01, 77, 3, static_cast<std::uint32_t>(i)).values.back();
    });
    return out;
  };
  EXPECT_EQ(run(1), run(4));
}

TEST(Dumps, WritesCsv) {
  LevyModel bm(Brownian{1.0});
  std::vector<PathSample> paths{sample_path(bm, 0.0, 0.01, 0.005, 1, 0, 0)};
  const auto dir = std::filesystem::temp_directory_path();
  write_paths_csv(paths, (dir / "za_paths.csv").string());
  write_segments_csv({surgery(paths[0], bm, 0.01, ZeroDetectPolicy::bridge_exact())}, (dir / "za_seg.csv").string());
  EXPECT_TRUE(std::filesystem::exists(dir / "za_paths.csv"));
  EXPECT_THROW(write_paths_csv(paths, "/nonexistent/x.csv"), Error);
  std::filesystem::remove(dir / "za_paths.csv");
  std::filesystem::remove(dir / "za_seg.csv");
}

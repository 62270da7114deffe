#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <thread>

#include "zeroavoid/resolvent_kernel.hpp"

using namespace zeroavoid;

namespace {

double brownian_resolvent(double q, double x) { return std::exp(-std::sqrt(2.0 * q) * std::abs(x)) / std::sqrt(2.0 * q); }

LevyModel truncated() { return LevyModel(SymmetricTruncatedStable{0.5, 1.0, 1.0, 1.0}); }

}  // namespace

TEST(Resolvent, BrownianDensity) {
  LevyModel bm(Brownian{1.0});
  EXPECT_NEAR(resolvent_density(bm, 0.5, 1.0), std::exp(-1.0), 1e-10);
  EXPECT_NEAR(resolvent_density(bm, 0.5, 0.0), 1.0, 1e-10);
  for (double q : {0.01, 0.3, 4.0}) {
    for (double x : {-3.0, -0.2, 0.7, 6.0}) {
      EXPECT_NEAR(resolvent_density(bm, q, x), brownian_resolvent(q, x), 1e-9 * brownian_resolvent(q, 0.0));
    }
  }
}

TEST(Resolvent, ExtrapolatedTailAgreesWithExpansion) {
  LevyModel st(Stable{1.5, 0.3, 1.0});
  QuadratureSpec slow;
  slow.tail_mode = TailMode::extrapolated;
  for (double x : {-2.0, 0.0, 0.5, 3.0}) {
    EXPECT_NEAR(resolvent_density(st, 0.7, x, slow), resolvent_density(st, 0.7, x), 1e-8);
  }
  for (double x : {-1.0, 2.0}) EXPECT_NEAR(h_q(st, 0.2, x, slow), h_q(st, 0.2, x), 1e-8);
}

TEST(Resolvent, MaximumAtOrigin) {
  for (const LevyModel& m : {LevyModel(Brownian{1.0}), LevyModel(Stable{1.5, 0.3, 1.0}), truncated()}) {
    const double r0 = resolvent_density(m, 0.5, 0.0);
    for (double x = -4.0; x <= 4.0; x += 0.25) EXPECT_LE(resolvent_density(m, 0.5, x), r0 + 1e-10) << m.label();
  }
}

TEST(Resolvent, HqBrownian) {
  LevyModel bm(Brownian{1.0});
  EXPECT_NEAR(h_q(bm, 0.5, 1.0), 1.0 - std::exp(-1.0), 1e-10);
  EXPECT_EQ(h_q(bm, 0.5, 0.0), 0.0);
  // no cancellation at small x
  const double x = 1e-7;
  EXPECT_NEAR(h_q(bm, 0.5, x) / x, 1.0, 1e-6);
}

TEST(Resolvent, HqBelowHSymmetrized) {
  HEvaluator ev(LevyModel(Stable{1.5, 0.3, 1.0}));
  for (double x : {0.5, 2.0}) EXPECT_LE(ev.h_q(0.1, x) + ev.h_q(0.1, -x), ev.h(x) + ev.h(-x));
  HEvaluator tr(truncated());
  for (double q : {1.0, 0.1}) EXPECT_LE(tr.h_q(q, 2.0), tr.h(2.0));
}

TEST(Resolvent, LaplaceOfHittingTime) {
  LevyModel bm(Brownian{1.0});
  EXPECT_NEAR(laplace_T0(bm, 0.5, 1.0), std::exp(-1.0), 1e-10);
  EXPECT_EQ(laplace_T0(bm, 0.5, 0.0), 1.0);
  const double v = laplace_T0(LevyModel(Stable{1.2, -0.5, 1.0}), 0.3, 2.0);
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1.0);
}

TEST(Resolvent, InvalidQ) { EXPECT_THROW(resolvent_density(LevyModel(Brownian{1.0}), 0.0, 1.0), Error); }

TEST(HEvaluator, BrownianIsAbsoluteValue) {
  HEvaluator ev(LevyModel(Brownian{1.0}));
  for (double x : {-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0}) EXPECT_NEAR(ev.h(x), std::abs(x), 1e-10);
  EXPECT_EQ(ev.h(0.0), 0.0);
  HEvaluator scaled(LevyModel(Brownian{2.5}));
  EXPECT_NEAR(scaled.h(3.0), 3.0 / 2.5, 1e-10);
}

TEST(HEvaluator, QExtrapolationAgreesWithDirect) {
  HEvaluator direct(truncated());
  HEvaluator extra(truncated(), {}, HStrategy::q_extrapolation);
  for (double x : {-1.0, 0.5, 2.0}) EXPECT_NEAR(extra.h(x), direct.h(x), 1e-5);
  HEvaluator bm(LevyModel(Brownian{1.0}), {}, HStrategy::q_extrapolation);
  EXPECT_NEAR(bm.h(1.5), 1.5, 1e-6);
}

TEST(HEvaluator, QExtrapolationReportsFailure) {
  QuadratureSpec spec;
  spec.extrapolation_max_steps = 3;
  HEvaluator ev(LevyModel(Stable{1.5, 0.0, 1.0}), spec, HStrategy::q_extrapolation);
  EXPECT_THROW(ev.h(1.0), Error);
}

TEST(HEvaluator, HarmonicFamily) {
  HEvaluator bm(LevyModel(Brownian{1.0}));
  EXPECT_NEAR(bm.h_gamma(0.4, 1.0), 1.4, 1e-10);
  HEvaluator st(LevyModel(Stable{1.5, 0.0, 1.0}));
  EXPECT_EQ(st.h_gamma(0.7, 2.0), st.h(2.0));
  EXPECT_THROW(bm.h_gamma(1.5, 1.0), Error);
  HEvaluator tr(truncated());
  const double m2 = tr.second_moment().value;
  for (double g : {-1.0, -0.3, 0.0, 0.6, 1.0}) {
    for (double x : {0.1, 1.0, 7.0}) {
      EXPECT_GE(tr.h_gamma(g, x), (1.0 + g) * x / m2 - 1e-10);
      EXPECT_GE(tr.h_gamma(g, -x), (1.0 - g) * x / m2 - 1e-10);
    }
  }
}

TEST(HEvaluator, SymmetricSumIdentity) {
  EXPECT_NEAR(symmetric_h_sum(LevyModel(Brownian{1.0}), 1.0), 2.0, 1e-10);
  EXPECT_EQ(symmetric_h_sum(LevyModel(Brownian{1.0}), 0.0), 0.0);
  for (const LevyModel& m : {LevyModel(Stable{1.5, 0.3, 1.0}), LevyModel(Stable{1.2, -0.5, 2.0}), truncated(),
                             LevyModel(SpectrallyNegativeStable{1.7})}) {
    HEvaluator ev(m);
    for (double x : {0.3, 1.0, 4.0}) EXPECT_NEAR(symmetric_h_sum(m, x), ev.h(x) + ev.h(-x), 1e-9) << m.label();
  }
}

TEST(HEvaluator, AsymptoticSlope) {
  HEvaluator tr(truncated());
  const double target = tr.second_moment().inverse();
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 8; ++k) {
    const double x = std::ldexp(1.0, k);
    const double gap = std::abs(tr.h(x) / x - target);
    EXPECT_LE(gap, previous + 1e-9);
    previous = gap;
    EXPECT_NEAR(tr.h(-x) / x, tr.h(x) / x, 1e-9);
  }
  EXPECT_LT(previous, 1e-2 * target);
}

TEST(HEvaluator, ShiftLimit) {
  HEvaluator tr(truncated());
  const double inv = tr.second_moment().inverse();
  for (double x : {-1.0, 0.5, 2.0}) {
    EXPECT_NEAR(tr.h(x + 256.0) - tr.h(256.0), x * inv, 1e-3);
    EXPECT_NEAR(tr.h(x - 256.0) - tr.h(-256.0), -x * inv, 1e-3);
  }
}

TEST(HEvaluator, SlopeIdentity) {
  HEvaluator bm(LevyModel(Brownian{1.0}));
  EXPECT_NEAR(bm.h_prime_zero(Side::plus).value, 1.0, 1e-9);
  EXPECT_NEAR(bm.h_prime_zero(Side::minus).value, -1.0, 1e-9);
  SymmetricTruncatedStable p{0.5, 1.0, 0.5, 1.0};
  HEvaluator tr{LevyModel(p)};
  const auto plus = tr.h_prime_zero(Side::plus);
  const auto minus = tr.h_prime_zero(Side::minus);
  ASSERT_FALSE(plus.infinite);
  ASSERT_FALSE(minus.infinite);
  EXPECT_NEAR(plus.value, -minus.value, 1e-9);
  EXPECT_NEAR((plus.value + std::abs(minus.value)) * p.sigma2 / 2.0, 1.0, 1e-3);
  HEvaluator st(LevyModel(Stable{1.5, 0.0, 1.0}));
  EXPECT_TRUE(st.h_prime_zero(Side::plus).infinite);
  EXPECT_TRUE(st.h_prime_zero(Side::minus).infinite);
  HEvaluator sn(LevyModel(SpectrallyNegativeStable{1.5}));
  EXPECT_TRUE(sn.h_prime_zero(Side::plus).infinite);
  EXPECT_FALSE(sn.h_prime_zero(Side::minus).infinite);
  EXPECT_EQ(sn.h_prime_zero(Side::minus).value, 0.0);
}

TEST(HEvaluator, SmallRatioMonotone) {
  for (const LevyModel& m : {truncated(), LevyModel(Stable{1.5, 0.3, 1.0})}) {
    HEvaluator ev(m);
    for (double sgn : {1.0, -1.0}) {
      double previous = 0.0;
      for (int k = 0; k < 20; ++k) {
        const double x = std::ldexp(1.0, -k);
        const double r = ev.h(sgn * x) / x;
        EXPECT_GE(r, previous - 1e-9 * r) << m.label() << " k=" << k;
        previous = r;
      }
    }
  }
}

TEST(HEvaluator, SubadditiveAndNonNegative) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (const LevyModel& m : {LevyModel(Stable{1.5, 0.3, 1.0}), truncated()}) {
    HEvaluator ev(m);
    for (int i = 0; i < 1000; ++i) {
      const double x = u(gen);
      const double y = u(gen);
      EXPECT_GE(ev.h(x), 0.0);
      EXPECT_LE(ev.h(x + y), ev.h(x) + ev.h(y) + 2.0 * ev.tolerance()) << x << " " << y;
    }
    for (const auto& [x, v] : ev.cached()) EXPECT_GE(v, 0.0);
  }
}

TEST(HEvaluator, HqSubadditive) {
  LevyModel m(Stable{1.2, -0.5, 1.0});
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double x = u(gen);
    const double y = u(gen);
    EXPECT_LE(h_q(m, 0.4, x + y), h_q(m, 0.4, x) + h_q(m, 0.4, y) + 1e-9);
    EXPECT_GE(h_q(m, 0.4, x), 0.0);
  }
}

TEST(HEvaluator, ConcurrentReadersAgree) {
  HEvaluator ev(truncated());
  std::vector<double> xs;
  for (int i = 1; i <= 40; ++i) xs.push_back(0.1 * i);
  std::vector<std::vector<double>> seen(4);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = 0; i < xs.size(); ++i) seen[t].push_back(ev.h(xs[(i + 7 * t) % xs.size()]));
    });
  }
  for (auto& th : pool) th.join();
  HEvaluator fresh(truncated());
  for (int t = 0; t < 4; ++t) {
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(seen[t][i], fresh.h(xs[(i + 7 * t) % xs.size()]));
  }
}

TEST(HEvaluator, WritesTable) {
  HEvaluator ev(LevyModel(Brownian{1.0}));
  const auto path = std::filesystem::temp_directory_path() / "zeroavoid_h_table.csv";
  write_h_table(ev, {-1.0, 0.0, 1.0}, 0.5, path.string());
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "x,h,h_q,symmetric_sum");
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  EXPECT_EQ(rows, 3);
  std::filesystem::remove(path);
  EXPECT_THROW(write_h_table(ev, {1.0}, 0.5, "/nonexistent/dir/x.csv"), Error);
}

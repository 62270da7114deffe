#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "zeroavoid/quadrature.hpp"

namespace quad = zeroavoid::quad;

TEST(Quadrature, PolynomialIsExact) {
  auto r = quad::integrate([](double x) { return x * x * x - 2.0 * x; }, {0.0, 2.0}, {});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 0.0, 1e-13);
}

TEST(Quadrature, EndpointSingularity) {
  auto plain = quad::integrate([](double x) { return 1.0 / std::sqrt(x); }, {0.0, 1.0}, {1e-12, 1e-11});
  EXPECT_NEAR(plain.value, 2.0, 1e-7);
  auto r = quad::integrate_singular_start([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 4, {1e-13, 1e-12});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  auto s = quad::integrate_singular_start([](double x) { return std::pow(x, -0.8); }, 0.0, 1.0, 8, {1e-13, 1e-12});
  EXPECT_TRUE(s.converged);
  EXPECT_NEAR(s.value, 5.0, 1e-10);
}

TEST(Quadrature, InfiniteRange) {
  auto r = quad::integrate_to_infinity([](double x) { return 1.0 / (1.0 + x * x); }, 1.0, {1e-13, 1e-12});
  EXPECT_NEAR(r.value, std::numbers::pi / 4.0, 1e-11);
}

TEST(Quadrature, WynnAcceleratesAlternatingSeries) {
  std::vector<double> partial;
  double s = 0.0;
  for (int k = 0; k < 15; ++k) {
    s += (k % 2 == 0 ? 1.0 : -1.0) / (2.0 * k + 1.0);
    partial.push_back(s);
  }
  auto e = quad::wynn_epsilon(partial);
  EXPECT_NEAR(e.value, std::numbers::pi / 4.0, 1e-10);
  EXPECT_LT(std::abs(s - std::numbers::pi / 4.0), 0.05);
}

TEST(Quadrature, OscillatoryTailMatchesSineIntegral) {
  // integral of sin(u)/u over [pi, inf) = pi/2 - Si(pi)
  const double si_pi = 1.8519370519824661;
  auto r = quad::integrate_oscillatory_tail([](double u) { return std::sin(u) / u; }, std::numbers::pi,
                                            std::numbers::pi, {1e-12, 1e-10});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, std::numbers::pi / 2.0 - si_pi, 1e-10);
}

TEST(Quadrature, PowerFourierTailAgreesWithCycleSums) {
  for (double p : {1.2, 1.5, 2.5}) {
    for (double start : {10.0, 39.0, 40.0, 120.0}) {
      const auto closed = quad::power_fourier_tail(p, start);
      auto re = quad::integrate_oscillatory_tail([p](double u) { return std::cos(u) * std::pow(u, -p); }, start,
                                                 std::numbers::pi, {1e-14, 1e-11});
      auto im = quad::integrate_oscillatory_tail([p](double u) { return std::sin(u) * std::pow(u, -p); }, start,
                                                 std::numbers::pi, {1e-14, 1e-11});
      EXPECT_NEAR(closed.real(), re.value, 1e-10 * std::pow(start, -p) + 1e-14) << p << " " << start;
      EXPECT_NEAR(closed.imag(), im.value, 1e-10 * std::pow(start, -p) + 1e-14) << p << " " << start;
    }
  }
}

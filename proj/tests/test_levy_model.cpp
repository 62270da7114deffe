#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "zeroavoid/levy_model.hpp"

using namespace zeroavoid;

TEST(LevyModel, BrownianExponent) {
  LevyModel m(Brownian{1.0});
  EXPECT_EQ(char_exponent(m, 2.0), complex(2.0, 0.0));
  EXPECT_EQ(char_exponent(m, 0.0), complex(0.0, 0.0));
}

TEST(LevyModel, StableExponent) {
  LevyModel m(Stable{1.5, 0.0, 1.0});
  const auto v = char_exponent(m, -3.0);
  EXPECT_NEAR(v.real(), std::pow(3.0, 1.5), 1e-12);
  EXPECT_NEAR(v.imag(), 0.0, 1e-12);
}

TEST(LevyModel, StableRatioIsConstant) {
  LevyModel m(Stable{1.2, -0.5, 0.7});
  const double ref = std::abs(char_exponent(m, 1.0));
  for (double l : {-10.0, -0.3, 0.01, 2.0, 55.0}) {
    EXPECT_NEAR(std::abs(char_exponent(m, l)) / std::pow(std::abs(l), 1.2), ref, 1e-12 * ref);
  }
}

TEST(LevyModel, ConjugateSymmetryAndPositiveRealPart) {
  for (const LevyModel& m : {LevyModel(Brownian{2.0}), LevyModel(Stable{1.5, 0.3, 1.0}),
                             LevyModel(SpectrallyNegativeStable{1.7}),
                             LevyModel(SymmetricTruncatedStable{0.5, 1.0, 1.0, 1.0})}) {
    for (double l : {0.01, 0.5, 3.0, 40.0, 1e3}) {
      const auto a = char_exponent(m, l);
      const auto b = char_exponent(m, -l);
      EXPECT_NEAR(a.real(), b.real(), 1e-12 * std::abs(a));
      EXPECT_NEAR(a.imag(), -b.imag(), 1e-12 * std::abs(a));
      EXPECT_GE(a.real(), 0.0);
    }
  }
}

TEST(LevyModel, SpectrallyNegativeExponentIsMinusIlambdaToAlpha) {
  const double alpha = 1.5;
  LevyModel m(SpectrallyNegativeStable{alpha});
  for (double l : {-2.0, 0.5, 3.0}) {
    const complex expected = -std::pow(complex(0.0, l), alpha);
    const auto v = char_exponent(m, l);
    EXPECT_NEAR(v.real(), expected.real(), 1e-12);
    EXPECT_NEAR(v.imag(), expected.imag(), 1e-12);
  }
}

TEST(LevyModel, TruncatedExponentMatchesDirectQuadrature) {
  SymmetricTruncatedStable t{0.5, 1.3, 0.0, 2.0};
  LevyModel m(t);
  for (double l : {0.2, 3.0, 4.1, 4.0001, 30.0, 500.0}) {
    // 2 I integral over (0, R] of (1 - cos(l x)) x^{-1-alpha}
    std::vector<double> br{0.0};
    for (double b = 1e-6; b < t.radius; b *= 2.0) br.push_back(b);
    const double cycle = std::numbers::pi / l;
    for (double b = cycle; b < t.radius; b += cycle) br.push_back(b);
    br.push_back(t.radius);
    std::sort(br.begin(), br.end());
    auto r = quad::integrate([&](double x) { return (1.0 - std::cos(l * x)) * std::pow(x, -1.0 - t.alpha); }, br,
                             {1e-13, 1e-12}, 20000);
    EXPECT_NEAR(char_exponent(m, l).real(), 2.0 * t.intensity * r.value, 1e-9 * (1.0 + r.value)) << l;
  }
}

TEST(LevyModel, TruncatedKernelContinuousAtSeriesSwitch) {
  for (double a : {0.3, 1.0, 1.5, 1.9}) {
    const double lo = detail::one_minus_cos_power_integral(a, 8.0);
    const double hi = detail::one_minus_cos_power_integral(a, std::nextafter(8.0, 9.0));
    EXPECT_NEAR(lo, hi, 1e-12 * lo) << a;
  }
}

TEST(LevyModel, SecondMoment) {
  EXPECT_EQ(second_moment(LevyModel(Brownian{1.0})).value, 1.0);
  EXPECT_FALSE(second_moment(LevyModel(Stable{1.5, 0.3, 1.0})).finite());
  EXPECT_FALSE(second_moment(LevyModel(SpectrallyNegativeStable{1.5})).finite());
  LevyModel t(SymmetricTruncatedStable{0.5, 1.0, 0.25, 1.0});
  EXPECT_NEAR(second_moment(t).value, 0.25 + 2.0 / 1.5, 1e-14);
  // against quadrature of x^2 nu(dx)
  auto r = quad::integrate([&](double x) { return x * x * t.levy_density(x); }, {-1.0, 0.0, 1.0}, {1e-13, 1e-12});
  EXPECT_NEAR(0.25 + r.value, second_moment(t).value, 1e-10);
}

TEST(LevyModel, StableDensityReproducesExponent) {
  // Psi(1) for a symmetric stable from its Levy density: 2 * total/2 * integral (1-cos x) x^{-1-a}.
  LevyModel m(Stable{1.5, 0.0, 1.0});
  const double k = detail::one_minus_cos_power_total(1.5);
  EXPECT_NEAR(2.0 * m.levy_density(1.0) * k, 1.0, 1e-12);
}

TEST(LevyModel, ConditionADiagnostic) {
  auto b = condition_a_diagnostic(LevyModel(Brownian{1.0}), 1.0);
  EXPECT_TRUE(b.finite);
  EXPECT_NEAR(b.value(), std::numbers::pi / std::sqrt(2.0), 1e-6);
  EXPECT_TRUE(condition_a_diagnostic(LevyModel(Stable{1.5, 0.0, 1.0}), 1.0).finite);
  EXPECT_TRUE(condition_a_diagnostic(LevyModel(SymmetricTruncatedStable{0.5, 1.0, 1.0, 1.0}), 1.0).finite);
  auto bad = condition_a_diagnostic(LevyModel(SymmetricTruncatedStable{0.5, 1.0, 0.0, 1.0}), 1.0);
  EXPECT_FALSE(bad.finite);
  EXPECT_TRUE(std::isinf(bad.value()));
}

TEST(LevyModel, Validation) {
  EXPECT_THROW(LevyModel(Stable{2.5, 0.0, 1.0}), Error);
  EXPECT_THROW(LevyModel(Stable{1.5, 1.2, 1.0}), Error);
  EXPECT_THROW(LevyModel(Brownian{0.0}), Error);
  EXPECT_THROW(LevyModel(SymmetricTruncatedStable{0.5, -1.0, 1.0, 1.0}), Error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "generators.hpp"
#include "maxrisk/ext_real.hpp"
#include "maxrisk/numeric.hpp"
#include "maxrisk/space.hpp"

using namespace maxrisk;

namespace {
const ExtReal kPos = ExtReal::pos_inf();
const ExtReal kNeg = ExtReal::neg_inf();
}  // namespace

TEST(ExtReal, InfinityTimesZeroIsZero) {
  EXPECT_EQ(kPos * 0.0, ExtReal(0.0));
  EXPECT_EQ(ExtReal(0.0) * kNeg, ExtReal(0.0));
  EXPECT_EQ(kPos * -2.0, kNeg);
}

TEST(ExtReal, OppositeInfinitiesDoNotAdd) {
  EXPECT_THROW(kPos + kNeg, std::domain_error);
  EXPECT_THROW(kPos - kPos, std::domain_error);
  EXPECT_EQ(kPos + 5.0, kPos);
  EXPECT_EQ(kNeg - 5.0, kNeg);
}

TEST(ExtReal, OrderAndResidual) {
  EXPECT_LT(kNeg, ExtReal(-1e300));
  EXPECT_LT(ExtReal(1e300), kPos);
  EXPECT_EQ(residual(kPos, kPos), 0.0);
  EXPECT_EQ(residual(kNeg, 3.0), std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(residual(1.5, -0.5), 2.0);
}

TEST(ExtReal, Parse) {
  EXPECT_EQ(parse_ext_real("inf"), kPos);
  EXPECT_EQ(parse_ext_real("+inf"), kPos);
  EXPECT_EQ(parse_ext_real("-inf"), kNeg);
  EXPECT_EQ(parse_ext_real("2.5"), ExtReal(2.5));
  EXPECT_THROW(parse_ext_real("abc"), std::invalid_argument);
}

TEST(Numeric, LogSumExpStable) {
  std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  std::vector<double> none;
  EXPECT_EQ(log_sum_exp(none), -kInf);
  std::vector<double> with_inf{-kInf, 0.0};
  EXPECT_DOUBLE_EQ(log_sum_exp(with_inf), 0.0);
  EXPECT_NEAR(log_add_exp(-800.0, -800.0), -800.0 + std::log(2.0), 1e-12);
}

TEST(Numeric, Log1mexp) {
  EXPECT_NEAR(log1mexp(-1e-20), std::log(1e-20), 1e-12);
  EXPECT_NEAR(log1mexp(-50.0), -std::exp(-50.0), 1e-30);
  EXPECT_NEAR(log1mexp(-std::log(2.0)), -std::log(2.0), 1e-15);
}

TEST(Numeric, LogNormalSurvivalOracle) {
  // Independent multiprecision values of log(1 - Phi(z)).
  EXPECT_NEAR(log_normal_sf(1.0), -1.8410216450092635058, 1e-14);
  EXPECT_NEAR(log_normal_sf(10.0), -53.231285150512470578, 1e-12);
  EXPECT_NEAR(log_normal_sf(40.0), -804.60844201375378817, 1e-10);
  EXPECT_NEAR(log_normal_sf(-40.0), 0.0, 1e-300);
  EXPECT_NEAR(log_normal_sf(0.0), -std::log(2.0), 1e-15);
}

TEST(Numeric, LogNormalInterval) {
  EXPECT_NEAR(std::exp(log_normal_interval(-1.0, 1.0)), 0.68268949213708589717, 1e-14);
  EXPECT_NEAR(log_normal_interval(30.0, kInf), log_normal_sf(30.0), 1e-12);
}

TEST(Numeric, GoldenSectionFindsMaximum) {
  auto r = golden_section_max([](double x) { return -(x - 0.3) * (x - 0.3); }, -2.0, 2.0, 1e-12);
  EXPECT_NEAR(r.x, 0.3, 1e-8);
  EXPECT_NEAR(r.fx, 0.0, 1e-15);
}

TEST(Numeric, LogIntegrateGaussian) {
  // log of integral of exp(-x^2/2) = log sqrt(2 pi).
  auto li = log_integrate([](double x) { return -0.5 * x * x; }, -kInf, kInf);
  EXPECT_NEAR(li.log_value, 0.5 * std::log(2.0 * M_PI), 1e-12);
  EXPECT_LT(li.rel_error, 1e-10);
}

TEST(Numeric, LogIntegrateHugeScale) {
  // Integrand exp(5000 - (x-3)^2): would overflow without the log shift.
  auto li = log_integrate([](double x) { return 5000.0 - (x - 3.0) * (x - 3.0); }, -kInf, kInf);
  EXPECT_NEAR(li.log_value, 5000.0 + 0.5 * std::log(M_PI), 1e-9);
}

TEST(Numeric, LogIntegrateRejectsGrowth) {
  EXPECT_THROW(log_integrate([](double x) { return x; }, 0.0, kInf), NumericalError);
}

TEST(Space, WeightsValidated) {
  EXPECT_THROW(DiscreteSpace::make({{0.0}, {1.0}}, {0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(DiscreteSpace::make({{0.0}, {1.0}}, {-0.1, 1.1}), std::invalid_argument);
  EXPECT_THROW(DiscreteSpace::make({{0.0}, {1.0, 2.0}}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_NO_THROW(DiscreteSpace::make({{0.0}, {1.0}}, {0.0, 1.0}));
}

TEST(Space, EssentialExtremaIgnoreNullAtoms) {
  auto s = DiscreteSpace::make({{0.0}, {1.0}, {2.0}}, {0.5, 0.0, 0.5});
  Field f(s, {1.0, 100.0, 3.0});
  EXPECT_EQ(ess_sup(f), ExtReal(3.0));
  EXPECT_EQ(ess_inf(f), ExtReal(1.0));
  auto null_set = MeasurableSet::singleton(s, 1);
  EXPECT_EQ(ess_sup(f, null_set), kNeg);
  EXPECT_EQ(ess_inf(f, null_set), kPos);
}

TEST(Space, EssSupFamilyIsPointwiseMax) {
  auto s = DiscreteSpace::make({{0.0}, {1.0}}, {0.5, 0.5});
  Field a(s, {1.0, 5.0});
  Field b(s, {2.0, kNeg});
  auto m = ess_sup_family({a, b}, s);
  EXPECT_EQ(m[0], ExtReal(2.0));
  EXPECT_EQ(m[1], ExtReal(5.0));
}

TEST(Space, LpNormOracle) {
  // Two atoms {1, 2} with equal weight: (1/2 + 2^200/2)^(1/200).
  auto s = DiscreteSpace::make({{0.0}, {1.0}}, {0.5, 0.5});
  Field f(s, {1.0, 2.0});
  std::vector<long> n{200};
  auto v = lp_norm_limit(f, n);
  EXPECT_NEAR(v[0].second, 1.9930805256557356685, 1e-13);
}

TEST(Space, LpNormRejectsUnboundedOrNegative) {
  auto s = DiscreteSpace::make({{0.0}, {1.0}}, {0.5, 0.5});
  std::vector<long> n{2};
  EXPECT_THROW(lp_norm_limit(Field(s, {1.0, kPos}), n), std::invalid_argument);
  EXPECT_THROW(lp_norm_limit(Field(s, {-1.0, 1.0}), n), std::invalid_argument);
}

TEST(Space, JsonRoundTrip) {
  auto s = DiscreteSpace::make({{0.0, 1.0}, {2.0, 3.0}}, {0.25, 0.75});
  auto back = space_from_json(space_to_json(*s));
  EXPECT_TRUE(*back == *s);
  Field f(back, {kPos, -2.5});
  auto g = field_from_json(field_to_json(f), back);
  EXPECT_TRUE(f == g);
}

TEST(SpaceProperty, LpNormMonotoneAndBelowSup) {
  gen::Rng rng(7);
  std::vector<long> grid{1, 2, 4, 8, 16, 64, 256, 1024};
  for (int trial = 0; trial < 200; ++trial) {
    auto s = gen::space(rng);
    auto f = gen::field(rng, s, 0.0, 5.0);
    auto v = lp_norm_limit(f, grid);
    const double sup = ess_sup(f).value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_LE(v[i].second, sup * (1.0 + 1e-12));
      if (i > 0) EXPECT_GE(v[i].second, v[i - 1].second * (1.0 - 1e-12));
    }
  }
}

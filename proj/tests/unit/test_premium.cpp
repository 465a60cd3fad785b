#include <gtest/gtest.h>

#include <cmath>

#include "maxrisk/premium.hpp"

using namespace maxrisk;

namespace {
const auto kSqrt = Distortion::power(2.0);
}

TEST(ClaimModel, DiscreteMergesAndValidates) {
  auto c = ClaimModel::discrete({3.0, 1.0, 1.0, 0.0}, {0.3, 0.25, 0.25, 0.2});
  const auto& d = c.as_discrete();
  ASSERT_EQ(d.values.size(), 3u);
  EXPECT_EQ(d.values[1], 1.0);
  EXPECT_DOUBLE_EQ(d.weights[1], 0.5);
  EXPECT_THROW(ClaimModel::discrete({0.0}, {0.9}), std::invalid_argument);
  EXPECT_THROW(ClaimModel::discrete({0.0, 1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(ClaimModel::gaussian(0.0, -1.0), std::invalid_argument);
}

TEST(ClaimModel, LatticeDetection) {
  auto c = ClaimModel::discrete({0.5, 1.25, 2.75}, {0.2, 0.5, 0.3});
  auto law = c.lattice();
  ASSERT_TRUE(law.has_value());
  EXPECT_DOUBLE_EQ(law->base, 0.5);
  EXPECT_NEAR(law->step, 0.75, 1e-12);
  EXPECT_EQ(law->log_mass.size(), 4u);
  EXPECT_FALSE(ClaimModel::discrete({0.0, 1.0, std::sqrt(2.0)}, {0.2, 0.5, 0.3}).lattice().has_value());
}

TEST(ExponentialPremium, ClosedForms) {
  EXPECT_DOUBLE_EQ(exponential_premium(ClaimModel::gaussian(1.0, 2.0), 0.5), 1.5);
  auto c = ClaimModel::discrete({0.0, 1.0, 3.0}, {0.2, 0.5, 0.3});
  EXPECT_NEAR(exponential_premium(c, 0.7), 1.8522408208422845281, 1e-14);
  EXPECT_THROW(exponential_premium(c, 0.0), std::invalid_argument);
}

TEST(DistortionPremium, TwoAtomValue) {
  // Fair coin claim in {0, 1}, gamma = 1, g = sqrt: log(1 + (e - 1) sqrt(1/2)).
  auto c = ClaimModel::discrete({0.0, 1.0}, {0.5, 0.5});
  EXPECT_NEAR(distortion_exponential_premium(c, kSqrt, 1.0).value, 0.79525634610468167587, 1e-14);
}

TEST(DistortionPremium, DiscreteOracle) {
  auto c = ClaimModel::discrete({0.0, 1.0, 3.0}, {0.2, 0.5, 0.3});
  EXPECT_NEAR(distortion_exponential_premium(c, kSqrt, 0.7).value, 2.3761023642924905059, 1e-13);
  EXPECT_NEAR(distortion_exponential_premium(c, Distortion::identity(), 0.7).value, exponential_premium(c, 0.7),
              1e-14);
}

TEST(DistortionPremium, GaussianIdentityIsExponential) {
  auto c = ClaimModel::gaussian(0.3, 1.7);
  auto v = distortion_exponential_premium(c, Distortion::identity(), 0.8);
  EXPECT_NEAR(v.value, exponential_premium(c, 0.8), 1e-10);
  EXPECT_LT(v.rel_error, 1e-10);
}

TEST(DistortionPremium, ConcaveDistortionLoadsPremium) {
  auto c = ClaimModel::gaussian(0.0, 1.0);
  const double plain = exponential_premium(c, 0.5);
  const double loaded = distortion_exponential_premium(c, kSqrt, 0.5).value;
  EXPECT_GT(loaded, plain);
}

TEST(PooledPremium, DiscreteOracleAtTwo) {
  auto c = ClaimModel::discrete({0.0, 1.0, 3.0}, {0.2, 0.5, 0.3});
  std::vector<long> n{1, 2};
  auto path = pooled_premium_path(c, kSqrt, 0.7, n);
  EXPECT_NEAR(path.rows[0].pi, 2.3761023642924905059, 1e-13);
  EXPECT_NEAR(path.rows[1].pi, 2.3528768944372100461, 1e-13);
  EXPECT_TRUE(path.growth_finite);
}

TEST(PooledPremium, GaussianOracles) {
  // Multiprecision values of (1/n) Pi_{sqrt, 1/2}(S_n), S_n ~ N(0, n).
  auto c = ClaimModel::gaussian(0.0, 1.0);
  std::vector<long> n{1, 10, 100, 200};
  auto path = pooled_premium_path(c, kSqrt, 0.5, n);
  EXPECT_NEAR(path.rows[0].pi, 1.1044335493539967, 1e-10);
  EXPECT_NEAR(path.rows[1].pi, 0.64305972596793404, 1e-10);
  EXPECT_NEAR(path.rows[2].pi, 0.52533426510403114, 1e-10);
  EXPECT_NEAR(path.rows[3].pi, 0.51438731275430216, 1e-10);
}

TEST(PooledPremium, IdentityDistortionIsFlat) {
  // Without distortion, pooling Gaussians gives m + gamma var / 2 at every n.
  auto c = ClaimModel::gaussian(0.2, 1.0);
  std::vector<long> n{1, 4, 16, 64, 256, 1024};
  auto path = pooled_premium_path(c, Distortion::identity(), 0.5, n);
  for (const auto& r : path.rows) EXPECT_NEAR(r.pi, 0.45, 1e-9) << r.n;
  EXPECT_EQ(path.limit->status, LimitStatus::converged);
  EXPECT_NEAR(path.limit_candidate, 0.45, 1e-9);
}

TEST(PooledPremium, NonLatticeRejectedAndCapEnforced) {
  auto irr = ClaimModel::discrete({0.0, 1.0, std::sqrt(2.0)}, {0.2, 0.5, 0.3});
  std::vector<long> n{1};
  EXPECT_THROW(pooled_premium_path(irr, kSqrt, 0.5, n), std::invalid_argument);
  auto c = ClaimModel::discrete({0.0, 1.0}, {0.5, 0.5});
  PremiumOptions opt;
  opt.convolution_cap = 100;
  std::vector<long> big{1000};
  EXPECT_THROW(pooled_premium_path(c, kSqrt, 0.5, big, opt), std::length_error);
}

TEST(PooledPremium, GrowthProbeIdentity) {
  // growth = (1/n) Pi(t S_n); for Gaussian S_n and g = identity it is t m + t^2 gamma var / 2.
  // Here m = 0, var = 1.
  auto c = ClaimModel::gaussian(0.0, 1.0);
  std::vector<long> n{1, 3};
  PremiumOptions opt;
  opt.growth_t = 1.1;
  auto path = pooled_premium_path(c, Distortion::identity(), 0.5, n, opt);
  EXPECT_NEAR(path.rows[0].growth, 0.5 * 1.21 / 2.0, 1e-9);
  EXPECT_NEAR(path.rows[1].growth, 0.5 * 1.21 / 2.0, 1e-9);
}

TEST(Asymptotic, SupOverRate) {
  // I(x) = x^2 / 2 on a fine grid, p = 2, gamma = 0.5: sup (x - x^2/2) = 1/2 at x = 1.
  std::vector<double> pts;
  for (int i = 0; i <= 400; ++i) pts.push_back(-2.0 + 0.01 * i);
  auto s = DiscreteSpace::uniform_1d(pts);
  Field rate = Field::from_function(s, [](std::span<const double> x) { return 0.5 * x[0] * x[0]; });
  EXPECT_NEAR(asymptotic_premium(rate, 2.0, 0.5).value(), 0.5, 1e-12);
  EXPECT_NEAR(iid_limit_premium(LogMgf::gaussian(0.0, 1.0), 2.0, 0.5), 0.5, 1e-15);
  EXPECT_THROW(asymptotic_premium(rate, 0.5, 0.5), std::invalid_argument);
}

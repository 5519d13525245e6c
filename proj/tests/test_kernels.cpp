#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "shelab/errors.hpp"
#include "shelab/kernels.hpp"

using namespace shelab;

// Reference values computed with mpmath at 50 digits (tests/oracles/kernels_oracle.py).

TEST(HeatKernel, ReferenceValue) {
  EXPECT_NEAR(heat_kernel(0.25, 0.5, 2.0), 0.35206532676429947777, 1e-15);
}

TEST(HeatKernel, IntegratesToOneAndIsSymmetric) {
  double sum = 0.0;
  const double h = 1e-3;
  for (int i = -20000; i <= 20000; ++i) sum += heat_kernel(0.3, i * h, 1.7) * h;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(heat_kernel(0.3, 0.4, 1.0), heat_kernel(0.3, -0.4, 1.0));
}

TEST(HeatKernel, RejectsNonPositiveTime) {
  EXPECT_THROW(heat_kernel(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(heat_kernel(1.0, 1.0, -1.0), DomainError);
}

TEST(Erf, ReferenceValues) {
  const struct {
    double x, v;
  } cases[] = {{0.1, 0.1124629160182848922},  {0.5, 0.52049987781304653768},
               {1.0, 0.84270079294971486934}, {2.0, 0.99532226501895273416},
               {3.5, 0.99999925690162765859}, {5.9, 0.9999999999999999281},
               {-1.7, -0.98379045859077456363}, {1e-5, 1.128379167057899935e-5}};
  for (const auto& c : cases) EXPECT_NEAR(shelab::erf(c.x), c.v, 2e-16 * std::max(1.0, std::fabs(c.v))) << c.x;
  EXPECT_EQ(shelab::erf(0.0), 0.0);
  EXPECT_EQ(shelab::erf(-0.3), -shelab::erf(0.3));
  EXPECT_NEAR(shelab::erfc(3.0), 2.2090496998585441373e-5, 1e-20);
}

TEST(Covariance, EqualTimeReferenceValues) {
  const PhysicalParams unit;
  EXPECT_NEAR(cov_equal_time(1.0, 0.0, 10.0, unit), 5.3461655338328149539e-8, 1e-19);  // two-term cancellation costs ~30x
  EXPECT_NEAR(cov_equal_time(1.0, 0.0, 0.3, unit), 0.32842198476342527316, 1e-15);
  EXPECT_NEAR(cov_equal_time(1.0, 0.0, 0.5, {2.0, 3.0}), 2.015919721793240898, 1e-14);
  EXPECT_NEAR(cov_equal_time(2.0, 0.0, 0.0, {0.5, 2.0}), 3.1915382432114614235, 1e-14);
}

TEST(Covariance, EqualTimeDiagonalIsVariance) {
  // Var X_t(x) = sigma^2 sqrt(t / (2 pi alpha))
  for (double t : {0.01, 0.25, 1.0, 7.0}) {
    const PhysicalParams p{1.3, 0.8};
    EXPECT_NEAR(cov_equal_time(t, 0.2, 0.2, p),
                p.sigma * p.sigma * std::sqrt(t / (2 * std::numbers::pi * p.alpha)), 1e-15);
  }
}

TEST(Covariance, EqualSpaceReferenceAndSymmetry) {
  EXPECT_NEAR(cov_equal_space(0.5, 1.5, {}), 0.11684748862755453447, 1e-15);
  EXPECT_THROW(cov_equal_space(2.0, 1.0, {}), DomainError);
  EXPECT_NEAR(cov_equal_space(1.0, 1.0, {}), cov_equal_time(1.0, 0.0, 0.0, {}), 1e-15);
}

TEST(Covariance, ScalingRule) {
  // Cov_{a,s}(s,t;x,y) = (s^2 / a) Cov_{1,1}(a s, a t; x, y)
  const PhysicalParams p{2.5, 1.7};
  for (double d : {0.0, 0.1, 1.3}) {
    EXPECT_NEAR(cov_equal_time(0.8, 0.0, d, p),
                p.sigma * p.sigma / p.alpha * cov_equal_time(p.alpha * 0.8, 0.0, d, {}), 1e-15);
  }
}

TEST(Oracle, ReferenceValues) {
  EXPECT_NEAR(cov_oracle({0.7, 1.3, 0.2, -0.4}, {0.5, 1.5}), 0.48794561289239383637, 1e-13);
  EXPECT_NEAR(cov_oracle({0.5, 1.5, 0.0, 0.0}, {}), 0.11684748862755453447, 1e-13);
  EXPECT_NEAR(cov_oracle({1.0, 1.0, 0.0, 10.0}, {}), 5.3461655338328149539e-8, 1e-15);
}

TEST(Oracle, AgreesWithClosedFormsOnAGrid) {
  double worst = 0.0;
  const PhysicalParams p{1.0, 1.0};
  for (int i = 1; i <= 8; ++i) {
    const double t = 0.125 * i;
    for (int j = 0; j < 8; ++j) {
      const double d = 0.2 * j;
      const double exact = cov_equal_time(t, 0.0, d, p);
      worst = std::max(worst, std::fabs(cov_oracle({t, t, 0.0, d}, p) - exact) / exact);
      const double s = t * j / 8.0;
      if (s > 0.0) {
        const double e2 = cov_equal_space(s, t, p);
        worst = std::max(worst, std::fabs(cov_oracle({s, t, 0.3, 0.3}, p) - e2) / e2);
      }
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Oracle, ZeroAtTimeZeroAndRejectsBadOrder) {
  EXPECT_EQ(cov_oracle({0.0, 1.0, 0.0, 0.0}, {}), 0.0);
  EXPECT_THROW(cov_oracle({2.0, 1.0, 0.0, 0.0}, {}), DomainError);
}

TEST(Oracle, ReportsNonConvergence) {
  OracleOptions tight;
  tight.rel_tol = 1e-30;
  tight.abs_floor = 0.0;
  tight.max_depth = 2;
  EXPECT_THROW(cov_oracle_detailed({0.5, 1.0, 0.0, 0.2}, {}, tight), NumericalError);
}

TEST(Increments, ReferenceValues) {
  EXPECT_NEAR(spatial_increment_var(0.1, 1.0, {}), 0.049002852029500110705, 1e-16);
  EXPECT_NEAR(spatial_increment_var(1e-4, 1.0, {}), 4.9999002644299204201e-5, 1e-19);
  EXPECT_NEAR(temporal_increment_var(0.01, 1.0, {}), 0.056416483530600104997, 1e-16);
  EXPECT_NEAR(temporal_increment_var(1e-6, 1.0, {}), 5.6418958352282241312e-4, 1e-18);
}

TEST(Increments, ConsistentWithCovariance) {
  const PhysicalParams p{0.7, 1.2};
  const double t = 0.9, d = 0.05;
  const double v = 2 * cov_equal_time(t, 0, 0, p) - 2 * cov_equal_time(t, 0, d, p);
  EXPECT_NEAR(spatial_increment_var(d, t, p), v, 1e-13);
  const double w = cov_equal_space(t + d, t + d, p) + cov_equal_space(t, t, p) - 2 * cov_equal_space(t, t + d, p);
  EXPECT_NEAR(temporal_increment_var(d, t, p), w, 1e-13);
}

TEST(Increments, LeadingOrderSlopes) {
  const PhysicalParams p{1.5, 0.9};
  // ratio to the leading term tends to 1
  for (double d : {1e-4, 1e-6}) {
    EXPECT_NEAR(spatial_increment_var(d, 1.0, p) / spatial_increment_var_leading(d, p), 1.0, 10 * d);
    EXPECT_NEAR(temporal_increment_var(d, 1.0, p) / temporal_increment_var_leading(d, p), 1.0, 10 * std::sqrt(d));
  }
  const double s1 = std::log(spatial_increment_var(1e-5, 1, p) / spatial_increment_var(1e-6, 1, p)) / std::log(10.0);
  const double s2 = std::log(temporal_increment_var(1e-5, 1, p) / temporal_increment_var(1e-6, 1, p)) / std::log(10.0);
  EXPECT_NEAR(s1, 1.0, 1e-4);
  EXPECT_NEAR(s2, 0.5, 1e-3);
}

TEST(Rates, ClosedForms) {
  EXPECT_DOUBLE_EQ(spatial_quadratic_rate({1.0, 1.0}), 0.5);
  EXPECT_NEAR(temporal_quartic_rate({1.0, 1.0}), 0.954929658551372, 1e-15);
  EXPECT_NEAR(temporal_quartic_rate({2.0, 1.0}), 3.0 / (2.0 * std::numbers::pi), 1e-15);
}

TEST(GaussianMoments, DiagonalReducesToNormalMoments) {
  for (double v : {0.3, 1.0, 2.5}) {
    const GaussianPairMoments m{v, v, v};
    EXPECT_NEAR(gaussian_x2y2(m), 3 * v * v, 1e-14 * v * v);
    EXPECT_NEAR(gaussian_x4y4(m), 105 * std::pow(v, 4), 1e-13 * std::pow(v, 4));
  }
  const GaussianPairMoments indep{2.0, 3.0, 0.0};
  EXPECT_DOUBLE_EQ(gaussian_x2y2(indep), 6.0);
  EXPECT_DOUBLE_EQ(gaussian_x4y4(indep), 9.0 * 36.0);
}

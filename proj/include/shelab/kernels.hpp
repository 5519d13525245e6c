#pragma once

// Analytic building blocks of the linear stochastic heat equation
//
//   dX = alpha * X'' dt + sigma dW,   X_0 = 0,   on the whole line,
//
// its heat kernel, covariance function and increment moments, plus a
// quadrature oracle for the covariance integral.
//
// All closed forms are written for alpha = sigma = 1 and carried to general
// (alpha, sigma) by the substitution r -> alpha * r in the covariance
// integral, which gives
//
//   Cov_{alpha,sigma}(s, t; x, y) = (sigma^2 / alpha) * Cov_{1,1}(alpha s, alpha t; x, y).
//
// Every function here is pure and thread-safe.

#include <cstddef>

namespace shelab {

struct PhysicalParams {
  double alpha = 1.0;  ///< diffusion coefficient, > 0
  double sigma = 1.0;  ///< constant noise amplitude, >= 0

  /// Throws DomainError unless alpha > 0 and sigma >= 0 (both finite).
  void validate() const;
};

struct CovarianceQuery {
  double s = 0.0;  ///< earlier time, 0 <= s <= t
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct GaussianPairMoments {
  double vxx = 0.0;
  double vyy = 0.0;
  double vxy = 0.0;
};

/// (4 pi alpha t)^{-1/2} exp(-x^2 / (4 alpha t)).
double heat_kernel(double t, double x, double alpha);

double erf(double x);
double erfc(double x);

/// E[X_t(x) X_t(y)].
double cov_equal_time(double t, double x, double y, const PhysicalParams& params);

/// E[X_t(x) X_s(x)] for 0 <= s <= t.
double cov_equal_space(double s, double t, const PhysicalParams& params);

struct OracleOptions {
  double rel_tol = 1e-13;
  double abs_floor = 1e-15;
  int max_depth = 48;
};

struct OracleResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
};

/// E[X_t(x) X_s(y)] by adaptive Simpson quadrature of the covariance integral
/// after the substitution u = sqrt(s + t - 2r), which removes the endpoint
/// singularity at s = t. Throws NumericalError if the tolerance is not met.
OracleResult cov_oracle_detailed(const CovarianceQuery& q, const PhysicalParams& params,
                                 const OracleOptions& options = {});

double cov_oracle(const CovarianceQuery& q, const PhysicalParams& params);

/// Exact E[(X_t(x + delta) - X_t(x))^2]; ~ delta * sigma^2 / (2 alpha).
double spatial_increment_var(double delta, double t, const PhysicalParams& params);

/// Exact E[(X_{t+delta}(x) - X_t(x))^2]; ~ sigma^2 sqrt(delta / (pi alpha)).
double temporal_increment_var(double delta, double t, const PhysicalParams& params);

/// Leading-order constants: quadratic variation per unit length and quartic
/// variation per unit time.
double spatial_quadratic_rate(const PhysicalParams& params);  // sigma^2 / (2 alpha)
double temporal_quartic_rate(const PhysicalParams& params);   // 3 sigma^4 / (pi alpha)

double spatial_increment_var_leading(double delta, const PhysicalParams& params);
double temporal_increment_var_leading(double delta, const PhysicalParams& params);

/// E[X^2 Y^2] = vxx vyy + 2 vxy^2.
double gaussian_x2y2(const GaussianPairMoments& m);
/// E[X^4 Y^4] = 9 (vxx vyy)^2 + 24 vxy^4 + 72 vxx vyy vxy^2.
double gaussian_x4y4(const GaussianPairMoments& m);

}  // namespace shelab

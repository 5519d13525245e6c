#pragma once

// Estimators of the diffusion coefficient alpha built from the variation
// limits (sigma known):
//
//   temporal:  alpha_hat = 3 (T2 - T1) / (n pi) * sum_j sigma^4(X_{t_j}) / sum_j (X_{t_j} - X_{t_{j-1}})^4
//   spatial:   alpha_hat = (A2 - A1) / (2 n)    * sum_j sigma^2(X(x_j)) / sum_j (X(x_j) - X(x_{j-1}))^2
//
// with j = 1..n, plus Monte Carlo error studies on exact linear samples and
// Hoelder-exponent diagnostics from increment moments.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shelab/kernels.hpp"
#include "shelab/solver.hpp"
#include "shelab/variations.hpp"

namespace shelab {

enum class Method { Spatial, Temporal };
std::string to_string(Method m);

/// Closed-form pieces, exposed for property tests.
/// temporal: 3 L sigma4_sum / (n pi quartic_sum); spatial: L sigma2_sum / (2 n quadratic_sum).
/// Throw DegenerateEstimateError when the variation sum is not positive.
double alpha_hat_temporal_from_sums(double length, std::size_t n, double sigma4_sum, double quartic_sum);
double alpha_hat_spatial_from_sums(double length, std::size_t n, double sigma2_sum, double quadratic_sum);

double alpha_hat_temporal(const SampledPath& trace, const SigmaSpec& sigma, double t1, double t2,
                          std::size_t n, const PartitionRules& rules = {});
double alpha_hat_spatial(const SampledPath& snapshot, const SigmaSpec& sigma, double a1, double a2,
                         std::size_t n, const PartitionRules& rules = {});

struct RateRow {
  std::size_t n = 0;
  double mean_alpha_hat = 0.0;
  double mean_abs_error = 0.0;  ///< mean of min(|alpha_hat - alpha|, 1)
  std::size_t replications = 0;
};

struct EstimatorReport {
  Method method = Method::Temporal;
  double alpha_true = 1.0;
  std::vector<RateRow> per_n;
  double fitted_rate = 0.0;  ///< least-squares slope of log mean_abs_error against log n
  static constexpr double kReferenceRate = -0.15;
  bool error_decreasing = false;  ///< strictly, in the order of per_n
  std::uint64_t seed = 0;
};

struct RateStudyConfig {
  Method method = Method::Temporal;
  PhysicalParams params;       ///< constant sigma, true alpha
  std::vector<std::size_t> ns; ///< every n must divide the largest one
  std::size_t replications = 50;
  double lo = 1.0;  ///< [T1, T2] or [A1, A2]
  double hi = 2.0;
  double t = 1.0;   ///< observation time for the spatial method
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  unsigned threads = 1;
};

/// Exact linear samples on the finest grid, coarser partitions by subsampling
/// the same paths. Throws DomainError when replications == 0 or ns is empty.
EstimatorReport rate_study(const RateStudyConfig& cfg);

/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

std::string csv_header_rate();
std::vector<std::string> csv_rows(const EstimatorReport& r);
std::string summary_block(const EstimatorReport& r);

// ---------------------------------------------------------------- Hoelder diagnostics

struct MomentCurve {
  std::vector<double> lags;     ///< separation in path coordinates
  std::vector<double> moments;  ///< mean of |X(u + lag) - X(u)|^2
  double slope = 0.0;           ///< log-log slope
};

/// Second increment moments of a family of paths at lags k * spacing, k in `steps`,
/// averaged over all admissible start points and all paths.
MomentCurve increment_moments(std::span<const SampledPath> paths, std::span<const std::size_t> steps);

}  // namespace shelab

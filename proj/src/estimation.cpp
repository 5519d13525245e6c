#include "shelab/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "shelab/errors.hpp"
#include "shelab/format.hpp"
#include "shelab/linear_exact.hpp"
#include "shelab/parallel.hpp"
#include "shelab/summation.hpp"

namespace shelab {
namespace {

// sum over j = 1..n of f(sigma(X at partition point j))
template <class F>
double sigma_sum(const SampledPath& path, const Partition& part, const SigmaSpec& sigma, F&& f) {
  auto x = gather(path, part);
  std::span<double> right(x.data() + 1, part.n);
  sigma.evaluate(right, 1.0, right);
  CompensatedSum acc;
  for (double s : right) acc += f(s);
  return acc.value();
}

}  // namespace

std::string to_string(Method m) { return m == Method::Spatial ? "spatial" : "temporal"; }

double alpha_hat_temporal_from_sums(double length, std::size_t n, double sigma4_sum, double quartic_sum) {
  if (!(quartic_sum > 0.0))
    throw DegenerateEstimateError("quartic variation is zero; alpha is not identifiable from this path");
  return 3.0 * length * sigma4_sum / (static_cast<double>(n) * std::numbers::pi * quartic_sum);
}

double alpha_hat_spatial_from_sums(double length, std::size_t n, double sigma2_sum, double quadratic_sum) {
  if (!(quadratic_sum > 0.0))
    throw DegenerateEstimateError("quadratic variation is zero; alpha is not identifiable from this path");
  return length * sigma2_sum / (2.0 * static_cast<double>(n) * quadratic_sum);
}

double alpha_hat_temporal(const SampledPath& trace, const SigmaSpec& sigma, double t1, double t2,
                          std::size_t n, const PartitionRules& rules) {
  if (!(t1 > 0.0)) throw ConfigError("interval", "temporal estimator needs t1 > 0", "> 0");
  const Partition part = make_partition(trace, t1, t2, n, rules);
  const double quartic = power_variation(gather(trace, part), 4);
  const double s4 = sigma_sum(trace, part, sigma, [](double s) { return (s * s) * (s * s); });
  return alpha_hat_temporal_from_sums(t2 - t1, n, s4, quartic);
}

double alpha_hat_spatial(const SampledPath& snapshot, const SigmaSpec& sigma, double a1, double a2,
                         std::size_t n, const PartitionRules& rules) {
  const Partition part = make_partition(snapshot, a1, a2, n, rules);
  const double quadratic = power_variation(gather(snapshot, part), 2);
  const double s2 = sigma_sum(snapshot, part, sigma, [](double s) { return s * s; });
  return alpha_hat_spatial_from_sums(a2 - a1, n, s2, quadratic);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope fit needs two or more matching points");
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("log-log fit needs positive data");
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / m, my = sy / m;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

EstimatorReport rate_study(const RateStudyConfig& cfg) {
  if (cfg.replications == 0) throw DomainError("rate study needs at least one replication");
  if (cfg.ns.empty()) throw DomainError("rate study needs at least one partition size");
  cfg.params.validate();
  const std::size_t finest = *std::max_element(cfg.ns.begin(), cfg.ns.end());
  for (std::size_t n : cfg.ns)
    if (n == 0 || finest % n != 0)
      throw ConfigError("ns", "every partition size must divide the largest (" + std::to_string(finest) + ")");

  const GaussianFieldSampler sampler =
      cfg.method == Method::Temporal ? build_temporal_sampler({cfg.lo, cfg.hi, finest}, cfg.params)
                                     : build_spatial_sampler({cfg.lo, cfg.hi, finest}, cfg.t, cfg.params);
  const SigmaSpec sigma = SigmaSpec::constant(cfg.params.sigma);

  std::vector<std::vector<double>> hats(cfg.ns.size(), std::vector<double>(cfg.replications));
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
    const auto path = sample(sampler, {cfg.seed, cfg.stream, static_cast<std::uint32_t>(r)});
    const SampledPath view = exact_path(path);
    for (std::size_t k = 0; k < cfg.ns.size(); ++k) {
      hats[k][r] = cfg.method == Method::Temporal
                       ? alpha_hat_temporal(view, sigma, cfg.lo, cfg.hi, cfg.ns[k])
                       : alpha_hat_spatial(view, sigma, cfg.lo, cfg.hi, cfg.ns[k]);
    }
  });

  EstimatorReport rep;
  rep.method = cfg.method;
  rep.alpha_true = cfg.params.alpha;
  rep.seed = cfg.seed;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < cfg.ns.size(); ++k) {
    RateRow row;
    row.n = cfg.ns[k];
    row.replications = cfg.replications;
    CompensatedSum mean, err;
    for (double a : hats[k]) {
      mean += a;
      err += std::min(std::fabs(a - cfg.params.alpha), 1.0);
    }
    row.mean_alpha_hat = mean.value() / static_cast<double>(cfg.replications);
    row.mean_abs_error = err.value() / static_cast<double>(cfg.replications);
    rep.per_n.push_back(row);
    xs.push_back(static_cast<double>(row.n));
    ys.push_back(row.mean_abs_error);
  }
  rep.error_decreasing = true;
  for (std::size_t k = 1; k < rep.per_n.size(); ++k)
    rep.error_decreasing &= rep.per_n[k].mean_abs_error < rep.per_n[k - 1].mean_abs_error;
  const bool positive = std::all_of(ys.begin(), ys.end(), [](double v) { return v > 0.0; });
  rep.fitted_rate = xs.size() >= 2 && positive ? loglog_slope(xs, ys) : std::nan("");
  return rep;
}

std::string csv_header_rate() { return "method,n,replications,alpha_true,mean_alpha_hat,mean_abs_error,seed"; }

std::vector<std::string> csv_rows(const EstimatorReport& r) {
  std::vector<std::string> out;
  for (const auto& row : r.per_n)
    out.push_back(to_string(r.method) + "," + std::to_string(row.n) + "," + std::to_string(row.replications) +
                  "," + shortest(r.alpha_true) + "," + shortest(row.mean_alpha_hat) + "," +
                  shortest(row.mean_abs_error) + "," + std::to_string(r.seed));
  return out;
}

std::string summary_block(const EstimatorReport& r) {
  std::ostringstream os;
  os << to_string(r.method) << " estimator, alpha = " << shortest(r.alpha_true) << "\n";
  for (const auto& row : r.per_n)
    os << "  n = " << row.n << ": mean alpha_hat " << shortest(row.mean_alpha_hat)
       << ", E[|alpha_hat - alpha| ^ 1] " << shortest(row.mean_abs_error) << " (" << row.replications
       << " replications)\n";
  os << "  fitted log-log slope " << shortest(r.fitted_rate) << " (reference " << EstimatorReport::kReferenceRate
     << ", informational)\n";
  os << "  error strictly decreasing in n: " << (r.error_decreasing ? "yes" : "no") << "\n";
  return os.str();
}

MomentCurve increment_moments(std::span<const SampledPath> paths, std::span<const std::size_t> steps) {
  if (paths.empty() || steps.empty()) throw DomainError("moment curve needs paths and lags");
  MomentCurve c;
  for (std::size_t k : steps) {
    CompensatedSum acc;
    std::size_t count = 0;
    for (const auto& p : paths) {
      if (k == 0 || k >= p.values.size()) throw DomainError("lag outside the path");
      for (std::size_t i = 0; i + k < p.values.size(); ++i) {
        const double d = p.values[i + k] - p.values[i];
        acc += d * d;
        ++count;
      }
    }
    c.lags.push_back(static_cast<double>(k) * paths.front().spacing);
    c.moments.push_back(acc.value() / static_cast<double>(count));
  }
  c.slope = c.lags.size() >= 2 ? loglog_slope(c.lags, c.moments) : std::nan("");
  return c;
}

}  // namespace shelab

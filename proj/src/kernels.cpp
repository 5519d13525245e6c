#include "shelab/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "shelab/errors.hpp"

namespace shelab {
namespace {

constexpr double kPi = std::numbers::pi;
const double kInvTwoSqrtPi = 0.5 / std::sqrt(kPi);

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw DomainError(std::string(what) + " must be positive and finite, got " + std::to_string(v));
}

// Equal-time covariance for alpha = sigma = 1 at separation d. The erf form
// cancels badly for large |d|; with erf = 1 - erfc it becomes a sum of two
// small terms.
double cov11_equal_time(double t, double d) {
  const double ad = std::fabs(d);
  return std::sqrt(t / (2.0 * kPi)) * std::exp(-d * d / (8.0 * t)) -
         0.25 * ad * std::erfc(ad / (2.0 * std::sqrt(2.0 * t)));
}

struct Simpson {
  double d2over4;  // (x - y)^2 / 4
  double err = 0.0;
  std::size_t evals = 0;
  bool exhausted = false;

  double f(double u) {
    ++evals;
    if (d2over4 == 0.0) return 1.0;
    if (u == 0.0) return 0.0;
    return std::exp(-d2over4 / (u * u));
  }

  double refine(double a, double b, double fa, double fm, double fb, double whole, double tol,
                int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::fabs(delta) <= 15.0 * tol || depth <= 0) {
      if (depth <= 0 && std::fabs(delta) > 15.0 * tol) exhausted = true;
      err += std::fabs(delta) / 15.0;
      return left + right + delta / 15.0;  // Richardson step
    }
    return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           refine(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  }
};

}  // namespace

void PhysicalParams::validate() const {
  require_positive(alpha, "alpha");
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw DomainError("sigma must be non-negative and finite, got " + std::to_string(sigma));
}

double heat_kernel(double t, double x, double alpha) {
  require_positive(t, "t");
  require_positive(alpha, "alpha");
  return std::exp(-x * x / (4.0 * alpha * t)) / std::sqrt(4.0 * kPi * alpha * t);
}

double erf(double x) { return std::erf(x); }
double erfc(double x) { return std::erfc(x); }

double cov_equal_time(double t, double x, double y, const PhysicalParams& params) {
  require_positive(t, "t");
  params.validate();
  const double scale = params.sigma * params.sigma / params.alpha;
  return scale * cov11_equal_time(params.alpha * t, x - y);
}

double cov_equal_space(double s, double t, const PhysicalParams& params) {
  require_positive(t, "t");
  params.validate();
  if (!(s >= 0.0)) throw DomainError("s must be non-negative");
  if (s > t) throw DomainError("cov_equal_space requires s <= t");
  return params.sigma * params.sigma * kInvTwoSqrtPi / std::sqrt(params.alpha) *
         (std::sqrt(t + s) - std::sqrt(t - s));
}

OracleResult cov_oracle_detailed(const CovarianceQuery& q, const PhysicalParams& params,
                                 const OracleOptions& options) {
  params.validate();
  if (!(q.s >= 0.0) || !(q.t >= q.s) || !std::isfinite(q.t))
    throw DomainError("cov_oracle requires 0 <= s <= t");
  if (q.s == 0.0) return {};

  // u = sqrt(alpha (s + t - 2r)) maps r in [0, s] onto [sqrt(alpha (t - s)), sqrt(alpha (t + s))]
  // and the integrand onto exp(-(x - y)^2 / (4 u^2)) / (2 sqrt(pi)) / alpha.
  const double lo = std::sqrt(params.alpha * (q.t - q.s));
  const double hi = std::sqrt(params.alpha * (q.t + q.s));
  const double d = q.x - q.y;
  Simpson rule{0.25 * d * d};

  constexpr int kPanels = 16;
  const double h = (hi - lo) / kPanels;
  double nodes[2 * kPanels + 1];
  for (int i = 0; i <= 2 * kPanels; ++i) nodes[i] = rule.f(lo + 0.5 * h * i);
  double coarse = 0.0;
  for (int p = 0; p < kPanels; ++p)
    coarse += h / 6.0 * (nodes[2 * p] + 4.0 * nodes[2 * p + 1] + nodes[2 * p + 2]);
  const double tol = std::max(options.rel_tol * std::fabs(coarse), options.abs_floor) / kPanels;

  double integral = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double a = lo + h * p;
    const double b = (p == kPanels - 1) ? hi : a + h;
    const double whole = (b - a) / 6.0 * (nodes[2 * p] + 4.0 * nodes[2 * p + 1] + nodes[2 * p + 2]);
    integral += rule.refine(a, b, nodes[2 * p], nodes[2 * p + 1], nodes[2 * p + 2], whole, tol,
                            options.max_depth);
  }

  const double scale = params.sigma * params.sigma / params.alpha * kInvTwoSqrtPi;
  OracleResult result{scale * integral, scale * rule.err, rule.evals};
  if (rule.exhausted)
    throw NumericalError("covariance quadrature did not converge", result.error_estimate);
  return result;
}

double cov_oracle(const CovarianceQuery& q, const PhysicalParams& params) {
  return cov_oracle_detailed(q, params).value;
}

double spatial_increment_var(double delta, double t, const PhysicalParams& params) {
  require_positive(delta, "delta");
  require_positive(t, "t");
  params.validate();
  const double at = params.alpha * t;
  // sqrt(2t/pi) (1 - e^{-d^2/8t}) + (d/2) erfc(d / (2 sqrt(2t))), alpha = sigma = 1
  const double v = -std::sqrt(2.0 * at / kPi) * std::expm1(-delta * delta / (8.0 * at)) +
                   0.5 * delta * std::erfc(delta / (2.0 * std::sqrt(2.0 * at)));
  return params.sigma * params.sigma / params.alpha * v;
}

double temporal_increment_var(double delta, double t, const PhysicalParams& params) {
  require_positive(delta, "delta");
  require_positive(t, "t");
  params.validate();
  const double ad = params.alpha * delta;
  const double at = params.alpha * t;
  // sqrt(2(t+d)) + sqrt(2t) - 2 sqrt(2t+d) is a second difference of sqrt;
  // rewritten without cancellation as -2 d^2 / ((c + a)(c + b)(b + a)).
  const double a = std::sqrt(2.0 * at);
  const double b = std::sqrt(2.0 * at + ad);
  const double c = std::sqrt(2.0 * at + 2.0 * ad);
  const double second_diff = -2.0 * ad * ad / ((c + a) * (c + b) * (b + a));
  const double v = kInvTwoSqrtPi * (second_diff + 2.0 * std::sqrt(ad));
  return params.sigma * params.sigma / params.alpha * v;
}

double spatial_quadratic_rate(const PhysicalParams& params) {
  params.validate();
  return params.sigma * params.sigma / (2.0 * params.alpha);
}

double temporal_quartic_rate(const PhysicalParams& params) {
  params.validate();
  const double s2 = params.sigma * params.sigma;
  return 3.0 * s2 * s2 / (kPi * params.alpha);
}

double spatial_increment_var_leading(double delta, const PhysicalParams& params) {
  require_positive(delta, "delta");
  return delta * spatial_quadratic_rate(params);
}

double temporal_increment_var_leading(double delta, const PhysicalParams& params) {
  require_positive(delta, "delta");
  params.validate();
  return params.sigma * params.sigma * std::sqrt(delta / (kPi * params.alpha));
}

double gaussian_x2y2(const GaussianPairMoments& m) {
  return m.vxx * m.vyy + 2.0 * m.vxy * m.vxy;
}

double gaussian_x4y4(const GaussianPairMoments& m) {
  const double p = m.vxx * m.vyy;
  const double c2 = m.vxy * m.vxy;
  return 9.0 * p * p + 24.0 * c2 * c2 + 72.0 * p * c2;
}

}  // namespace shelab

#include "shelab/linear_exact.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "shelab/errors.hpp"
#include "shelab/simd/kernels.hpp"

namespace shelab {

void SpaceGrid::validate() const {
  if (!(a1 < a2) || !std::isfinite(a1) || !std::isfinite(a2))
    throw DomainError("space grid requires a1 < a2");
  if (n < 1) throw DomainError("space grid requires n >= 1");
}

double SpaceGrid::point(std::size_t j) const noexcept {
  return a1 + static_cast<double>(j) * (a2 - a1) / static_cast<double>(n);
}

void TimeGrid::validate() const {
  if (!(t1 > 0.0) || !(t1 < t2) || !std::isfinite(t2))
    throw DomainError("time grid requires 0 < t1 < t2");
  if (n < 1) throw DomainError("time grid requires n >= 1");
}

double TimeGrid::point(std::size_t j) const noexcept {
  return t1 + static_cast<double>(j) * (t2 - t1) / static_cast<double>(n);
}

double GaussianFieldSampler::factorization_residual() const {
  const auto& dot = simd::active().dot;
  const std::size_t n = size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto li = factor_.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const double llt = dot(li.data(), factor_.row(j).data(), j + 1);
      const double target = covariance_(i, j) + (i == j ? jitter_ : 0.0);
      worst = std::max(worst, std::fabs(llt - target));
    }
  }
  return max_diag_ > 0.0 ? worst / max_diag_ : worst;
}

GaussianFieldSampler make_sampler(std::shared_ptr<const GridDescriptor> grid, PackedLower covariance) {
  GaussianFieldSampler s;
  s.grid_ = std::move(grid);
  const std::size_t n = covariance.size();
  for (std::size_t i = 0; i < n; ++i) s.max_diag_ = std::max(s.max_diag_, covariance(i, i));
  s.covariance_ = std::move(covariance);
  s.factor_ = PackedLower(n);
  if (s.max_diag_ == 0.0) return s;  // degenerate field, zero factor

  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  const auto load = [&](double jitter) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) dense(i, j) = s.covariance_(i, j);
      dense(i, i) += jitter;
    }
  };

  static constexpr double kLadder[] = {0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10};
  for (double rel : kLadder) {
    const double jitter = rel * s.max_diag_;
    load(jitter);
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>, Eigen::Lower> llt(dense);
    if (llt.info() != Eigen::Success) continue;
    for (std::size_t i = 0; i < n; ++i) {
      auto row = s.factor_.row(i);
      for (std::size_t j = 0; j <= i; ++j) row[j] = dense(i, j);
    }
    s.jitter_ = jitter;
    return s;
  }

  load(0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  throw NonPsdError("covariance not positive definite after max jitter; smallest eigenvalue " +
                        std::to_string(smallest),
                    smallest);
}

GaussianFieldSampler build_spatial_sampler(const SpaceGrid& grid, double t,
                                           const PhysicalParams& params) {
  grid.validate();
  if (!(t > 0.0)) throw DomainError("spatial sampler requires t > 0");
  params.validate();
  const std::size_t n = grid.n + 1;
  // Equally spaced points: entries depend on the lag only.
  std::vector<double> by_lag(n);
  const double h = grid.spacing();
  for (std::size_t k = 0; k < n; ++k) by_lag[k] = cov_equal_time(t, 0.0, static_cast<double>(k) * h, params);
  PackedLower cov(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = cov.row(i);
    for (std::size_t j = 0; j <= i; ++j) row[j] = by_lag[i - j];
  }
  return make_sampler(std::make_shared<const GridDescriptor>(SpatialSlice{grid, t}), std::move(cov));
}

GaussianFieldSampler build_temporal_sampler(const TimeGrid& grid, const PhysicalParams& params) {
  grid.validate();
  params.validate();
  const std::size_t n = grid.n + 1;
  const double h = grid.spacing();
  // C(t_j, t_k) = c (sqrt(t_j + t_k) - sqrt(|t_j - t_k|)), c = sigma^2 / (2 sqrt(pi alpha))
  const double c = params.sigma * params.sigma / (2.0 * std::sqrt(std::numbers::pi * params.alpha));
  std::vector<double> root_sum(2 * n - 1);
  std::vector<double> root_lag(n);
  for (std::size_t m = 0; m < root_sum.size(); ++m)
    root_sum[m] = std::sqrt(2.0 * grid.t1 + static_cast<double>(m) * h);
  for (std::size_t k = 0; k < n; ++k) root_lag[k] = std::sqrt(static_cast<double>(k) * h);
  PackedLower cov(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = cov.row(i);
    for (std::size_t j = 0; j <= i; ++j) row[j] = c * (root_sum[i + j] - root_lag[i - j]);
  }
  return make_sampler(std::make_shared<const GridDescriptor>(TemporalSlice{grid}), std::move(cov));
}

GaussianFieldSampler build_spacetime_sampler(std::vector<SpaceTimePoint> points,
                                             const PhysicalParams& params) {
  params.validate();
  if (points.empty()) throw DomainError("space-time sampler needs at least one point");
  for (const auto& p : points)
    if (!(p.t > 0.0)) throw DomainError("space-time sampler requires t > 0 at every point");
  const std::size_t n = points.size();
  PackedLower cov(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const auto& a = points[i];
      const auto& b = points[j];
      const CovarianceQuery q = a.t <= b.t ? CovarianceQuery{a.t, b.t, a.x, b.x}
                                           : CovarianceQuery{b.t, a.t, b.x, a.x};
      cov(i, j) = cov_oracle(q, params);
    }
  }
  return make_sampler(std::make_shared<const GridDescriptor>(PointSet{std::move(points)}),
                      std::move(cov));
}

namespace {

void multiply_rows(const GaussianFieldSampler& sampler, std::span<const std::vector<double>> z,
                   std::span<std::vector<double>> out) {
  const auto& dot = simd::active().dot;
  const auto& factor = sampler.factor();
  for (std::size_t i = 0; i < sampler.size(); ++i) {
    const auto row = factor.row(i);
    for (std::size_t b = 0; b < z.size(); ++b) out[b][i] = dot(row.data(), z[b].data(), i + 1);
  }
}

}  // namespace

SamplePath sample(const GaussianFieldSampler& sampler, const NoiseKey& key) {
  auto batch = sample_batch(sampler, key.seed, key.stream, key.replicate, 1);
  return std::move(batch.front());
}

std::vector<SamplePath> sample_batch(const GaussianFieldSampler& sampler, std::uint64_t seed,
                                     std::uint32_t stream, std::uint32_t first, std::size_t count) {
  constexpr std::size_t kBlock = 8;  // rows of the factor are reused across a block
  const std::size_t n = sampler.size();
  std::vector<SamplePath> paths(count);
  const std::size_t width = std::min(kBlock, count);
  std::vector<std::vector<double>> z(width, std::vector<double>(n));
  std::vector<std::vector<double>> values(width);
  for (std::size_t start = 0; start < count; start += width) {
    const std::size_t m = std::min(width, count - start);
    for (std::size_t b = 0; b < m; ++b) {
      fill_normals({seed, stream, static_cast<std::uint32_t>(first + start + b)}, 0, z[b]);
      values[b].assign(n, 0.0);
    }
    multiply_rows(sampler, std::span(z).first(m), std::span(values).first(m));
    for (std::size_t b = 0; b < m; ++b) {
      auto& p = paths[start + b];
      p.grid = sampler.grid_ptr();
      p.values = std::move(values[b]);
      p.provenance = {seed, stream, static_cast<std::uint32_t>(first + start + b)};
    }
  }
  return paths;
}

}  // namespace shelab

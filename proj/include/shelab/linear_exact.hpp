#pragma once

// Exact Gaussian sampling of the linear (constant sigma, X_0 = 0) solution on
// a finite set of points: assemble the covariance matrix from the closed forms
// in kernels.hpp, factor it once, then each path is factor * z with z drawn
// from a counter-based normal stream.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "shelab/kernels.hpp"
#include "shelab/rng.hpp"

namespace shelab {

/// x_j = a1 + j (a2 - a1) / n, j = 0..n.
struct SpaceGrid {
  double a1 = 0.0;
  double a2 = 1.0;
  std::size_t n = 1;

  void validate() const;
  double spacing() const noexcept { return (a2 - a1) / static_cast<double>(n); }
  double point(std::size_t j) const noexcept;
};

/// t_j = t1 + j (t2 - t1) / n, j = 0..n.
struct TimeGrid {
  double t1 = 1.0;
  double t2 = 2.0;
  std::size_t n = 1;

  void validate() const;
  double spacing() const noexcept { return (t2 - t1) / static_cast<double>(n); }
  double point(std::size_t j) const noexcept;
};

struct SpaceTimePoint {
  double t = 0.0;
  double x = 0.0;
};

/// Points at fixed time t.
struct SpatialSlice {
  SpaceGrid grid;
  double t = 1.0;
};

/// Points at fixed position (the covariance does not depend on it).
struct TemporalSlice {
  TimeGrid grid;
};

/// Arbitrary space-time points; covariance entries come from quadrature.
struct PointSet {
  std::vector<SpaceTimePoint> points;
};

using GridDescriptor = std::variant<SpatialSlice, TemporalSlice, PointSet>;

/// Lower triangle of an n x n matrix, row-major: row i holds columns 0..i.
class PackedLower {
 public:
  PackedLower() = default;
  explicit PackedLower(std::size_t n) : n_(n), data_(n * (n + 1) / 2, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * (i + 1) / 2, i + 1};
  }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * (i + 1) / 2, i + 1}; }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * (i + 1) / 2 + j];
  }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * (i + 1) / 2 + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

class GaussianFieldSampler {
 public:
  const GridDescriptor& grid() const noexcept { return *grid_; }
  const std::shared_ptr<const GridDescriptor>& grid_ptr() const noexcept { return grid_; }
  std::size_t size() const noexcept { return covariance_.size(); }
  const PackedLower& covariance() const noexcept { return covariance_; }
  const PackedLower& factor() const noexcept { return factor_; }
  double jitter_applied() const noexcept { return jitter_; }
  double max_diagonal() const noexcept { return max_diag_; }
  /// Built from quadrature rather than closed forms.
  bool slow_path() const noexcept { return std::holds_alternative<PointSet>(*grid_); }

  /// max |L L^T - (C + jitter I)| / max diag C. O(n^3); meant for tests.
  double factorization_residual() const;

 private:
  friend GaussianFieldSampler make_sampler(std::shared_ptr<const GridDescriptor>, PackedLower);

  std::shared_ptr<const GridDescriptor> grid_;
  PackedLower covariance_;
  PackedLower factor_;
  double jitter_ = 0.0;
  double max_diag_ = 0.0;
};

/// Factorizes the covariance with an escalating diagonal jitter
/// 0, 1e-14, ..., 1e-10 (relative to the largest diagonal entry).
/// Throws NonPsdError with the smallest eigenvalue if all attempts fail.
GaussianFieldSampler make_sampler(std::shared_ptr<const GridDescriptor> grid, PackedLower covariance);

GaussianFieldSampler build_spatial_sampler(const SpaceGrid& grid, double t,
                                           const PhysicalParams& params);
GaussianFieldSampler build_temporal_sampler(const TimeGrid& grid, const PhysicalParams& params);
/// Slow path: each entry is a cov_oracle quadrature.
GaussianFieldSampler build_spacetime_sampler(std::vector<SpaceTimePoint> points,
                                             const PhysicalParams& params);

struct SamplePath {
  std::shared_ptr<const GridDescriptor> grid;
  std::vector<double> values;
  NoiseKey provenance;
};

/// values = factor * z, z = draws 0..n of the stream `key`. Deterministic.
SamplePath sample(const GaussianFieldSampler& sampler, const NoiseKey& key);

/// Replicates first..first+count-1 of (seed, stream); element r equals
/// sample(sampler, {seed, stream, first + r}) bit-for-bit.
std::vector<SamplePath> sample_batch(const GaussianFieldSampler& sampler, std::uint64_t seed,
                                     std::uint32_t stream, std::uint32_t first, std::size_t count);

}  // namespace shelab

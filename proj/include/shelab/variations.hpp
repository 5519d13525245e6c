#pragma once

// Power variations of sampled paths and the Riemann-sum targets they converge
// to:
//   space, p = 2:  sum (X(x_j) - X(x_{j-1}))^2   ->  1/(2 alpha) int sigma^2(X(x)) dx
//   time,  p = 4:  sum (X(t_j) - X(t_{j-1}))^4   ->  3/(pi alpha) int sigma^4(X(t)) dt
//
// Partitions are integer subsamples of the path's grid; nothing is ever
// interpolated.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shelab/linear_exact.hpp"
#include "shelab/rng.hpp"
#include "shelab/solver.hpp"

namespace shelab {

/// sum_{j=1}^{n-1} (v_j - v_{j-1})^p with compensated accumulation.
/// Throws DomainError for fewer than two values or p not even and positive.
double power_variation(std::span<const double> values, unsigned p);

enum class PathBoundary {
  None,      ///< a window of a whole-line field (exact samples)
  Periodic,  ///< values[i + size] == values[i]
  Walled,    ///< Dirichlet or Neumann walls at both ends
};

/// values[i] sampled at origin + i * spacing.
struct SampledPath {
  std::span<const double> values;
  double origin = 0.0;
  double spacing = 1.0;
  PathBoundary boundary = PathBoundary::None;
  NoiseKey provenance;

  double coordinate(std::size_t i) const noexcept { return origin + static_cast<double>(i) * spacing; }
};

SampledPath spatial_path(const SolverConfig& cfg, const FieldState& state, std::uint32_t replicate = 0);
SampledPath temporal_path(const Trace& trace, const NoiseKey& provenance = {});
/// Spatial or temporal slice from the exact sampler; throws DomainError for point sets.
SampledPath exact_path(const SamplePath& path);

/// Index bookkeeping for an equally spaced partition of [lo, hi] into n pieces
/// taken from a path: points first + j * stride (mod size when periodic).
struct Partition {
  std::size_t first = 0;
  std::size_t stride = 1;
  std::size_t n = 1;

  std::size_t index(std::size_t j, std::size_t size, bool periodic) const noexcept {
    const std::size_t i = first + j * stride;
    return periodic ? i % size : i;
  }
};

struct PartitionRules {
  double guard_fraction = 0.1;  ///< keep off walls by this share of the domain
  std::size_t min_stride = 1;   ///< scale separation: window >= min_stride grid steps
  double tolerance = 1e-9;      ///< relative slack for commensurability
};

/// Throws ConfigError when [lo, hi] / n is not commensurate with the path grid,
/// falls outside the path, intrudes on a wall guard band or is too fine.
Partition make_partition(const SampledPath& path, double lo, double hi, std::size_t n,
                         const PartitionRules& rules = {});

/// Values of the path at the partition points (n + 1 of them).
std::vector<double> gather(const SampledPath& path, const Partition& part);

enum class Axis { Space, Time };
std::string to_string(Axis axis);

struct VariationReport {
  Axis axis = Axis::Space;
  unsigned p = 2;
  std::size_t n = 1;
  double window = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double empirical = 0.0;
  double target = 0.0;
  double relative_error = 0.0;
  NoiseKey provenance;
};

/// Empirical quadratic variation over [a1, a2] with window delta, against
/// (1/(2 alpha)) int sigma^2(X(x)) dx. The target integral uses the trapezoid
/// rule on every grid node of the path (closed form for constant sigma).
VariationReport spatial_quadratic_report(const SampledPath& snapshot, const SigmaSpec& sigma,
                                         double alpha, double delta, double a1, double a2,
                                         const PartitionRules& rules = {});

/// Empirical quartic variation over [t1, t2] with n pieces, against
/// (3/(pi alpha)) int sigma^4(X(t)) dt on the full trace resolution.
VariationReport temporal_quartic_report(const SampledPath& trace, const SigmaSpec& sigma,
                                        double alpha, double t1, double t2, std::size_t n,
                                        const PartitionRules& rules = {});

/// CSV columns: axis,p,n,delta,empirical,target,rel_error,seed
std::string csv_header_variation();
std::string csv_row(const VariationReport& r);

struct ScanRow {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased sample variance
  std::size_t replications = 0;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  bool variance_decreasing = false;  ///< strictly, in the order of the n list
};

/// source(n, replicate) returns the n + 1 partition values of one path.
using PathSource = std::function<std::vector<double>(std::size_t n, std::uint32_t replicate)>;

/// Mean and variance of power_variation(source(n, r), p) over r = 0..replications-1.
ScanResult variation_scaling_scan(const PathSource& source, unsigned p, std::span<const std::size_t> ns,
                                  std::size_t replications, unsigned threads = 1);

}  // namespace shelab

#include "shelab/variations.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "shelab/errors.hpp"
#include "shelab/format.hpp"
#include "shelab/parallel.hpp"
#include "shelab/simd/kernels.hpp"
#include "shelab/summation.hpp"

namespace shelab {
namespace {

std::size_t as_index(double x, double tol, const char* field, const std::string& what) {
  const double r = std::nearbyint(x);
  if (!(std::fabs(x - r) <= tol * std::max(1.0, std::fabs(x))) || r < 0.0)
    throw ConfigError(field, what + " is not commensurate with the grid (ratio " + shortest(x) + ")",
                      "integer multiple of the grid spacing");
  return static_cast<std::size_t>(r);
}

// Fine-grid values of the path from index `first` through first + count (inclusive).
std::vector<double> fine_range(const SampledPath& path, std::size_t first, std::size_t count) {
  const std::size_t size = path.values.size();
  const bool periodic = path.boundary == PathBoundary::Periodic;
  std::vector<double> out(count + 1);
  for (std::size_t k = 0; k <= count; ++k) {
    const std::size_t i = first + k;
    out[k] = path.values[periodic ? i % size : i];
  }
  return out;
}

// h * (f_0 / 2 + f_1 + ... + f_{m-1} + f_m / 2)
double trapezoid(std::span<const double> f, double h) {
  CompensatedSum acc;
  for (std::size_t i = 1; i + 1 < f.size(); ++i) acc += f[i];
  acc += 0.5 * f.front();
  acc += 0.5 * f.back();
  return h * acc.value();
}

double relative_error(double empirical, double target) {
  if (target == 0.0) return empirical == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::fabs(empirical - target) / std::fabs(target);
}

}  // namespace

double power_variation(std::span<const double> values, unsigned p) {
  if (values.size() < 2) throw DomainError("power_variation needs at least two values");
  if (p == 0 || p % 2 != 0) throw DomainError("power_variation order must be even and positive");
  return simd::active().power_sum(values.data(), values.size(), p);
}

SampledPath spatial_path(const SolverConfig& cfg, const FieldState& state, std::uint32_t replicate) {
  SampledPath p;
  p.values = state.values;
  p.origin = cfg.a;
  p.spacing = cfg.dx();
  p.boundary = std::holds_alternative<Periodic>(cfg.bc) ? PathBoundary::Periodic : PathBoundary::Walled;
  p.provenance = {cfg.seed, cfg.stream, replicate};
  return p;
}

SampledPath temporal_path(const Trace& trace, const NoiseKey& provenance) {
  SampledPath p;
  p.values = trace.values;
  p.origin = trace.time(0);
  p.spacing = trace.spacing();
  p.provenance = provenance;
  return p;
}

SampledPath exact_path(const SamplePath& path) {
  SampledPath p;
  p.values = path.values;
  p.provenance = path.provenance;
  if (const auto* s = std::get_if<SpatialSlice>(path.grid.get())) {
    p.origin = s->grid.a1;
    p.spacing = s->grid.spacing();
  } else if (const auto* t = std::get_if<TemporalSlice>(path.grid.get())) {
    p.origin = t->grid.t1;
    p.spacing = t->grid.spacing();
  } else {
    throw DomainError("point-set samples have no grid to partition");
  }
  return p;
}

Partition make_partition(const SampledPath& path, double lo, double hi, std::size_t n,
                         const PartitionRules& rules) {
  const std::size_t size = path.values.size();
  if (size < 2) throw DomainError("path needs at least two values");
  if (n < 1) throw ConfigError("n", "partition needs at least one piece", ">= 1");
  if (!(hi > lo)) throw ConfigError("interval", "requires lo < hi");
  const double h = path.spacing;
  const bool periodic = path.boundary == PathBoundary::Periodic;

  Partition part;
  part.n = n;
  part.stride = as_index((hi - lo) / static_cast<double>(n) / h, rules.tolerance, "window",
                         "window " + shortest((hi - lo) / static_cast<double>(n)));
  part.first = as_index((lo - path.origin) / h, rules.tolerance, "interval",
                        "interval start " + shortest(lo));
  if (part.stride < std::max<std::size_t>(1, rules.min_stride))
    throw ConfigError("window", "window spans " + std::to_string(part.stride) + " grid steps",
                      ">= " + std::to_string(rules.min_stride) + " grid steps");

  const std::size_t last = part.first + n * part.stride;
  if (periodic) {
    if (part.first >= size || n * part.stride > size)
      throw ConfigError("interval", "longer than one period or outside the domain");
  } else if (last >= size) {
    throw ConfigError("interval", "extends past the sampled path",
                      "<= " + shortest(path.coordinate(size - 1)));
  }
  if (path.boundary == PathBoundary::Walled) {
    const double guard = rules.guard_fraction * static_cast<double>(size - 1) * h;
    const double wall_lo = path.origin + guard;
    const double wall_hi = path.coordinate(size - 1) - guard;
    const double slack = rules.tolerance * h;
    if (lo < wall_lo - slack || hi > wall_hi + slack)
      throw ConfigError("interval", "intrudes on the wall guard band",
                        "[" + shortest(wall_lo) + ", " + shortest(wall_hi) + "]");
  }
  return part;
}

std::vector<double> gather(const SampledPath& path, const Partition& part) {
  const bool periodic = path.boundary == PathBoundary::Periodic;
  std::vector<double> out(part.n + 1);
  for (std::size_t j = 0; j <= part.n; ++j) out[j] = path.values[part.index(j, path.values.size(), periodic)];
  return out;
}

std::string to_string(Axis axis) { return axis == Axis::Space ? "space" : "time"; }

VariationReport spatial_quadratic_report(const SampledPath& snapshot, const SigmaSpec& sigma,
                                         double alpha, double delta, double a1, double a2,
                                         const PartitionRules& rules) {
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  if (!(delta > 0.0)) throw ConfigError("window", "must be positive");
  const double pieces = (a2 - a1) / delta;
  const std::size_t n = as_index(pieces, rules.tolerance, "window", "interval / window");
  const Partition part = make_partition(snapshot, a1, a2, n, rules);

  VariationReport r;
  r.axis = Axis::Space;
  r.p = 2;
  r.n = n;
  r.window = delta;
  r.lo = a1;
  r.hi = a2;
  r.provenance = snapshot.provenance;
  r.empirical = power_variation(gather(snapshot, part), 2);
  if (const auto* c = std::get_if<SigmaConstant>(&sigma.variant())) {
    r.target = c->c * c->c / (2.0 * alpha) * (a2 - a1);
  } else {
    auto f = fine_range(snapshot, part.first, n * part.stride);
    sigma.evaluate(f, 1.0, f);
    for (double& v : f) v *= v;
    r.target = trapezoid(f, snapshot.spacing) / (2.0 * alpha);
  }
  r.relative_error = relative_error(r.empirical, r.target);
  return r;
}

VariationReport temporal_quartic_report(const SampledPath& trace, const SigmaSpec& sigma,
                                        double alpha, double t1, double t2, std::size_t n,
                                        const PartitionRules& rules) {
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  if (!(t1 > 0.0)) throw ConfigError("interval", "temporal variation needs t1 > 0", "> 0");
  const Partition part = make_partition(trace, t1, t2, n, rules);

  VariationReport r;
  r.axis = Axis::Time;
  r.p = 4;
  r.n = n;
  r.window = (t2 - t1) / static_cast<double>(n);
  r.lo = t1;
  r.hi = t2;
  r.provenance = trace.provenance;
  r.empirical = power_variation(gather(trace, part), 4);
  const double scale = 3.0 / (std::numbers::pi * alpha);
  if (const auto* c = std::get_if<SigmaConstant>(&sigma.variant())) {
    const double c2 = c->c * c->c;
    r.target = scale * c2 * c2 * (t2 - t1);
  } else {
    auto f = fine_range(trace, part.first, n * part.stride);
    sigma.evaluate(f, 1.0, f);
    for (double& v : f) v = (v * v) * (v * v);
    r.target = scale * trapezoid(f, trace.spacing);
  }
  r.relative_error = relative_error(r.empirical, r.target);
  return r;
}

std::string csv_header_variation() { return "axis,p,n,delta,empirical,target,rel_error,seed"; }

std::string csv_row(const VariationReport& r) {
  return to_string(r.axis) + "," + std::to_string(r.p) + "," + std::to_string(r.n) + "," +
         shortest(r.window) + "," + shortest(r.empirical) + "," + shortest(r.target) + "," +
         shortest(r.relative_error) + "," + std::to_string(r.provenance.seed);
}

ScanResult variation_scaling_scan(const PathSource& source, unsigned p, std::span<const std::size_t> ns,
                                  std::size_t replications, unsigned threads) {
  std::vector<std::vector<double>> sums(ns.size(), std::vector<double>(replications));
  parallel_for(replications, threads, [&](std::size_t r) {
    for (std::size_t k = 0; k < ns.size(); ++k)
      sums[k][r] = power_variation(source(ns[k], static_cast<std::uint32_t>(r)), p);
  });

  ScanResult out;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    ScanRow row;
    row.n = ns[k];
    row.replications = replications;
    if (replications > 0) row.mean = compensated_sum(sums[k]) / static_cast<double>(replications);
    if (replications > 1) {
      CompensatedSum ss;
      for (double v : sums[k]) ss += (v - row.mean) * (v - row.mean);
      row.variance = ss.value() / static_cast<double>(replications - 1);
    }
    out.rows.push_back(row);
  }
  out.variance_decreasing = true;
  for (std::size_t k = 1; k < out.rows.size(); ++k)
    out.variance_decreasing &= out.rows[k].variance < out.rows[k - 1].variance;
  return out;
}

}  // namespace shelab

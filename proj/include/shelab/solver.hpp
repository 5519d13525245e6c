#pragma once

// Finite-difference integrator for
//
//   dX = alpha X'' dt + b(X) dt + sigma(X) dW
//
// on [a, b] with periodic, Dirichlet or Neumann boundaries. Space-time white
// noise is discretised as one independent N(0,1) per (node, step), scaled by
// sqrt(dt / dx) so that the cell average has variance 1 / (dx dt).

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "shelab/rng.hpp"

namespace shelab {

// ---------------------------------------------------------------- coefficients

struct SigmaConstant {
  double c = 1.0;
};
/// p + q x
struct SigmaAffine {
  double p = 0.0;
  double q = 1.0;
};
/// c0 + c1 sin(omega x)
struct SigmaSine {
  double c0 = 2.0;
  double c1 = 1.0;
  double omega = 1.0;
};
/// max(x, 0)^beta, 0 < beta < 1. Not Lipschitz; needs non-negative solutions.
struct SigmaPower {
  double beta = 0.5;
};

class SigmaSpec {
 public:
  using Variant = std::variant<SigmaConstant, SigmaAffine, SigmaSine, SigmaPower>;

  SigmaSpec() = default;
  template <class T>
    requires std::is_constructible_v<Variant, T>
  SigmaSpec(T v) : v_(std::move(v)) {}  // NOLINT(google-explicit-constructor)

  static SigmaSpec constant(double c) { return SigmaConstant{c}; }
  static SigmaSpec affine(double p, double q) { return SigmaAffine{p, q}; }
  static SigmaSpec sine(double c0, double c1, double omega = 1.0) { return SigmaSine{c0, c1, omega}; }
  static SigmaSpec power(double beta) { return SigmaPower{beta}; }

  double operator()(double x) const noexcept;
  /// out[i] = scale * sigma(x[i])
  void evaluate(std::span<const double> x, double scale, std::span<double> out) const;

  bool is_lipschitz() const noexcept { return !std::holds_alternative<SigmaPower>(v_); }
  bool is_constant() const noexcept { return std::holds_alternative<SigmaConstant>(v_); }
  bool requires_nonnegative() const noexcept { return std::holds_alternative<SigmaPower>(v_); }
  /// +inf for the power family.
  double lipschitz_constant() const noexcept;
  /// (A, B) with |sigma(x)| <= A + B |x|.
  std::pair<double, double> linear_growth() const noexcept;

  void validate() const;  // throws ConfigError
  std::string describe() const;
  const Variant& variant() const noexcept { return v_; }

 private:
  Variant v_ = SigmaConstant{1.0};
};

struct DriftNone {};
/// k x
struct DriftLinear {
  double k = -1.0;
};
/// a sin(omega x)
struct DriftSine {
  double a = 1.0;
  double omega = 1.0;
};

class DriftSpec {
 public:
  using Variant = std::variant<DriftNone, DriftLinear, DriftSine>;

  DriftSpec() = default;
  template <class T>
    requires std::is_constructible_v<Variant, T>
  DriftSpec(T v) : v_(std::move(v)) {}  // NOLINT(google-explicit-constructor)

  static DriftSpec none() { return DriftNone{}; }
  static DriftSpec linear(double k) { return DriftLinear{k}; }
  static DriftSpec sine(double a, double omega = 1.0) { return DriftSine{a, omega}; }

  bool active() const noexcept { return !std::holds_alternative<DriftNone>(v_); }
  double operator()(double x) const noexcept;
  void evaluate(std::span<const double> x, double scale, std::span<double> out) const;
  double lipschitz_constant() const noexcept;
  void validate() const;
  std::string describe() const;
  const Variant& variant() const noexcept { return v_; }

 private:
  Variant v_ = DriftNone{};
};

// ---------------------------------------------------------------- configuration

struct Periodic {};
struct Dirichlet {
  double value = 0.0;
};
struct Neumann {};
using BoundaryCondition = std::variant<Periodic, Dirichlet, Neumann>;

enum class Scheme { Explicit, SemiImplicit };

struct RecordSpec {
  std::vector<double> snapshot_times;
  std::vector<double> trace_positions;
  std::uint64_t trace_every = 1;  ///< record traces every r steps
  double trace_from = 0.0;        ///< first trace time (rounded up to the trace grid)
};

struct SolverConfig {
  double alpha = 1.0;
  double a = 0.0;
  double b = 1.0;
  std::size_t nx = 512;
  double dt = 0.0;
  double t_end = 0.0;
  Scheme scheme = Scheme::Explicit;
  BoundaryCondition bc = Periodic{};
  SigmaSpec sigma;
  DriftSpec drift;
  RecordSpec record;
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;

  double dx() const noexcept { return (b - a) / static_cast<double>(nx); }
  /// periodic: nx nodes (b identified with a); otherwise nx + 1.
  std::size_t node_count() const noexcept;
  double node_position(std::size_t i) const noexcept { return a + static_cast<double>(i) * dx(); }
  /// Nodes that receive noise and are updated each step.
  std::size_t updated_count() const noexcept;
  /// t_end / dt; throws ConfigError if it is not (numerically) an integer.
  std::uint64_t step_count() const;
};

struct CflReport {
  bool ok = true;
  double ratio = 0.0;   ///< 2 alpha dt / dx^2
  double max_dt = 0.0;  ///< largest admissible dt (explicit), +inf otherwise
  std::string advisory;
};

CflReport cfl_check(const SolverConfig& cfg);

/// Full validation (CFL, grid, coefficients, record times); throws ConfigError.
void validate(const SolverConfig& cfg);

// ---------------------------------------------------------------- state

struct FieldState {
  double time = 0.0;
  std::vector<double> values;
};

/// One step. `noise` holds cfg.updated_count() standard normals. When the
/// sigma family needs non-negative solutions, negative values are clamped to
/// zero and counted in *clamps (if given).
FieldState step_explicit(const FieldState& state, const SolverConfig& cfg,
                         std::span<const double> noise, std::uint64_t* clamps = nullptr);
FieldState step_semi_implicit(const FieldState& state, const SolverConfig& cfg,
                              std::span<const double> noise, std::uint64_t* clamps = nullptr);

struct Snapshot {
  double requested_time = 0.0;
  double snap_distance = 0.0;
  FieldState state;
};

struct Trace {
  double requested_position = 0.0;
  std::size_t node = 0;
  double position = 0.0;
  double snap_distance = 0.0;
  std::uint64_t first_step = 0;
  std::uint64_t step_stride = 1;
  double dt = 0.0;
  std::vector<double> values;

  double time(std::size_t k) const noexcept {
    return static_cast<double>(first_step + k * step_stride) * dt;
  }
  double spacing() const noexcept { return static_cast<double>(step_stride) * dt; }
};

struct SpaceTimeRecord {
  std::vector<Snapshot> snapshots;  ///< requested times plus t_end, in time order
  std::vector<Trace> traces;
  std::uint64_t clamp_count = 0;
  std::uint64_t total_updates = 0;
  NoiseKey provenance;
};

/// Initial condition on the solver grid (cfg.node_count() values).
std::vector<double> initial_field(const SolverConfig& cfg, double (*f)(double));

/// Runs the scheme from X0 to t_end. Deterministic in (cfg, X0, replicate).
/// Throws ConfigError on invalid input, BlowUpError on non-finite values.
SpaceTimeRecord simulate(const SolverConfig& cfg, std::span<const double> x0,
                         std::uint32_t replicate = 0);

// ---------------------------------------------------------------- checkpoints

// Layout (little endian): "SHELABCK" | u32 version | u32 reserved | u64 config hash
//                         | f64 time | u64 count | count x f64
struct Checkpoint {
  std::uint64_t config_hash = 0;
  FieldState state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);  // throws Error on malformed input

}  // namespace shelab

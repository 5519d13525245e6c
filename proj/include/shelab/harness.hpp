#pragma once

// Experiment configuration (INI), execution and artifact emission.
//
// A config is a flat set of typed keys in six sections:
//   [experiment] kind, name, seed, replications
//   [model]      alpha, sigma family and parameters, drift family and parameters
//   [solver]     domain, grid, scheme, boundary condition, initial condition
//   [variation]  windows, partitions and tolerances for variation experiments
//   [estimator]  method, partition sizes and tolerances for alpha estimation
//   [oracle]     argument grid size for the covariance cross-check
// Serialization is canonical (every key, fixed order, shortest round-trip
// doubles), so parse(to_ini(c)) == c and the config hash is well defined.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shelab/solver.hpp"

namespace shelab {

enum class ExperimentKind { OracleCheck, LinearVariation, NonlinearVariation, Estimate, RateStudy };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);

struct ExperimentConfig {
  // [experiment]
  ExperimentKind kind = ExperimentKind::LinearVariation;
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::size_t replications = 1;

  // [model]
  double alpha = 1.0;
  std::string sigma = "constant";  ///< constant | affine | sine | power
  double sigma_c = 1.0;            ///< constant
  double sigma_p = 0.0;            ///< affine: p + q x
  double sigma_q = 1.0;
  double sigma_c0 = 2.0;           ///< sine: c0 + c1 sin(omega x)
  double sigma_c1 = 1.0;
  double sigma_omega = 1.0;
  double sigma_beta = 0.5;         ///< power: |x|^beta
  std::string drift = "none";      ///< none | linear | sine
  double drift_k = 0.0;            ///< linear: k x
  double drift_a = 0.0;            ///< sine: a sin(omega x)
  double drift_omega = 1.0;

  // [solver]
  double a = 0.0;
  double b = 1.0;
  std::size_t nx = 512;
  double dt = 0.0;                 ///< 0 selects dx^2 / (4 alpha)
  double t_end = 1.0;
  std::string scheme = "explicit"; ///< explicit | semi-implicit
  std::string bc = "periodic";     ///< periodic | dirichlet | neumann
  double bc_value = 0.0;
  std::string x0 = "zero";         ///< zero | constant | sine
  double x0_value = 0.0;           ///< constant level or sine amplitude
  std::uint64_t trace_every = 1;
  bool export_paths = false;       ///< write replicate 0 snapshot / trace CSVs

  // [variation]
  std::string axis = "space";      ///< space | time | both
  double t = 1.0;                  ///< snapshot / observation time
  double a1 = 0.0;
  double a2 = 1.0;
  double window = 0.0;             ///< spatial window delta; 0 selects 16 dx
  double t1 = 1.0;
  double t2 = 2.0;
  double position = 0.5;           ///< trace position
  std::size_t n = 512;             ///< temporal partition count
  std::vector<std::size_t> ns{256, 1024, 4096};  ///< linear-variation scan
  std::size_t min_stride = 8;
  double guard = 0.1;
  double space_tolerance = 0.10;
  double time_tolerance = 0.15;
  double space_pass_fraction = 0.9;  ///< share of replications that must meet the tolerance
  double time_pass_fraction = 0.8;

  // [estimator]: temporal uses [t1, t2], spatial uses [a1, a2] at time t
  std::string method = "temporal";  ///< temporal | spatial | both
  std::vector<std::size_t> estimator_ns{4096};
  double estimate_tolerance_time = 0.15;   ///< relative, on the mean alpha_hat
  double estimate_tolerance_space = 0.10;

  // [oracle]
  std::size_t oracle_points = 20;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  /// Effective time step (dt, or dx^2 / (4 alpha) when dt == 0).
  double effective_dt() const;
  /// Solver configuration for nonlinear experiments (records not filled in).
  SolverConfig solver() const;
  /// Throws ConfigError naming the field and admissible bound.
  void validate() const;
};

/// Throws ConfigError (field "line N" for syntax errors, or the key name).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_ini(const ExperimentConfig& c);

/// 64-bit FNV-1a of the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& c);
std::string hash_hex(std::uint64_t h);

struct Preset {
  std::string name;
  std::string description;
  ExperimentConfig config;
};
const std::vector<Preset>& presets();
/// Throws ConfigError for unknown names.
const Preset& find_preset(const std::string& name);

/// Human-readable plan: resolved grids, dt, memory and cell-update estimates.
std::string describe(const ExperimentConfig& c);

struct Artifact {
  std::string filename;
  std::string contents;
};

struct RunResult {
  std::vector<Artifact> artifacts;  ///< per-experiment CSVs, summary.txt, config.ini
  std::string summary;
  bool criteria_met = true;         ///< the experiment's own pass condition
};

/// Runs the experiment in memory. Output is independent of `threads`.
/// Throws ConfigError on validation failures, NumericalError on blow-up or
/// non-convergence.
RunResult run_experiment(const ExperimentConfig& c, unsigned threads = 1);

/// Writes every artifact plus manifest.txt into `dir` via temp file + rename.
/// Either all files appear or none do.
void write_artifacts(const std::filesystem::path& dir, const ExperimentConfig& c, const RunResult& r);

/// Machine-readable error record (JSON, one line).
std::string error_record(const std::exception& e);

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3 };

}  // namespace shelab

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "shelab/errors.hpp"
#include "shelab/estimation.hpp"
#include "shelab/format.hpp"
#include "shelab/harness.hpp"
#include "shelab/kernels.hpp"
#include "shelab/linear_exact.hpp"
#include "shelab/parallel.hpp"
#include "shelab/summation.hpp"
#include "shelab/variations.hpp"

namespace shelab {
namespace {

std::string csv_preamble(const ExperimentConfig& c) {
  return "# config_hash=" + hash_hex(config_hash(c)) + " seed=" + std::to_string(c.seed) + "\n";
}

std::string summary_preamble(const ExperimentConfig& c) {
  return "experiment " + c.name + " (" + to_string(c.kind) + ")\nconfig_hash " + hash_hex(config_hash(c)) +
         "\nseed " + std::to_string(c.seed) + "\nreplications " + std::to_string(c.replications) + "\n\n";
}

std::string path_csv(const ExperimentConfig& c, const SampledPath& p) {
  std::string out = csv_preamble(c) + "index,coordinate,value\n";
  for (std::size_t i = 0; i < p.values.size(); ++i)
    out += std::to_string(i) + "," + shortest(p.coordinate(i)) + "," + shortest(p.values[i]) + "\n";
  return out;
}

PhysicalParams params_of(const ExperimentConfig& c) { return {c.alpha, c.sigma_c}; }

std::size_t required_count(double fraction, std::size_t replications) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(replications) - 1e-9));
}

// ---------------------------------------------------------------- oracle-check

RunResult run_oracle(const ExperimentConfig& c, unsigned threads) {
  const PhysicalParams params = params_of(c);
  const std::size_t m = c.oracle_points;
  struct Row {
    CovarianceQuery q;
    double closed = 0.0;
    double quad = 0.0;
  };
  std::vector<Row> rows(2 * m * m);
  const auto grid = [m](std::size_t i, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
  };
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double t = grid(i, 0.1, 2.0);
      rows[i * m + j].q = {t, t, 0.0, grid(j, 0.0, 2.0)};
      rows[m * m + i * m + j].q = {t * grid(j, 0.05, 1.0), t, 0.0, 0.0};
    }
  parallel_for(rows.size(), threads, [&](std::size_t k) {
    Row& r = rows[k];
    r.closed = k < m * m ? cov_equal_time(r.q.t, r.q.x, r.q.y, params) : cov_equal_space(r.q.s, r.q.t, params);
    r.quad = cov_oracle(r.q, params);
  });

  std::string csv = csv_preamble(c) + "s,t,x,y,closed_form,quadrature,abs_diff,rel_diff\n";
  double max_abs = 0.0, max_rel = 0.0;
  for (const auto& r : rows) {
    const double abs_diff = std::fabs(r.closed - r.quad);
    const double rel_diff = abs_diff / std::fabs(r.closed);
    max_abs = std::max(max_abs, abs_diff);
    max_rel = std::max(max_rel, rel_diff);
    csv += shortest(r.q.s) + "," + shortest(r.q.t) + "," + shortest(r.q.x) + "," + shortest(r.q.y) + "," +
           shortest(r.closed) + "," + shortest(r.quad) + "," + shortest(abs_diff) + "," + shortest(rel_diff) + "\n";
  }
  RunResult res;
  res.criteria_met = max_abs <= 1e-8 && max_rel <= 1e-8;
  res.summary = summary_preamble(c) + "closed forms against quadrature, " + std::to_string(rows.size()) +
                " argument tuples\n  max abs diff " + shortest(max_abs) + "\n  max rel diff " + shortest(max_rel) +
                "\n  within 1e-8: " + (res.criteria_met ? "yes" : "no") + "\n";
  res.artifacts.push_back({"oracle_check.csv", csv});
  return res;
}

// ---------------------------------------------------------------- linear-variation

RunResult run_linear(const ExperimentConfig& c, unsigned threads) {
  const PhysicalParams params = params_of(c);
  const bool space = c.axis == "space";
  const std::size_t finest = *std::max_element(c.ns.begin(), c.ns.end());
  const GaussianFieldSampler sampler = space ? build_spatial_sampler({c.a1, c.a2, finest}, c.t, params)
                                             : build_temporal_sampler({c.t1, c.t2, finest}, params);
  std::vector<std::vector<double>> paths(c.replications);
  parallel_for(c.replications, threads, [&](std::size_t r) {
    paths[r] = sample(sampler, {c.seed, 0, static_cast<std::uint32_t>(r)}).values;
  });
  const PathSource source = [&](std::size_t n, std::uint32_t r) {
    const std::size_t stride = finest / n;
    std::vector<double> out(n + 1);
    for (std::size_t j = 0; j <= n; ++j) out[j] = paths[r][j * stride];
    return out;
  };
  const unsigned p = space ? 2 : 4;
  const ScanResult scan = variation_scaling_scan(source, p, c.ns, c.replications, threads);
  const double target = space ? spatial_quadratic_rate(params) * (c.a2 - c.a1)
                              : temporal_quartic_rate(params) * (c.t2 - c.t1);

  std::string csv = csv_preamble(c) + "axis,p,n,replications,mean,variance,std_error,target\n";
  for (const auto& row : scan.rows) {
    const double se = std::sqrt(row.variance / static_cast<double>(row.replications));
    csv += c.axis + "," + std::to_string(p) + "," + std::to_string(row.n) + "," + std::to_string(row.replications) +
           "," + shortest(row.mean) + "," + shortest(row.variance) + "," + shortest(se) + "," + shortest(target) +
           "\n";
  }
  const auto finest_row = std::find_if(scan.rows.begin(), scan.rows.end(), [&](const ScanRow& r) { return r.n == finest; });
  const double se = std::sqrt(finest_row->variance / static_cast<double>(c.replications));
  const double z = se > 0.0 ? std::fabs(finest_row->mean - target) / se : (finest_row->mean == target ? 0.0 : INFINITY);

  RunResult res;
  res.criteria_met = z <= 4.0 && scan.variance_decreasing;
  std::ostringstream os;
  os << summary_preamble(c) << (space ? "spatial quadratic" : "temporal quartic") << " variation of exact linear samples\n"
     << "  target " << shortest(target) << "\n";
  for (const auto& row : scan.rows)
    os << "  n = " << row.n << ": mean " << shortest(row.mean) << ", variance " << shortest(row.variance) << "\n";
  os << "  finest mean vs target: " << shortest(z) << " standard errors (limit 4)\n"
     << "  variance strictly decreasing in n: " << (scan.variance_decreasing ? "yes" : "no") << "\n";
  res.summary = os.str();
  res.artifacts.push_back({"linear_variation.csv", csv});
  return res;
}

// ---------------------------------------------------------------- nonlinear-variation

double initial_value(const ExperimentConfig& c, double x) {
  if (c.x0 == "constant") return c.x0_value;
  if (c.x0 == "sine") return c.x0_value * std::sin(2.0 * std::numbers::pi * (x - c.a) / (c.b - c.a));
  return 0.0;
}

RunResult run_nonlinear(const ExperimentConfig& c, unsigned threads) {
  SolverConfig s = c.solver();
  const bool space = c.axis != "time";
  const bool time = c.axis != "space";
  if (space) s.record.snapshot_times = {c.t};
  if (time) {
    s.record.trace_positions = {c.position};
    s.record.trace_every = c.trace_every;
    s.record.trace_from = c.t1;
  }
  std::vector<double> x0(s.node_count());
  for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = initial_value(c, s.node_position(i));

  PartitionRules rules;
  rules.guard_fraction = c.guard;
  rules.min_stride = c.min_stride;
  const double delta = c.window > 0.0 ? c.window : 16.0 * s.dx();

  struct Outcome {
    VariationReport space, time;
    std::uint64_t clamps = 0, updates = 0;
  };
  std::vector<Outcome> out(c.replications);
  std::vector<std::string> exports;
  parallel_for(c.replications, threads, [&](std::size_t r) {
    const auto rep = static_cast<std::uint32_t>(r);
    const SpaceTimeRecord rec = simulate(s, x0, rep);
    out[r].clamps = rec.clamp_count;
    out[r].updates = rec.total_updates;
    if (space) {
      const auto snap = std::find_if(rec.snapshots.begin(), rec.snapshots.end(),
                                     [&](const Snapshot& sn) { return sn.requested_time == c.t; });
      const SampledPath path = spatial_path(s, snap->state, rep);
      out[r].space = spatial_quadratic_report(path, s.sigma, c.alpha, delta, c.a1, c.a2, rules);
      if (r == 0 && c.export_paths) exports.push_back(path_csv(c, path));
    }
    if (time) {
      const SampledPath path = temporal_path(rec.traces.front(), {c.seed, 0, rep});
      out[r].time = temporal_quartic_report(path, s.sigma, c.alpha, c.t1, c.t2, c.n, rules);
      if (r == 0 && c.export_paths) exports.push_back(path_csv(c, path));
    }
  });

  std::string csv = csv_preamble(c) + "replicate," + csv_header_variation() + "\n";
  std::size_t space_ok = 0, time_ok = 0;
  std::uint64_t clamps = 0, updates = 0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (space) {
      csv += std::to_string(r) + "," + csv_row(out[r].space) + "\n";
      space_ok += out[r].space.relative_error <= c.space_tolerance;
    }
    if (time) {
      csv += std::to_string(r) + "," + csv_row(out[r].time) + "\n";
      time_ok += out[r].time.relative_error <= c.time_tolerance;
    }
    clamps += out[r].clamps;
    updates += out[r].updates;
  }

  RunResult res;
  std::ostringstream os;
  os << summary_preamble(c) << "solver: " << s.sigma.describe() << ", nx = " << s.nx << ", dt = " << shortest(s.dt)
     << ", t_end = " << shortest(s.t_end) << "\n";
  if (space) {
    const std::size_t need = required_count(c.space_pass_fraction, c.replications);
    res.criteria_met &= space_ok >= need;
    os << "  space: window " << shortest(delta) << " on [" << shortest(c.a1) << ", " << shortest(c.a2) << "] at t = "
       << shortest(c.t) << "; " << space_ok << " of " << c.replications << " within " << shortest(c.space_tolerance)
       << " (need " << need << ")\n";
  }
  if (time) {
    const std::size_t need = required_count(c.time_pass_fraction, c.replications);
    res.criteria_met &= time_ok >= need;
    os << "  time: " << c.n << " pieces on [" << shortest(c.t1) << ", " << shortest(c.t2) << "] at x = "
       << shortest(c.position) << "; " << time_ok << " of " << c.replications << " within "
       << shortest(c.time_tolerance) << " (need " << need << ")\n";
  }
  if (s.sigma.requires_nonnegative())
    os << "  clamped updates: " << clamps << " of " << updates << "\n";
  res.summary = os.str();
  res.artifacts.push_back({"nonlinear_variation.csv", csv});
  if (c.export_paths) {
    std::size_t k = 0;
    if (space) res.artifacts.push_back({"snapshot_r0.csv", exports.at(k++)});
    if (time) res.artifacts.push_back({"trace_r0.csv", exports.at(k++)});
  }
  return res;
}

// ---------------------------------------------------------------- estimate / rate-study

EstimatorReport study(const ExperimentConfig& c, Method m, unsigned threads) {
  RateStudyConfig rc;
  rc.method = m;
  rc.params = params_of(c);
  rc.ns = c.estimator_ns;
  rc.replications = c.replications;
  rc.lo = m == Method::Temporal ? c.t1 : c.a1;
  rc.hi = m == Method::Temporal ? c.t2 : c.a2;
  rc.t = c.t;
  rc.seed = c.seed;
  rc.stream = m == Method::Temporal ? 0 : 1;
  rc.threads = threads;
  return rate_study(rc);
}

RunResult run_estimate(const ExperimentConfig& c, unsigned threads, bool rate) {
  std::vector<Method> methods;
  if (c.method != "spatial") methods.push_back(Method::Temporal);
  if (c.method != "temporal") methods.push_back(Method::Spatial);

  RunResult res;
  std::string csv = csv_preamble(c) + csv_header_rate() + "\n";
  std::ostringstream os;
  os << summary_preamble(c);
  for (Method m : methods) {
    const EstimatorReport rep = study(c, m, threads);
    for (const auto& line : csv_rows(rep)) csv += line + "\n";
    os << summary_block(rep);
    if (rate) {
      res.criteria_met &= rep.error_decreasing;
    } else {
      const double tol = m == Method::Temporal ? c.estimate_tolerance_time : c.estimate_tolerance_space;
      const double dev = std::fabs(rep.per_n.back().mean_alpha_hat - c.alpha) / c.alpha;
      res.criteria_met &= dev <= tol;
      os << "  relative deviation of the mean " << shortest(dev) << " (limit " << shortest(tol) << ")\n";
    }
  }
  res.summary = os.str();
  res.artifacts.push_back({rate ? "rate_study.csv" : "estimate.csv", csv});
  return res;
}

void write_file(const std::filesystem::path& p, const std::string& contents) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  f.close();
  if (!f) throw Error("cannot write " + p.string());
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::string describe(const ExperimentConfig& c) {
  c.validate();
  std::ostringstream os;
  os << "experiment " << c.name << " (" << to_string(c.kind) << ")\n"
     << "config_hash " << hash_hex(config_hash(c)) << "\nseed " << c.seed << "\nreplications " << c.replications
     << "\n";
  const auto mib = [](double bytes) { return shortest(std::round(bytes / 1048576.0 * 100.0) / 100.0) + " MiB"; };
  switch (c.kind) {
    case ExperimentKind::OracleCheck:
      os << "oracle grid " << c.oracle_points << " x " << c.oracle_points << " per covariance form, "
         << 2 * c.oracle_points * c.oracle_points << " quadratures\n";
      break;
    case ExperimentKind::LinearVariation: {
      const std::size_t finest = *std::max_element(c.ns.begin(), c.ns.end());
      const double pts = static_cast<double>(finest + 1);
      if (c.axis == "space")
        os << "space grid [" << shortest(c.a1) << ", " << shortest(c.a2) << "] at t = " << shortest(c.t);
      else
        os << "time grid [" << shortest(c.t1) << ", " << shortest(c.t2) << "]";
      os << ", " << finest << " pieces (" << finest + 1 << " points)\npartition sizes";
      for (std::size_t n : c.ns) os << " " << n;
      os << "\nmemory: covariance and factor " << mib(pts * (pts + 1.0) * 8.0) << ", paths "
         << mib(pts * 8.0 * static_cast<double>(c.replications)) << "\n";
      break;
    }
    case ExperimentKind::Estimate:
    case ExperimentKind::RateStudy: {
      const std::size_t finest = *std::max_element(c.estimator_ns.begin(), c.estimator_ns.end());
      const double pts = static_cast<double>(finest + 1);
      os << "method " << c.method << ", alpha " << shortest(c.alpha) << ", sigma " << shortest(c.sigma_c) << "\n";
      if (c.method != "spatial") os << "time grid [" << shortest(c.t1) << ", " << shortest(c.t2) << "]\n";
      if (c.method != "temporal")
        os << "space grid [" << shortest(c.a1) << ", " << shortest(c.a2) << "] at t = " << shortest(c.t) << "\n";
      os << "partition sizes";
      for (std::size_t n : c.estimator_ns) os << " " << n;
      os << " (finest sampled with " << finest + 1 << " points)\nmemory: covariance and factor "
         << mib(pts * (pts + 1.0) * 8.0) << "\n";
      break;
    }
    case ExperimentKind::NonlinearVariation: {
      const SolverConfig s = c.solver();
      const std::uint64_t steps = s.step_count();
      const CflReport cfl = cfl_check(s);
      const double cells = static_cast<double>(s.updated_count()) * static_cast<double>(steps);
      os << "domain [" << shortest(s.a) << ", " << shortest(s.b) << "], bc " << c.bc << ", nx " << s.nx << ", dx "
         << shortest(s.dx()) << ", nodes " << s.node_count() << "\n"
         << "dt " << shortest(s.dt) << " (" << (c.dt > 0.0 ? "given" : "dx^2 / (4 alpha)") << "), scheme " << c.scheme
         << ", steps " << steps << ", CFL ratio " << shortest(cfl.ratio) << "\n";
      if (!cfl.advisory.empty()) os << "advisory: " << cfl.advisory << "\n";
      os << "sigma " << s.sigma.describe() << ", drift " << s.drift.describe() << "\n"
         << "predicted cell updates per replication " << shortest(cells) << ", total "
         << shortest(cells * static_cast<double>(c.replications)) << "\n";
      double bytes = 4.0 * static_cast<double>(s.node_count()) * 8.0;
      if (c.axis != "time") {
        const double delta = c.window > 0.0 ? c.window : 16.0 * s.dx();
        os << "space window " << shortest(delta) << " (" << shortest(delta / s.dx()) << " dx) on ["
           << shortest(c.a1) << ", " << shortest(c.a2) << "], " << shortest(std::nearbyint((c.a2 - c.a1) / delta))
           << " pieces, snapshot at t = " << shortest(c.t) << "\n";
      }
      if (c.axis != "space") {
        const double h = static_cast<double>(c.trace_every) * s.dt;
        const double first = std::ceil(c.t1 / h - 1e-9) * h;
        const double samples = std::floor((s.t_end - first) / h + 1e-9) + 1.0;
        auto node = std::llround((c.position - s.a) / s.dx());
        if (std::holds_alternative<Periodic>(s.bc))
          node = ((node % static_cast<long long>(s.nx)) + static_cast<long long>(s.nx)) % static_cast<long long>(s.nx);
        const double snapped = s.node_position(static_cast<std::size_t>(node));
        os << "trace at x = " << shortest(c.position) << " snapped to node " << node << " (x = " << shortest(snapped)
           << ", distance " << shortest(std::fabs(snapped - c.position)) << ")\n"
           << "trace resolution " << shortest(h) << " (every " << c.trace_every << " steps), " << shortest(samples)
           << " samples from t = " << shortest(first) << "\n"
           << "time partition n = " << c.n << " on [" << shortest(c.t1) << ", " << shortest(c.t2) << "], window "
           << shortest((c.t2 - c.t1) / static_cast<double>(c.n) / h) << " trace samples\n";
        bytes += samples * 8.0;
      }
      os << "memory per replication " << mib(bytes) << "\n";
      break;
    }
  }
  return os.str();
}

RunResult run_experiment(const ExperimentConfig& c, unsigned threads) {
  c.validate();
  RunResult res;
  switch (c.kind) {
    case ExperimentKind::OracleCheck: res = run_oracle(c, threads); break;
    case ExperimentKind::LinearVariation: res = run_linear(c, threads); break;
    case ExperimentKind::NonlinearVariation: res = run_nonlinear(c, threads); break;
    case ExperimentKind::Estimate: res = run_estimate(c, threads, false); break;
    case ExperimentKind::RateStudy: res = run_estimate(c, threads, true); break;
  }
  res.summary += std::string("\ncriteria met: ") + (res.criteria_met ? "yes" : "no") + "\n";
  res.artifacts.push_back({"summary.txt", res.summary});
  res.artifacts.push_back({"config.ini", to_ini(c)});
  return res;
}

void write_artifacts(const std::filesystem::path& dir, const ExperimentConfig& c, const RunResult& r) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::string manifest = "config_hash " + hash_hex(config_hash(c)) + "\nseed " + std::to_string(c.seed) +
                         "\nreplications " + std::to_string(c.replications) +
                         "\nrerun shelab run --config config.ini --seed " + std::to_string(c.seed) +
                         " --replications " + std::to_string(c.replications) + "\n";
  std::vector<Artifact> all = r.artifacts;
  for (const auto& a : all)
    manifest += "file " + a.filename + " bytes " + std::to_string(a.contents.size()) + " fnv1a " +
                hash_hex(fnv1a(a.contents)) + "\n";
  all.push_back({"manifest.txt", manifest});

  std::vector<fs::path> temps;
  try {
    for (const auto& a : all) {
      temps.push_back(dir / ("." + a.filename + ".tmp"));
      write_file(temps.back(), a.contents);
    }
    for (std::size_t i = 0; i < all.size(); ++i) fs::rename(temps[i], dir / all[i].filename);
  } catch (...) {
    std::error_code ec;
    for (const auto& t : temps) fs::remove(t, ec);
    throw;
  }
}

std::string error_record(const std::exception& e) {
  nlohmann::json j;
  j["status"] = "error";
  j["message"] = e.what();
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
    j["kind"] = "validation";
    j["field"] = ce->field();
    if (!ce->bound().empty()) j["bound"] = ce->bound();
  } else if (const auto* ne = dynamic_cast<const NumericalError*>(&e)) {
    j["kind"] = "numerical";
    j["value"] = ne->achieved();
    if (const auto* be = dynamic_cast<const BlowUpError*>(&e)) j["step"] = be->step();
  } else if (dynamic_cast<const DomainError*>(&e)) {
    j["kind"] = "validation";
  } else {
    j["kind"] = "error";
  }
  return j.dump();
}

}  // namespace shelab

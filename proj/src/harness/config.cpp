#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "shelab/errors.hpp"
#include "shelab/format.hpp"
#include "shelab/harness.hpp"
#include "shelab/variations.hpp"

namespace shelab {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ConfigError(key, "cannot parse '" + s + "'", std::is_floating_point_v<T> ? "a number" : "an integer");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
  return v;
}

std::string format_value(double v) { return shortest(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(const std::string& v) { return v; }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(ExperimentKind k) { return to_string(k); }
std::string format_value(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

void parse_value(const std::string& key, const std::string& s, double& out) { out = parse_number<double>(key, s); }
void parse_value(const std::string& key, const std::string& s, std::uint64_t& out) {
  out = parse_number<std::uint64_t>(key, s);
}
void parse_value(const std::string&, const std::string& s, std::string& out) { out = trim(s); }
void parse_value(const std::string& key, const std::string& s, bool& out) {
  const std::string v = trim(s);
  if (v == "true" || v == "1") out = true;
  else if (v == "false" || v == "0") out = false;
  else throw ConfigError(key, "cannot parse '" + v + "'", "true or false");
}
void parse_value(const std::string& key, const std::string& s, ExperimentKind& out) {
  try {
    out = parse_experiment_kind(trim(s));
  } catch (const ConfigError&) {
    throw ConfigError(key, "unknown experiment kind '" + trim(s) + "'",
                      "oracle-check, linear-variation, nonlinear-variation, estimate or rate-study");
  }
}
void parse_value(const std::string& key, const std::string& s, std::vector<std::size_t>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(parse_number<std::size_t>(key, item));
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> write;
  std::function<void(ExperimentConfig&, const std::string&)> read;
};

template <class T>
Field field(const char* section, const char* key, T ExperimentConfig::*m) {
  const std::string full = std::string(section) + "." + key;
  return {section, key, [m](const ExperimentConfig& c) { return format_value(c.*m); },
          [m, full](ExperimentConfig& c, const std::string& s) { parse_value(full, s, c.*m); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> f{
      field("experiment", "kind", &C::kind),
      field("experiment", "name", &C::name),
      field("experiment", "seed", &C::seed),
      field("experiment", "replications", &C::replications),
      field("model", "alpha", &C::alpha),
      field("model", "sigma", &C::sigma),
      field("model", "sigma_c", &C::sigma_c),
      field("model", "sigma_p", &C::sigma_p),
      field("model", "sigma_q", &C::sigma_q),
      field("model", "sigma_c0", &C::sigma_c0),
      field("model", "sigma_c1", &C::sigma_c1),
      field("model", "sigma_omega", &C::sigma_omega),
      field("model", "sigma_beta", &C::sigma_beta),
      field("model", "drift", &C::drift),
      field("model", "drift_k", &C::drift_k),
      field("model", "drift_a", &C::drift_a),
      field("model", "drift_omega", &C::drift_omega),
      field("solver", "a", &C::a),
      field("solver", "b", &C::b),
      field("solver", "nx", &C::nx),
      field("solver", "dt", &C::dt),
      field("solver", "t_end", &C::t_end),
      field("solver", "scheme", &C::scheme),
      field("solver", "bc", &C::bc),
      field("solver", "bc_value", &C::bc_value),
      field("solver", "x0", &C::x0),
      field("solver", "x0_value", &C::x0_value),
      field("solver", "trace_every", &C::trace_every),
      field("solver", "export_paths", &C::export_paths),
      field("variation", "axis", &C::axis),
      field("variation", "t", &C::t),
      field("variation", "a1", &C::a1),
      field("variation", "a2", &C::a2),
      field("variation", "window", &C::window),
      field("variation", "t1", &C::t1),
      field("variation", "t2", &C::t2),
      field("variation", "position", &C::position),
      field("variation", "n", &C::n),
      field("variation", "ns", &C::ns),
      field("variation", "min_stride", &C::min_stride),
      field("variation", "guard", &C::guard),
      field("variation", "space_tolerance", &C::space_tolerance),
      field("variation", "time_tolerance", &C::time_tolerance),
      field("variation", "space_pass_fraction", &C::space_pass_fraction),
      field("variation", "time_pass_fraction", &C::time_pass_fraction),
      field("estimator", "method", &C::method),
      field("estimator", "ns", &C::estimator_ns),
      field("estimator", "tolerance_time", &C::estimate_tolerance_time),
      field("estimator", "tolerance_space", &C::estimate_tolerance_space),
      field("oracle", "points", &C::oracle_points),
  };
  return f;
}

void require(bool ok, const std::string& field, const std::string& message, const std::string& bound = {}) {
  if (!ok) throw ConfigError(field, message, bound);
}

void require_one_of(const std::string& value, const std::string& field, std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (value == a) return;
    list += (list.empty() ? "" : " | ") + std::string(a);
  }
  throw ConfigError(field, "unknown value '" + value + "'", list);
}

void require_divisible(const std::vector<std::size_t>& ns, const std::string& field) {
  require(!ns.empty(), field, "needs at least one partition size");
  const std::size_t finest = *std::max_element(ns.begin(), ns.end());
  for (std::size_t n : ns)
    require(n > 0 && finest % n == 0, field, "every size must divide the largest",
            "divisors of " + std::to_string(finest));
}

SigmaSpec make_sigma(const ExperimentConfig& c) {
  if (c.sigma == "constant") return SigmaSpec::constant(c.sigma_c);
  if (c.sigma == "affine") return SigmaSpec::affine(c.sigma_p, c.sigma_q);
  if (c.sigma == "sine") return SigmaSpec::sine(c.sigma_c0, c.sigma_c1, c.sigma_omega);
  if (c.sigma == "power") return SigmaSpec::power(c.sigma_beta);
  require_one_of(c.sigma, "model.sigma", {"constant", "affine", "sine", "power"});
  return {};
}

DriftSpec make_drift(const ExperimentConfig& c) {
  if (c.drift == "none") return {};
  if (c.drift == "linear") return DriftLinear{c.drift_k};
  if (c.drift == "sine") return DriftSine{c.drift_a, c.drift_omega};
  require_one_of(c.drift, "model.drift", {"none", "linear", "sine"});
  return {};
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::OracleCheck: return "oracle-check";
    case ExperimentKind::LinearVariation: return "linear-variation";
    case ExperimentKind::NonlinearVariation: return "nonlinear-variation";
    case ExperimentKind::Estimate: return "estimate";
    case ExperimentKind::RateStudy: return "rate-study";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  for (auto k : {ExperimentKind::OracleCheck, ExperimentKind::LinearVariation, ExperimentKind::NonlinearVariation,
                 ExperimentKind::Estimate, ExperimentKind::RateStudy})
    if (to_string(k) == s) return k;
  throw ConfigError("experiment.kind", "unknown experiment kind '" + s + "'");
}

double ExperimentConfig::effective_dt() const {
  if (dt > 0.0) return dt;
  const double dx = (b - a) / static_cast<double>(nx);
  return dx * dx / (4.0 * alpha);
}

SolverConfig ExperimentConfig::solver() const {
  SolverConfig s;
  s.alpha = alpha;
  s.a = a;
  s.b = b;
  s.nx = nx;
  s.dt = effective_dt();
  s.t_end = t_end;
  if (scheme == "explicit") s.scheme = Scheme::Explicit;
  else if (scheme == "semi-implicit") s.scheme = Scheme::SemiImplicit;
  else require_one_of(scheme, "solver.scheme", {"explicit", "semi-implicit"});
  if (bc == "periodic") s.bc = Periodic{};
  else if (bc == "dirichlet") s.bc = Dirichlet{bc_value};
  else if (bc == "neumann") s.bc = Neumann{};
  else require_one_of(bc, "solver.bc", {"periodic", "dirichlet", "neumann"});
  s.sigma = make_sigma(*this);
  s.drift = make_drift(*this);
  s.seed = seed;
  return s;
}

void ExperimentConfig::validate() const {
  require(replications >= 1, "experiment.replications", "must be positive", ">= 1");
  require(replications <= 0xffffffffu, "experiment.replications", "too many", "< 2^32");
  require(alpha > 0.0, "model.alpha", "must be positive", "> 0");
  make_sigma(*this).validate();
  make_drift(*this).validate();

  const bool exact = kind == ExperimentKind::LinearVariation || kind == ExperimentKind::Estimate ||
                     kind == ExperimentKind::RateStudy;
  if (exact) {
    require(sigma == "constant", "model.sigma", "exact sampling needs a constant coefficient", "constant");
    require(sigma_c >= 0.0, "model.sigma_c", "must be non-negative", ">= 0");
  }

  switch (kind) {
    case ExperimentKind::OracleCheck:
      require(oracle_points >= 2, "oracle.points", "grid needs two or more points per axis", ">= 2");
      break;
    case ExperimentKind::LinearVariation:
      require_one_of(axis, "variation.axis", {"space", "time"});
      require_divisible(ns, "variation.ns");
      if (axis == "space") {
        require(a2 > a1, "variation.a2", "must exceed a1", "> " + shortest(a1));
        require(t > 0.0, "variation.t", "must be positive", "> 0");
      } else {
        require(t1 > 0.0, "variation.t1", "must be positive", "> 0");
        require(t2 > t1, "variation.t2", "must exceed t1", "> " + shortest(t1));
      }
      break;
    case ExperimentKind::Estimate:
    case ExperimentKind::RateStudy:
      require_one_of(method, "estimator.method",
                     kind == ExperimentKind::Estimate ? std::initializer_list<const char*>{"temporal", "spatial", "both"}
                                                      : std::initializer_list<const char*>{"temporal", "spatial"});
      require_divisible(estimator_ns, "estimator.ns");
      if (method != "spatial") {
        require(t1 > 0.0, "variation.t1", "must be positive", "> 0");
        require(t2 > t1, "variation.t2", "must exceed t1", "> " + shortest(t1));
      }
      if (method != "temporal") {
        require(a2 > a1, "variation.a2", "must exceed a1", "> " + shortest(a1));
        require(t > 0.0, "variation.t", "must be positive", "> 0");
      }
      require(sigma_c > 0.0, "model.sigma_c", "estimator needs a non-zero coefficient", "> 0");
      break;
    case ExperimentKind::NonlinearVariation: {
      require_one_of(axis, "variation.axis", {"space", "time", "both"});
      require_one_of(x0, "solver.x0", {"zero", "constant", "sine"});
      require(space_pass_fraction >= 0.0 && space_pass_fraction <= 1.0, "variation.space_pass_fraction",
              "must be a fraction", "[0, 1]");
      require(time_pass_fraction >= 0.0 && time_pass_fraction <= 1.0, "variation.time_pass_fraction",
              "must be a fraction", "[0, 1]");
      SolverConfig s = solver();
      if (axis != "time") s.record.snapshot_times = {t};
      if (axis != "space") {
        s.record.trace_positions = {position};
        s.record.trace_every = trace_every;
        s.record.trace_from = t1;
      }
      if (axis != "time") require(t <= t_end, "variation.t", "snapshot after t_end", "<= " + shortest(t_end));
      if (axis != "space") require(t2 <= t_end, "variation.t2", "trace window ends after t_end", "<= " + shortest(t_end));
      shelab::validate(s);
      s.step_count();

      PartitionRules rules;
      rules.guard_fraction = guard;
      rules.min_stride = min_stride;
      if (axis != "time") {
        const std::vector<double> zeros(s.node_count(), 0.0);
        SampledPath p;
        p.values = zeros;
        p.origin = a;
        p.spacing = s.dx();
        p.boundary = std::holds_alternative<Periodic>(s.bc) ? PathBoundary::Periodic : PathBoundary::Walled;
        const double delta = window > 0.0 ? window : 16.0 * s.dx();
        const double pieces = (a2 - a1) / delta;
        require(std::fabs(pieces - std::nearbyint(pieces)) <= 1e-9 * pieces && pieces >= 1.0, "variation.window",
                "does not divide [a1, a2]", "(a2 - a1) / integer");
        make_partition(p, a1, a2, static_cast<std::size_t>(std::nearbyint(pieces)), rules);
      }
      if (axis != "space") {
        require(t1 > 0.0, "variation.t1", "must be positive", "> 0");
        require(t2 > t1, "variation.t2", "must exceed t1", "> " + shortest(t1));
        const double h = static_cast<double>(trace_every) * s.dt;
        const double first = std::ceil(t1 / h - 1e-9) * h;
        const auto count = static_cast<std::size_t>(std::floor((t_end - first) / h + 1e-9)) + 1;
        const std::vector<double> zeros(count, 0.0);
        SampledPath p;
        p.values = zeros;
        p.origin = first;
        p.spacing = h;
        make_partition(p, t1, t2, n, rules);
      }
      break;
    }
  }
}

ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  std::map<std::string, const Field*> by_name;
  for (const auto& f : fields()) by_name[f.section + "." + f.key] = &f;

  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(section, "key outside any section");
    for (const auto& [key, value] : body) {
      const auto it = by_name.find(section + "." + key);
      if (it == by_name.end()) throw ConfigError(section + "." + key, "unknown key");
      it->second->read(c, value.data());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const ExperimentConfig& c) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.write(c) + "\n";
  }
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : to_ini(c)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> list = [] {
    std::vector<Preset> p;

    ExperimentConfig prop1;
    prop1.kind = ExperimentKind::LinearVariation;
    prop1.name = "prop1";
    prop1.seed = 1;
    prop1.replications = 500;
    prop1.axis = "space";
    prop1.t = 1.0;
    prop1.a1 = 0.0;
    prop1.a2 = 1.0;
    prop1.ns = {256, 1024, 4096};
    p.push_back({"prop1", "spatial quadratic variation of exact linear samples on [0, 1] at t = 1", prop1});

    ExperimentConfig prop2 = prop1;
    prop2.name = "prop2";
    prop2.seed = 2;
    prop2.axis = "time";
    prop2.t1 = 1.0;
    prop2.t2 = 2.0;
    p.push_back({"prop2", "temporal quartic variation of exact linear samples on [1, 2]", prop2});

    ExperimentConfig thm1;
    thm1.kind = ExperimentKind::NonlinearVariation;
    thm1.name = "thm1";
    thm1.seed = 3;
    thm1.replications = 20;
    thm1.sigma = "sine";
    thm1.nx = 1024;
    thm1.t_end = 0.25;
    thm1.axis = "space";
    thm1.t = 0.25;
    thm1.window = 1.0 / 64.0;
    p.push_back({"thm1", "spatial quadratic variation of the solver with sigma = 2 + sin, snapshot at t = 0.25", thm1});

    ExperimentConfig thm2 = thm1;
    thm2.name = "thm2";
    thm2.seed = 4;
    thm2.axis = "time";
    thm2.position = 0.5;
    thm2.t1 = 0.125;
    thm2.t2 = 0.25;
    thm2.n = 512;
    p.push_back({"thm2", "temporal quartic variation of the solver with sigma = 2 + sin, trace at x = 0.5", thm2});

    ExperimentConfig nonlinear = thm1;
    nonlinear.name = "nonlinear";
    nonlinear.seed = 5;
    nonlinear.replications = 1;
    nonlinear.nx = 512;
    nonlinear.t_end = 1.0;
    nonlinear.axis = "both";
    nonlinear.t = 1.0;
    nonlinear.window = 1.0 / 32.0;
    nonlinear.t1 = 0.5;
    nonlinear.t2 = 1.0;
    nonlinear.n = 512;
    p.push_back({"nonlinear", "solver with sigma = 2 + sin on [0, 1] up to T = 1, both variations", nonlinear});

    ExperimentConfig est;
    est.kind = ExperimentKind::Estimate;
    est.name = "estimate";
    est.seed = 6;
    est.replications = 20;
    est.alpha = 2.0;
    est.method = "both";
    est.t = 1.0;
    est.a1 = 0.0;
    est.a2 = 1.0;
    est.t1 = 1.0;
    est.t2 = 2.0;
    est.estimator_ns = {4096};
    p.push_back({"estimate", "alpha = 2 recovered from exact linear samples, both estimators", est});

    ExperimentConfig rate = est;
    rate.kind = ExperimentKind::RateStudy;
    rate.name = "rate-study";
    rate.seed = 7;
    rate.replications = 50;
    rate.alpha = 1.0;
    rate.method = "temporal";
    rate.estimator_ns = {512, 2048, 8192};
    p.push_back({"rate-study", "clipped estimator error against partition size", rate});

    ExperimentConfig oracle;
    oracle.kind = ExperimentKind::OracleCheck;
    oracle.name = "oracle-check";
    oracle.oracle_points = 20;
    p.push_back({"oracle-check", "closed-form covariances against quadrature on a 20 x 20 grid", oracle});
    return p;
  }();
  return list;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  std::string names;
  for (const auto& p : presets()) names += (names.empty() ? "" : ", ") + p.name;
  throw ConfigError("preset", "unknown preset '" + name + "'", names);
}

}  // namespace shelab

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shelab/errors.hpp"
#include "shelab/harness.hpp"

using namespace shelab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shelab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ExperimentConfig small_nonlinear() {
  ExperimentConfig c = find_preset("thm1").config;
  c.nx = 64;
  c.t_end = 0.0625;
  c.t = 0.0625;
  c.window = 1.0 / 8.0;
  c.replications = 3;
  return c;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SHELAB_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, EveryPresetRoundTrips) {
  for (const auto& p : presets()) {
    const std::string text = to_ini(p.config);
    const ExperimentConfig back = parse_config(text);
    EXPECT_EQ(back, p.config) << p.name;
    EXPECT_EQ(to_ini(back), text) << p.name;
    EXPECT_NO_THROW(p.config.validate()) << p.name;
  }
}

TEST(Config, AwkwardDoublesRoundTrip) {
  ExperimentConfig c;
  c.alpha = 0.1 + 0.2;
  c.dt = 1.0 / 3.0 * 1e-7;
  c.a1 = -0.0;
  c.sigma_c = 5e-324;
  const ExperimentConfig back = parse_config(to_ini(c));
  EXPECT_EQ(back.alpha, c.alpha);
  EXPECT_EQ(back.dt, c.dt);
  EXPECT_EQ(back.sigma_c, c.sigma_c);
  EXPECT_TRUE(std::signbit(back.a1));
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto c = parse_config("[experiment]\nkind = rate-study\nseed = 9\n[estimator]\nns = 8, 16\n");
  EXPECT_EQ(c.kind, ExperimentKind::RateStudy);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.estimator_ns, (std::vector<std::size_t>{8, 16}));
  EXPECT_EQ(c.alpha, ExperimentConfig{}.alpha);
}

TEST(Config, ErrorsNameTheField) {
  try {
    parse_config("[model]\nalpha = fast\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "model.alpha");
  }
  try {
    parse_config("[model]\nalpah = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "model.alpah");
  }
  try {
    parse_config("[model]\nalpha = 1\n[solver\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "line 3");
  }
  EXPECT_THROW(parse_config("[experiment]\nkind = nonsense\n"), ConfigError);
}

TEST(Config, UnstableDtReportsBound) {
  ExperimentConfig c = find_preset("thm1").config;
  c.dt = 1e-3;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "dt");
    EXPECT_FALSE(e.bound().empty());
  }
}

TEST(Config, GuardAndCommensurabilityChecks) {
  ExperimentConfig c = small_nonlinear();
  c.window = 0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_nonlinear();
  c.bc = "dirichlet";
  EXPECT_THROW(c.validate(), ConfigError);  // [0, 1] touches the walls
  c.a1 = 0.25;
  c.a2 = 0.75;
  EXPECT_NO_THROW(c.validate());
  c = small_nonlinear();
  c.window = 1.0 / 64.0;  // one grid step, below min_stride
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, ExactExperimentsNeedConstantSigma) {
  ExperimentConfig c = find_preset("prop1").config;
  c.sigma = "sine";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, HashTracksContent) {
  ExperimentConfig c = find_preset("prop1").config;
  const auto h = config_hash(c);
  EXPECT_EQ(h, config_hash(parse_config(to_ini(c))));
  c.seed += 1;
  EXPECT_NE(h, config_hash(c));
  EXPECT_EQ(hash_hex(0xabcull), "0000000000000abc");
}

TEST(Describe, NonlinearDefaultPredictsCellUpdates) {
  const std::string d = describe(find_preset("nonlinear").config);
  EXPECT_NE(d.find("predicted cell updates per replication 536870912"), std::string::npos) << d;
  EXPECT_NE(d.find("steps 1048576"), std::string::npos);
}

TEST(Describe, Prop2ReportsPartition) {
  const std::string d = describe(find_preset("prop2").config);
  EXPECT_NE(d.find("time grid [1, 2], 4096 pieces"), std::string::npos) << d;
  EXPECT_NE(d.find("replications 500"), std::string::npos);
}

TEST(Describe, ReportsSnappedTrace) {
  ExperimentConfig c = find_preset("thm2").config;
  c.position = 0.3;
  const std::string d = describe(c);
  EXPECT_NE(d.find("snapped to node 307"), std::string::npos) << d;
  EXPECT_NE(d.find("distance 0.0001"), std::string::npos) << d;
}

TEST(Run, OracleCheckAgrees) {
  ExperimentConfig c = find_preset("oracle-check").config;
  c.oracle_points = 6;
  const RunResult r = run_experiment(c);
  EXPECT_TRUE(r.criteria_met);
  const std::string& csv = r.artifacts.front().contents;
  EXPECT_EQ(csv.rfind("# config_hash=" + hash_hex(config_hash(c)), 0), 0u);
  EXPECT_NE(csv.find("s,t,x,y,closed_form,quadrature,abs_diff,rel_diff\n"), std::string::npos);
}

TEST(Run, OutputsIndependentOfThreads) {
  ExperimentConfig c = find_preset("prop2").config;
  c.ns = {16, 64};
  c.replications = 12;
  const RunResult a = run_experiment(c, 1);
  const RunResult b = run_experiment(c, 4);
  ASSERT_EQ(a.artifacts.size(), b.artifacts.size());
  for (std::size_t i = 0; i < a.artifacts.size(); ++i) EXPECT_EQ(a.artifacts[i].contents, b.artifacts[i].contents);

  const ExperimentConfig n = small_nonlinear();
  const RunResult x = run_experiment(n, 1);
  const RunResult y = run_experiment(n, 3);
  for (std::size_t i = 0; i < x.artifacts.size(); ++i) EXPECT_EQ(x.artifacts[i].contents, y.artifacts[i].contents);
}

TEST(Run, NonlinearExportsPaths) {
  ExperimentConfig c = small_nonlinear();
  c.axis = "both";
  c.t1 = 0.03125;
  c.t2 = 0.0625;
  c.n = 16;
  c.replications = 1;
  c.export_paths = true;
  const RunResult r = run_experiment(c);
  std::vector<std::string> names;
  for (const auto& a : r.artifacts) names.push_back(a.filename);
  EXPECT_NE(std::find(names.begin(), names.end(), "snapshot_r0.csv"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "trace_r0.csv"), names.end());
  for (const auto& a : r.artifacts) {
    if (a.filename == "snapshot_r0.csv") {
      EXPECT_NE(a.contents.find("\nindex,coordinate,value\n0,0,"), std::string::npos);
      EXPECT_NE(a.contents.find("\n63,0.984375,"), std::string::npos);
    }
  }
}

TEST(Run, EstimateAndRateStudy) {
  ExperimentConfig c = find_preset("estimate").config;
  c.estimator_ns = {256};
  c.replications = 10;
  const RunResult r = run_experiment(c);
  EXPECT_NE(r.summary.find("temporal estimator"), std::string::npos);
  EXPECT_NE(r.summary.find("spatial estimator"), std::string::npos);
  c = find_preset("rate-study").config;
  c.estimator_ns = {16, 64};
  c.replications = 10;
  const RunResult s = run_experiment(c);
  EXPECT_EQ(s.artifacts.front().filename, "rate_study.csv");
  EXPECT_NE(s.summary.find("reference -0.15"), std::string::npos);
}

TEST(Artifacts, WrittenWithManifestAndNoTemporaries) {
  ExperimentConfig c = find_preset("oracle-check").config;
  c.oracle_points = 3;
  const RunResult r = run_experiment(c);
  const fs::path dir = scratch("artifacts");
  write_artifacts(dir, c, r);
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    EXPECT_NE(e.path().filename().string().front(), '.');
    ++count;
  }
  EXPECT_EQ(count, r.artifacts.size() + 1);
  const std::string manifest = slurp(dir / "manifest.txt");
  for (const auto& a : r.artifacts) EXPECT_NE(manifest.find("file " + a.filename), std::string::npos);
  EXPECT_NE(manifest.find("config_hash " + hash_hex(config_hash(c))), std::string::npos);
  EXPECT_EQ(parse_config(slurp(dir / "config.ini")), c);
  fs::remove_all(dir);
}

TEST(Errors, JsonRecord) {
  const auto j = nlohmann::json::parse(error_record(ConfigError("dt", "too large", "<= 1e-6")));
  EXPECT_EQ(j["kind"], "validation");
  EXPECT_EQ(j["field"], "dt");
  EXPECT_EQ(j["bound"], "<= 1e-6");
  const auto k = nlohmann::json::parse(error_record(BlowUpError(12, 0.5)));
  EXPECT_EQ(k["kind"], "numerical");
  EXPECT_EQ(k["step"], 12);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  EXPECT_EQ(run_cli("presets"), 0);
  EXPECT_EQ(run_cli("describe --preset thm2"), 0);

  ExperimentConfig bad = find_preset("thm1").config;
  bad.dt = 1e-3;
  std::ofstream(dir / "bad.ini") << to_ini(bad);
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.ini").string() + " --out " + (dir / "out").string()), 2);
  EXPECT_FALSE(fs::exists(dir / "out"));

  // sigma = 1 + 1e6 x multiplies the noise until the field overflows
  ExperimentConfig boom = small_nonlinear();
  boom.sigma = "affine";
  boom.sigma_p = 1.0;
  boom.sigma_q = 1e6;
  boom.replications = 1;
  std::ofstream(dir / "boom.ini") << to_ini(boom);
  EXPECT_EQ(run_cli("run --config " + (dir / "boom.ini").string() + " --out " + (dir / "out").string()), 3);
  EXPECT_FALSE(fs::exists(dir / "out"));

  ExperimentConfig ok = find_preset("oracle-check").config;
  ok.oracle_points = 3;
  std::ofstream(dir / "ok.ini") << to_ini(ok);
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.ini").string() + " --seed 5 --out " + (dir / "ok").string()), 0);
  EXPECT_EQ(parse_config(slurp(dir / "ok" / "config.ini")).seed, 5u);
  fs::remove_all(dir);
}

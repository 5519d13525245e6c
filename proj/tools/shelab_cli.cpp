#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "shelab/errors.hpp"
#include "shelab/harness.hpp"
#include "shelab/simd/kernels.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications;
};

shelab::ExperimentConfig resolve(const Overrides& o) {
  shelab::ExperimentConfig c = o.preset.empty() ? shelab::load_config(o.config) : shelab::find_preset(o.preset).config;
  if (o.seed) c.seed = *o.seed;
  if (o.replications) c.replications = *o.replications;
  return c;
}

int report(const std::exception& e, int code) {
  std::cerr << shelab::error_record(e) << "\n";
  return code;
}

void add_source_options(CLI::App* cmd, Overrides& o) {
  auto* cfg = cmd->add_option("--config", o.config, "experiment config file (INI)");
  auto* pre = cmd->add_option("--preset", o.preset, "built-in preset instead of a config file");
  cfg->excludes(pre);
  pre->excludes(cfg);
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--replications", o.replications, "override the replication count")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic heat equation laboratory"};
  app.require_subcommand(1);

  Overrides run_opts;
  unsigned threads = 0;
  std::string out = "out";
  auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  add_source_options(run, run_opts);
  run->add_option("--threads", threads, "worker threads (0 = all cores)");
  run->add_option("--out", out, "output directory")->capture_default_str();

  Overrides describe_opts;
  auto* describe = app.add_subcommand("describe", "print the resolved plan of an experiment");
  add_source_options(describe, describe_opts);

  std::string preset_name;
  auto* list = app.add_subcommand("presets", "list presets, or print one as a config file");
  list->add_option("name", preset_name, "preset to print");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      if (preset_name.empty()) {
        for (const auto& p : shelab::presets()) std::cout << p.name << "\t" << p.description << "\n";
      } else {
        std::cout << shelab::to_ini(shelab::find_preset(preset_name).config);
      }
      return shelab::kExitOk;
    }
    if (*describe) {
      if (describe_opts.config.empty() && describe_opts.preset.empty())
        throw shelab::ConfigError("config", "give --config or --preset");
      std::cout << shelab::describe(resolve(describe_opts));
      return shelab::kExitOk;
    }
    if (run_opts.config.empty() && run_opts.preset.empty())
      throw shelab::ConfigError("config", "give --config or --preset");
    const shelab::ExperimentConfig c = resolve(run_opts);
    std::cerr << "simd: " << shelab::simd::to_string(shelab::simd::active().isa) << "\n";
    const shelab::RunResult r = shelab::run_experiment(c, threads);
    shelab::write_artifacts(out, c, r);
    std::cout << r.summary;
    return shelab::kExitOk;
  } catch (const shelab::ConfigError& e) {
    return report(e, shelab::kExitValidation);
  } catch (const shelab::DomainError& e) {
    return report(e, shelab::kExitValidation);
  } catch (const shelab::NumericalError& e) {
    return report(e, shelab::kExitNumerical);
  } catch (const std::exception& e) {
    return report(e, 1);
  }
}

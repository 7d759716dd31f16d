#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ladi/numcore/checkpoint.hpp"
#include "ladi/xcli/config.hpp"
#include "ladi/xcli/runner.hpp"

namespace {

using ladi::xcli::ExperimentConfig;

struct ConfigFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::vector<std::string> stages;
  std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool with_stages) {
  cmd->add_option("-c,--config", f.config, "JSON config file (defaults when omitted)");
  cmd->add_option("--seed", f.seed, "Override the seed");
  cmd->add_option("-o,--output-dir", f.output_dir,
                  "Output directory (beats LADI_OUTPUT_DIR and the config)");
  if (with_stages) {
    cmd->add_option("--stages", f.stages, "Stages to run, e.g. sft,rl")->delimiter(',');
  }
  cmd->add_option("--set", f.sets, "Override a config key: section.key=value");
}

// config file < LADI_OUTPUT_DIR (output dir only) < --set < dedicated flags
ExperimentConfig resolve(const ConfigFlags& f) {
  auto cfg = f.config.empty() ? ExperimentConfig::defaults() : ladi::xcli::load_config(f.config);
  if (const char* env = std::getenv("LADI_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  for (const auto& s : f.sets) ladi::xcli::apply_override(cfg, s);
  if (!f.output_dir.empty()) cfg.output_dir = f.output_dir;
  if (f.seed) cfg.seed = *f.seed;
  if (!f.stages.empty()) cfg.stages = f.stages;
  cfg.validate();
  return cfg;
}

int report(const ladi::xcli::RunReport& r) {
  for (const auto& s : r.stages) {
    std::cout << s.stage << ": " << (s.ok ? "ok" : "FAILED (" + s.error + ")") << "\n";
  }
  std::cout << "artifacts: " << r.dir.string() << "\n";
  return r.status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent diffusion reasoning experiments"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "Run the configured stages");
  add_config_flags(run, run_flags, true);

  ConfigFlags eval_flags;
  std::string eval_ckpt;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_config_flags(eval, eval_flags, false);
  eval->add_option("checkpoint", eval_ckpt, "Checkpoint file")->required();

  std::string run_dir, export_dir;
  auto* exp = app.add_subcommand("export", "Write plot-ready CSV tables from a run directory");
  exp->add_option("run_dir", run_dir, "Run directory")->required();
  exp->add_option("-o,--out", export_dir, "Destination (default <run_dir>/plots)");

  std::string ckpt_path;
  auto* inspect_ckpt = app.add_subcommand("inspect-checkpoint", "Print a checkpoint header");
  inspect_ckpt->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();

  ConfigFlags show_flags;
  auto* inspect_cfg = app.add_subcommand("inspect-config", "Print the resolved config");
  add_config_flags(inspect_cfg, show_flags, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return report(ladi::xcli::run(resolve(run_flags), &std::cerr));
    }
    if (*eval) {
      auto cfg = resolve(eval_flags);
      cfg.stages = {"eval"};
      cfg.eval.checkpoint = eval_ckpt;
      return report(ladi::xcli::run(cfg, &std::cerr));
    }
    if (*exp) {
      const auto out = export_dir.empty() ? std::filesystem::path(run_dir) / "plots"
                                          : std::filesystem::path(export_dir);
      for (const auto& f : ladi::xcli::export_plot_data(run_dir, out)) std::cout << f.string() << "\n";
      return 0;
    }
    if (*inspect_ckpt) {
      std::cout << ladi::numcore::read_checkpoint_header(ckpt_path).dump(2) << "\n";
      return 0;
    }
    if (*inspect_cfg) {
      std::cout << ladi::xcli::to_json(resolve(show_flags)).dump(2) << "\n";
      return 0;
    }
  } catch (const ladi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ladi::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

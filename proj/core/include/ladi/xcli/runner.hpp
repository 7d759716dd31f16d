#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ladi/numcore/checkpoint.hpp"
#include "ladi/rl/trainer.hpp"
#include "ladi/xcli/config.hpp"

namespace ladi::xcli {

// "<semver>+<git revision>", embedded in every run directory.
std::string version_id();

struct StageOutcome {
  std::string stage;
  bool ok = false;
  std::string error;
};

struct RunReport {
  int status = 0;  // 0 on success, 1 when a stage failed
  std::filesystem::path dir;
  std::vector<StageOutcome> stages;
};

// Validates the config (throwing ConfigError before touching the disk), then
// runs the listed stages in order. Each stage writes checkpoint.bin,
// metrics.jsonl and summary.json under <output_dir>/<stage>/. A failing stage
// keeps what it wrote, records error.txt and stops the pipeline.
RunReport run(const ExperimentConfig& config, std::ostream* log = nullptr);

// Checkpoint entry names.
inline constexpr const char* kVelocityEntry = "velocity";
inline constexpr const char* kTextEntry = "text";
inline constexpr const char* kVaeEntry = "vae";
inline constexpr const char* kArEntry = "ar";

reasoner::LadiParams ladi_params_from(const numcore::Checkpoint& ckpt,
                                      const reasoner::LadiModel& model);

// Plot data -----------------------------------------------------------------

// One StepMetrics per non-empty line. A record missing a field raises
// DataError naming the field and the line.
std::vector<rl::StepMetrics> read_metrics_log(const std::filesystem::path& path);

// "step,mean_reward,reward_std,entropy" rows; header only for an empty log.
std::string series_csv(std::span<const rl::StepMetrics> log);

// "k,pass_at_k" rows from per-question correct counts, averaged over
// questions. Default ks: powers of two up to the sample count, plus n.
std::string pass_at_k_csv(const rl::EvalResult& result, std::vector<int> ks = {});

// Writes <policy>_series.csv for the rl and rl-baseline logs and
// <stage>_<policy>_passk.csv for every evaluation found in the run directory.
// Returns the files written.
std::vector<std::filesystem::path> export_plot_data(const std::filesystem::path& run_dir,
                                                    const std::filesystem::path& out_dir);

}  // namespace ladi::xcli

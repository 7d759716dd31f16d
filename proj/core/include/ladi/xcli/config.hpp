#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ladi/arbaseline/ar.hpp"
#include "ladi/envs/envs.hpp"
#include "ladi/flowlat/sampler.hpp"
#include "ladi/guidance/repulsion.hpp"
#include "ladi/reasoner/model.hpp"
#include "ladi/reasoner/sft.hpp"
#include "ladi/rl/grpo.hpp"
#include "ladi/rl/trainer.hpp"
#include "ladi/textpol/policy.hpp"

namespace ladi::xcli {

inline const std::vector<std::string>& known_stages() {
  static const std::vector<std::string> s = {"sft", "rl", "rl-baseline", "eval"};
  return s;
}

struct SftSection {
  reasoner::SftConfig ladi;
  int ar_epochs = 300;
  int corpus_per_target = 5;
  std::optional<std::string> corpus_path;
  int mixture_samples = 2000;   // flow training points for the mixture task
  double mixture_spread = 0.1;

  bool operator==(const SftSection&) const = default;
};

struct RlSection {
  rl::GrpoConfig grpo;
  double lr = 3e-3;
  int steps = 300;
  int questions_per_step = 4;

  bool operator==(const RlSection&) const = default;
};

struct BaselineSection {
  int group = 80;
  double eps = 0.2;
  double lr = 3e-3;
  int steps = 300;
  int questions_per_step = 4;
  bool per_token_mean = false;

  bool operator==(const BaselineSection&) const = default;
};

struct EvalSection {
  int samples = 200;
  std::vector<int> ks = {1, 16};
  double coverage_radius = 0.3;
  std::optional<std::string> checkpoint;

  bool operator==(const EvalSection&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  envs::EnvSpec env;
  reasoner::ModelShape model;
  std::size_t ar_hidden = 64;
  flowlat::SamplerConfig train_sampler;
  flowlat::SamplerConfig eval_sampler = rl::default_eval_config().sampler;
  guidance::GuidanceConfig guidance;
  textpol::SamplingConfig sampling;
  SftSection sft;
  RlSection rl;
  BaselineSection baseline;
  EvalSection eval;
  std::vector<std::string> stages = {"sft", "rl", "rl-baseline", "eval"};

  static ExperimentConfig defaults();
  void validate() const;

  rl::RlConfig rl_config() const;
  arbaseline::ArConfig ar_config() const;
  rl::EvalConfig eval_config() const;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Rejects unknown keys at every level; missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& c);

// Applies "section.key=value" (value parsed as JSON, falling back to a string).
void apply_override(ExperimentConfig& c, const std::string& assignment);

}  // namespace ladi::xcli

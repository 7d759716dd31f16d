#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ladi/envs/envs.hpp"
#include "ladi/numcore/optim.hpp"
#include "ladi/reasoner/model.hpp"
#include "ladi/rl/grpo.hpp"

namespace ladi::rl {

// One line of the metrics log.
struct StepMetrics {
  std::string policy = "ladi";
  int step = 0;
  double mean_reward = 0.0;
  double reward_std = 0.0;  // mean over questions of the within-group std
  double latent_loss = 0.0;
  double text_loss = 0.0;
  double text_entropy = 0.0;
  double clip_frac_latent = 0.0;
  double clip_frac_text = 0.0;
  bool skipped = false;

  nlohmann::json to_json() const;
  static StepMetrics from_json(const nlohmann::json& j);
  bool operator==(const StepMetrics&) const = default;
};

inline const std::vector<std::string>& metric_fields() {
  static const std::vector<std::string> f = {
      "policy", "step", "mean_reward", "reward_std", "latent_loss", "text_loss",
      "text_entropy", "clip_frac_latent", "clip_frac_text", "skipped"};
  return f;
}

struct RlConfig {
  RolloutSettings rollout;
  numcore::AdamWConfig optim{1e-3, 0.9, 0.999, 0.0, 1e-8};
  int questions_per_step = 2;

  void validate() const;
};

class LadiTrainer {
 public:
  LadiTrainer(reasoner::LadiModel model, reasoner::LadiParams params, envs::EnvSpec env,
              RlConfig config, std::uint64_t seed);

  // Rollouts for the given questions, then one (or `epochs`) joint updates.
  StepMetrics train_step(std::span<const envs::Condition> batch);
  // Draws questions_per_step questions uniformly from the environment.
  StepMetrics train_step();

  const reasoner::LadiModel& model() const { return model_; }
  const reasoner::LadiParams& params() const { return params_; }
  reasoner::LadiParams& params() { return params_; }
  const numcore::AdamState& velocity_state() const { return adam_velocity_; }
  const numcore::AdamState& text_state() const { return adam_text_; }
  void set_optimizer_state(numcore::AdamState velocity, numcore::AdamState text);
  const RlConfig& config() const { return config_; }
  int step() const { return step_; }
  Rng& rng() { return rng_; }

 private:
  reasoner::LadiModel model_;
  reasoner::LadiParams params_;
  envs::EnvSpec env_;
  RlConfig config_;
  std::vector<double> reference_;
  numcore::AdamState adam_velocity_;
  numcore::AdamState adam_text_;
  Rng rng_;
  int step_ = 0;
};

struct EvalConfig {
  int samples = 200;
  std::vector<int> ks = {1, 16};
  flowlat::SamplerConfig sampler;
  textpol::SamplingConfig sampling;
  double coverage_radius = 0.3;

  void validate() const;
};

// Default evaluation sampler: deterministic 30-step ODE.
EvalConfig default_eval_config();

struct EvalResult {
  double mean_reward = 0.0;
  std::map<int, double> pass_at;  // mean over questions
  double mode_coverage = 0.0;     // mean over questions
  double entropy = 0.0;           // mean per-token entropy (modsum)
  int samples = 0;                // draws per question
  std::vector<int> correct;       // exact-reward hits per question

  nlohmann::json to_json() const;
  static EvalResult from_json(const nlohmann::json& j);
};

// One generated answer or latent point with its reward.
struct EvalSample {
  double reward = 0.0;
  std::vector<int> tokens;
  std::vector<double> point;
  std::vector<double> entropies;
};
using SampleFn = std::function<EvalSample(const envs::Condition&, Rng&)>;

// Draws `samples` outputs for every question of the environment. A sample
// counts as correct when its reward is exactly 1.
EvalResult evaluate(const envs::EnvSpec& env, const SampleFn& sample,
                    const EvalConfig& config, Rng& rng);

EvalResult evaluate_ladi(const reasoner::LadiModel& model, const reasoner::LadiParams& params,
                         const envs::EnvSpec& env, const EvalConfig& config, Rng& rng);

}  // namespace ladi::rl

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ladi/envs/envs.hpp"
#include "ladi/numcore/optim.hpp"
#include "ladi/reasoner/model.hpp"
#include "ladi/rl/grpo.hpp"
#include "ladi/rl/trainer.hpp"
#include "ladi/textpol/policy.hpp"

namespace ladi::arbaseline {

// Question-only answer policy: the text policy with no latent input.
textpol::TextPolicy make_ar_policy(std::size_t question_size, std::size_t max_len,
                                   std::size_t hidden);

struct ArConfig {
  int group = 80;  // G, matched to N * M
  double eps = 0.2;
  double eps_std = 1e-8;
  bool per_token_mean = false;
  int epochs = 1;
  int questions_per_step = 2;
  textpol::SamplingConfig sampling;
  numcore::AdamWConfig optim{1e-3, 0.9, 0.999, 0.0, 1e-8};

  void validate() const;
};

struct ArGroup {
  envs::Condition question;
  std::vector<textpol::AnswerSample> samples;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

ArGroup ar_rollout(const textpol::TextPolicy& policy, std::span<const double> params,
                   const envs::Condition& question, const envs::EnvSpec& env, int group,
                   const textpol::SamplingConfig& sampling, Rng& rng, double eps_std = 1e-8);

// Mean over groups of -(1/G) sum_g clipped token surrogate.
ad::Var ar_grpo_loss(std::span<const ArGroup> groups, const textpol::TextPolicy& policy,
                     ad::Var params, double eps, bool per_token_mean = false,
                     rl::ClipStats* stats = nullptr);
double ar_grpo_loss(std::span<const ArGroup> groups, const textpol::TextPolicy& policy,
                    std::span<const double> params, double eps, bool per_token_mean = false);

class ArTrainer {
 public:
  ArTrainer(textpol::TextPolicy policy, numcore::ParamVector params, envs::EnvSpec env,
            ArConfig config, std::uint64_t seed);

  rl::StepMetrics train_step(std::span<const envs::Condition> batch);
  rl::StepMetrics train_step();

  const textpol::TextPolicy& policy() const { return policy_; }
  const numcore::ParamVector& params() const { return params_; }
  numcore::ParamVector& params() { return params_; }
  const numcore::AdamState& state() const { return adam_; }
  void set_optimizer_state(numcore::AdamState s);
  int step() const { return step_; }

 private:
  textpol::TextPolicy policy_;
  numcore::ParamVector params_;
  envs::EnvSpec env_;
  ArConfig config_;
  numcore::AdamState adam_;
  Rng rng_;
  int step_ = 0;
};

// Ordered text_entropy values of a metrics log.
std::vector<double> entropy_series(std::span<const rl::StepMetrics> log);

// Mean per-token answer NLL given the question only.
ad::Var ar_ce_loss(const textpol::TextPolicy& policy, ad::Var params,
                   std::span<const reasoner::TraceExample> batch);

struct ArSftConfig {
  int epochs = 150;
  int batch = 16;
  numcore::AdamWConfig optim{3e-3, 0.9, 0.999, 0.0, 1e-8};
};

// Per-epoch mean cross-entropy.
std::vector<double> train_ar_sft(const textpol::TextPolicy& policy, numcore::ParamVector& params,
                                 numcore::AdamState& state,
                                 std::span<const reasoner::TraceExample> corpus,
                                 const ArSftConfig& config, Rng& rng);

rl::EvalResult evaluate_ar(const textpol::TextPolicy& policy, std::span<const double> params,
                           const envs::EnvSpec& env, const rl::EvalConfig& config, Rng& rng);

}  // namespace ladi::arbaseline

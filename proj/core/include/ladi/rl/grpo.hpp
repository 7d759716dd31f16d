#pragma once

#include <span>
#include <vector>

#include "ladi/common.hpp"
#include "ladi/envs/envs.hpp"
#include "ladi/flowlat/sampler.hpp"
#include "ladi/guidance/repulsion.hpp"
#include "ladi/numcore/autodiff.hpp"
#include "ladi/reasoner/model.hpp"
#include "ladi/textpol/policy.hpp"

namespace ladi::rl {

struct GrpoConfig {
  int n = 16;                     // latent trajectories per question
  int m = 5;                      // answers per trajectory
  double eps_z = 1e-5;            // latent clip range
  double eps_text_low = 0.2;
  double eps_text_high = 0.28;
  double w_lat = 10.0;
  double w_text = 1.0;
  double beta_kl = 0.0;           // 0 disables the KL term
  double eps_std = 1e-8;
  bool per_token_mean = false;    // divide each answer's token sum by its length
  int epochs = 1;                 // optimisation passes per rollout batch
  bool allow_degenerate = false;  // test hook: permit N = 1

  void validate() const;
  double alpha() const { return w_lat / (w_lat + w_text); }
  bool operator==(const GrpoConfig&) const = default;
};

// (R - mean) / max(std, eps_std) with the population std; exactly zero when
// every reward is equal.
std::vector<double> group_advantages(std::span<const double> rewards,
                                     double eps_std = 1e-8);

// Group advantages over the row means of an N x M reward matrix.
std::vector<double> latent_advantages(const std::vector<std::vector<double>>& rewards,
                                      double eps_std = 1e-8);

// Each row standardised on its own.
std::vector<std::vector<double>> text_local_advantages(
    const std::vector<std::vector<double>>& rewards, double eps_std = 1e-8);

double clipped_surrogate(double ratio, double advantage, double eps_low, double eps_high);

double joint_loss(double latent, double text, double w_lat, double w_text);
ad::Var joint_loss(ad::Var latent, ad::Var text, double w_lat, double w_text);

struct RolloutGroup {
  envs::Condition question;
  std::vector<flowlat::DenoisingTrajectory> trajectories;
  std::vector<std::vector<textpol::AnswerSample>> answers;  // N x M; empty for mixture
  std::vector<std::vector<double>> rewards;                 // N x M (N x 1 for mixture)
  std::vector<double> mean_rewards;
  std::vector<double> latent_adv;
  std::vector<std::vector<double>> text_adv;
  bool latent_skipped = false;

  bool has_text() const { return !answers.empty(); }
};

struct ClipStats {
  std::size_t terms = 0;
  std::size_t clipped = 0;

  double fraction() const { return terms == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(terms); }
};

// -(1/N) sum_n sum_{stochastic t} min(r A_n, clip(r, 1 - eps_z, 1 + eps_z) A_n)
// plus beta * KL to the reference field when beta > 0.
ad::Var latent_policy_loss(const RolloutGroup& group, const flowlat::VelocityNet& net,
                           ad::Var params, const GrpoConfig& config,
                           std::span<const double> ref_params = {},
                           ClipStats* stats = nullptr);
double latent_policy_loss(const RolloutGroup& group, const flowlat::VelocityNet& net,
                          std::span<const double> params, const GrpoConfig& config,
                          std::span<const double> ref_params = {});

// Clipped token surrogate summed over one answer (or averaged when
// per_token_mean). Shared by the latent-conditioned and question-only policies.
ad::Var answer_surrogate(const textpol::TextPolicy& policy, ad::Var params,
                         const textpol::AnswerSample& sample,
                         std::span<const double> question, std::span<const double> latent,
                         double advantage, double eps_low, double eps_high,
                         bool per_token_mean, ClipStats* stats = nullptr);

// -(1/(NM)) sum_{n,m} answer_surrogate.
ad::Var text_policy_loss(const RolloutGroup& group, const textpol::TextPolicy& policy,
                         ad::Var params, const GrpoConfig& config,
                         ClipStats* stats = nullptr);
double text_policy_loss(const RolloutGroup& group, const textpol::TextPolicy& policy,
                        std::span<const double> params, const GrpoConfig& config);

// Current-over-old importance ratios of every stochastic latent step and
// every answer token, for diagnostics.
std::vector<double> latent_ratios(const RolloutGroup& group, const flowlat::VelocityNet& net,
                                  std::span<const double> params);
std::vector<double> text_ratios(const RolloutGroup& group, const textpol::TextPolicy& policy,
                                std::span<const double> params);

struct RolloutSettings {
  flowlat::SamplerConfig sampler;
  guidance::GuidanceConfig guidance;
  textpol::SamplingConfig sampling;
  GrpoConfig grpo;
};

// N trajectories sampled as one guided group, then M answers per trajectory
// (modsum) or a reward on the final latent (mixture).
RolloutGroup collect_rollouts(const envs::Condition& question, const reasoner::LadiModel& model,
                              const reasoner::LadiParams& params, const envs::EnvSpec& env,
                              const RolloutSettings& settings, Rng& rng);

// Population std of all rewards in the group.
double reward_std(const RolloutGroup& group);

}  // namespace ladi::rl

#include "ladi/rl/grpo.hpp"

#include <cmath>

#include "ladi/flowlat/kernels.hpp"
#include "ladi/numcore/kernels.hpp"

namespace ladi::rl {

void GrpoConfig::validate() const {
  if (n < (allow_degenerate ? 1 : 2)) throw ConfigError("GRPO needs N >= 2");
  if (m < 1) throw ConfigError("GRPO needs M >= 1");
  if (!(eps_z > 0.0) || !(eps_text_low > 0.0) || !(eps_text_high > 0.0)) {
    throw ConfigError("clip ranges must be positive");
  }
  if (eps_text_low >= 1.0) throw ConfigError("lower text clip must be < 1");
  if (!(w_lat >= 0.0) || !(w_text >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (!(beta_kl >= 0.0)) throw ConfigError("KL coefficient must be >= 0");
  if (!(eps_std > 0.0)) throw ConfigError("std floor must be > 0");
  if (epochs < 1) throw ConfigError("GRPO epochs must be >= 1");
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps_std) {
  if (rewards.size() < 2) throw ConfigError("group advantages need at least two rewards");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  bool constant = true;
  double var = 0.0;
  for (double r : rewards) {
    constant = constant && r == rewards[0];
    var += (r - mean) * (r - mean);
  }
  std::vector<double> out(rewards.size(), 0.0);
  if (constant) return out;
  const double sd = std::max(std::sqrt(var / static_cast<double>(rewards.size())), eps_std);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

std::vector<double> latent_advantages(const std::vector<std::vector<double>>& rewards,
                                      double eps_std) {
  std::vector<double> means;
  for (const auto& row : rewards) {
    if (row.empty()) throw ConfigError("reward row is empty");
    double s = 0.0;
    for (double r : row) s += r;
    means.push_back(s / static_cast<double>(row.size()));
  }
  return group_advantages(means, eps_std);
}

std::vector<std::vector<double>> text_local_advantages(
    const std::vector<std::vector<double>>& rewards, double eps_std) {
  std::vector<std::vector<double>> out;
  for (const auto& row : rewards) out.push_back(group_advantages(row, eps_std));
  return out;
}

double clipped_surrogate(double ratio, double advantage, double eps_low, double eps_high) {
  if (!(ratio > 0.0)) throw DomainError("importance ratio must be positive");
  return numcore::clipped_surrogate(ratio, advantage, eps_low, eps_high);
}

double joint_loss(double latent, double text, double w_lat, double w_text) {
  if (!(w_lat >= 0.0) || !(w_text >= 0.0)) throw ConfigError("loss weights must be >= 0");
  return w_lat * latent + w_text * text;
}

ad::Var joint_loss(ad::Var latent, ad::Var text, double w_lat, double w_text) {
  if (!(w_lat >= 0.0) || !(w_text >= 0.0)) throw ConfigError("loss weights must be >= 0");
  return ad::add(ad::scale(latent, w_lat), ad::scale(text, w_text));
}

namespace {

bool is_clipped(double ratio, double advantage, double lo, double hi) {
  const double r = numcore::clip(ratio, 1.0 - lo, 1.0 + hi);
  return r != ratio && r * advantage < ratio * advantage;
}

void check_group(const RolloutGroup& g) {
  if (g.trajectories.empty()) throw DataError("rollout group has no trajectories");
  if (!g.latent_skipped && g.latent_adv.size() != g.trajectories.size()) {
    throw DataError("latent advantages do not match the trajectories");
  }
}

}  // namespace

ad::Var latent_policy_loss(const RolloutGroup& group, const flowlat::VelocityNet& net,
                           ad::Var params, const GrpoConfig& config,
                           std::span<const double> ref_params, ClipStats* stats) {
  check_group(group);
  ad::Tape& tape = *params.tape();
  std::vector<ad::Var> terms;
  const bool kl = config.beta_kl > 0.0;
  if (kl && ref_params.empty()) throw ConfigError("KL term needs reference parameters");
  for (std::size_t n = 0; n < group.trajectories.size(); ++n) {
    const auto& tr = group.trajectories[n];
    const double adv = group.latent_skipped ? 0.0 : group.latent_adv[n];
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
      const auto& st = tr.steps[k];
      if (!st.stochastic) continue;
      if (!st.old_logprob) throw DataError("stochastic step is missing its stored log-prob");
      if (stats) ++stats->terms;
      if (adv == 0.0 && !kl) continue;
      ad::Var v = net.forward(params, st.state, st.t, tr.condition);
      if (adv != 0.0) {
        ad::Var mean = ad::add(flowlat::kernel_mean(st.kernel, st.state, v), tape.constant(st.offset));
        ad::Var logp = flowlat::transition_logprob(tr.next_state(k), mean, st.kernel.std,
                                                   tr.simplified_logprob);
        ad::Var ratio = ad::exp(ad::add_scalar(logp, -*st.old_logprob));
        if (stats && is_clipped(ratio.scalar(), adv, config.eps_z, config.eps_z)) ++stats->clipped;
        terms.push_back(ad::neg(ad::clipped_surrogate(ratio, adv, config.eps_z, config.eps_z)));
      }
      if (kl) {
        const auto v_ref = net(ref_params, st.state, st.t, tr.condition);
        terms.push_back(ad::scale(
            flowlat::kl_term(v, v_ref, st.t, tr.noise_level, st.dt, tr.time_clamp),
            config.beta_kl));
      }
    }
  }
  if (terms.empty()) return ad::scale(ad::sum(params), 0.0);
  return ad::scale(ad::sum_list(terms), 1.0 / static_cast<double>(group.trajectories.size()));
}

double latent_policy_loss(const RolloutGroup& group, const flowlat::VelocityNet& net,
                          std::span<const double> params, const GrpoConfig& config,
                          std::span<const double> ref_params) {
  ad::Tape tape;
  return latent_policy_loss(group, net, tape.constant(params), config, ref_params).scalar();
}

ad::Var answer_surrogate(const textpol::TextPolicy& policy, ad::Var params,
                         const textpol::AnswerSample& sample,
                         std::span<const double> question, std::span<const double> latent,
                         double advantage, double eps_low, double eps_high,
                         bool per_token_mean, ClipStats* stats) {
  if (sample.old_logprobs.size() != sample.tokens.size()) {
    throw DataError("answer is missing stored per-token log-probs");
  }
  if (stats) stats->terms += sample.tokens.size();
  if (advantage == 0.0 || sample.tokens.empty()) return ad::scale(ad::sum(params), 0.0);
  const auto logps = textpol::sequence_logprobs(policy, params, sample.tokens, question, latent);
  std::vector<ad::Var> terms;
  for (std::size_t j = 0; j < logps.size(); ++j) {
    ad::Var ratio = ad::exp(ad::add_scalar(logps[j], -sample.old_logprobs[j]));
    if (stats && is_clipped(ratio.scalar(), advantage, eps_low, eps_high)) ++stats->clipped;
    terms.push_back(ad::clipped_surrogate(ratio, advantage, eps_low, eps_high));
  }
  ad::Var total = ad::sum_list(terms);
  if (per_token_mean) total = ad::scale(total, 1.0 / static_cast<double>(terms.size()));
  return total;
}

ad::Var text_policy_loss(const RolloutGroup& group, const textpol::TextPolicy& policy,
                         ad::Var params, const GrpoConfig& config, ClipStats* stats) {
  check_group(group);
  if (!group.has_text()) return ad::scale(ad::sum(params), 0.0);
  if (group.text_adv.size() != group.answers.size()) {
    throw DataError("text advantages do not match the answers");
  }
  std::vector<ad::Var> terms;
  std::size_t count = 0;
  for (std::size_t n = 0; n < group.answers.size(); ++n) {
    const auto& z = group.trajectories[n].final_latent;
    for (std::size_t m = 0; m < group.answers[n].size(); ++m) {
      ++count;
      const double adv = group.text_adv[n][m];
      if (adv == 0.0) {
        if (stats) stats->terms += group.answers[n][m].tokens.size();
        continue;
      }
      terms.push_back(answer_surrogate(policy, params, group.answers[n][m],
                                       group.question.features, z, adv,
                                       config.eps_text_low, config.eps_text_high,
                                       config.per_token_mean, stats));
    }
  }
  if (terms.empty()) return ad::scale(ad::sum(params), 0.0);
  return ad::scale(ad::sum_list(terms), -1.0 / static_cast<double>(count));
}

double text_policy_loss(const RolloutGroup& group, const textpol::TextPolicy& policy,
                        std::span<const double> params, const GrpoConfig& config) {
  ad::Tape tape;
  return text_policy_loss(group, policy, tape.constant(params), config).scalar();
}

std::vector<double> latent_ratios(const RolloutGroup& group, const flowlat::VelocityNet& net,
                                  std::span<const double> params) {
  std::vector<double> out;
  for (const auto& tr : group.trajectories) {
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
      const auto& st = tr.steps[k];
      if (!st.stochastic) continue;
      if (!st.old_logprob) throw DataError("stochastic step is missing its stored log-prob");
      auto mean = flowlat::kernel_mean(st.kernel, st.state, net(params, st.state, st.t, tr.condition));
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += st.offset[i];
      const double logp = flowlat::transition_logprob(tr.next_state(k), mean, st.kernel.std,
                                                      tr.simplified_logprob);
      out.push_back(std::exp(logp - *st.old_logprob));
    }
  }
  return out;
}

std::vector<double> text_ratios(const RolloutGroup& group, const textpol::TextPolicy& policy,
                                std::span<const double> params) {
  std::vector<double> out;
  for (std::size_t n = 0; n < group.answers.size(); ++n) {
    for (const auto& a : group.answers[n]) {
      const auto lp = textpol::sequence_logprobs(policy, params, a.tokens, group.question.features,
                                                 group.trajectories[n].final_latent);
      for (std::size_t j = 0; j < lp.size(); ++j) out.push_back(std::exp(lp[j] - a.old_logprobs[j]));
    }
  }
  return out;
}

RolloutGroup collect_rollouts(const envs::Condition& question, const reasoner::LadiModel& model,
                              const reasoner::LadiParams& params, const envs::EnvSpec& env,
                              const RolloutSettings& settings, Rng& rng) {
  const auto& cfg = settings.grpo;
  cfg.validate();
  RolloutGroup g;
  g.question = question;
  g.trajectories = flowlat::sample_group(model.velocity, params.velocity.values(),
                                         question.features, model.rows, model.cols,
                                         settings.sampler, &settings.guidance,
                                         static_cast<std::size_t>(cfg.n), rng);
  const bool text = env.kind == envs::TaskKind::kModSum;
  for (const auto& tr : g.trajectories) {
    std::vector<double> row;
    if (text) {
      std::vector<textpol::AnswerSample> answers;
      for (int m = 0; m < cfg.m; ++m) {
        auto a = textpol::sample_answer(model.text, params.text.values(), question.features,
                                        tr.final_latent, settings.sampling, rng);
        try {
          a.reward = envs::answer_reward(a.tokens, question, env.modsum);
        } catch (const Error&) {
          a.reward = 0.0;
        }
        row.push_back(a.reward);
        answers.push_back(std::move(a));
      }
      g.answers.push_back(std::move(answers));
    } else {
      double r = 0.0;
      try {
        r = envs::mixture_reward(tr.final_latent, env.mixture);
      } catch (const Error&) {
        r = 0.0;
      }
      row.push_back(r);
    }
    g.rewards.push_back(std::move(row));
  }
  for (const auto& row : g.rewards) {
    double s = 0.0;
    for (double r : row) s += r;
    g.mean_rewards.push_back(s / static_cast<double>(row.size()));
  }
  if (g.trajectories.size() < 2) {
    g.latent_skipped = true;
    g.latent_adv.assign(g.trajectories.size(), 0.0);
  } else {
    g.latent_adv = latent_advantages(g.rewards, cfg.eps_std);
  }
  if (text) {
    for (const auto& row : g.rewards) {
      g.text_adv.push_back(row.size() < 2 ? std::vector<double>(row.size(), 0.0)
                                          : group_advantages(row, cfg.eps_std));
    }
  }
  return g;
}

double reward_std(const RolloutGroup& group) {
  double s = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (const auto& row : group.rewards) {
    for (double r : row) {
      s += r;
      s2 += r * r;
      ++n;
    }
  }
  if (n == 0) return 0.0;
  const double mean = s / static_cast<double>(n);
  return std::sqrt(std::max(0.0, s2 / static_cast<double>(n) - mean * mean));
}

}  // namespace ladi::rl

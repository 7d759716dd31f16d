#include "ladi/arbaseline/ar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ladi::arbaseline {

textpol::TextPolicy make_ar_policy(std::size_t question_size, std::size_t max_len,
                                   std::size_t hidden) {
  return textpol::TextPolicy({question_size, 0, max_len, hidden});
}

void ArConfig::validate() const {
  if (group < 2) throw ConfigError("AR group size must be >= 2");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("AR clip range must lie in (0, 1)");
  if (!(eps_std > 0.0)) throw ConfigError("std floor must be > 0");
  if (epochs < 1) throw ConfigError("AR epochs must be >= 1");
  if (questions_per_step < 1) throw ConfigError("need at least one question per step");
  sampling.validate();
}

ArGroup ar_rollout(const textpol::TextPolicy& policy, std::span<const double> params,
                   const envs::Condition& question, const envs::EnvSpec& env, int group,
                   const textpol::SamplingConfig& sampling, Rng& rng, double eps_std) {
  if (group < 2) throw ConfigError("AR group size must be >= 2");
  if (env.kind != envs::TaskKind::kModSum) throw ConfigError("the AR baseline needs a text task");
  ArGroup g;
  g.question = question;
  for (int i = 0; i < group; ++i) {
    auto s = textpol::sample_answer(policy, params, question.features, {}, sampling, rng);
    try {
      s.reward = envs::answer_reward(s.tokens, question, env.modsum);
    } catch (const Error&) {
      s.reward = 0.0;
    }
    g.rewards.push_back(s.reward);
    g.samples.push_back(std::move(s));
  }
  g.advantages = rl::group_advantages(g.rewards, eps_std);
  return g;
}

ad::Var ar_grpo_loss(std::span<const ArGroup> groups, const textpol::TextPolicy& policy,
                     ad::Var params, double eps, bool per_token_mean, rl::ClipStats* stats) {
  if (groups.empty()) throw ConfigError("AR loss needs at least one group");
  std::vector<ad::Var> per_group;
  for (const auto& g : groups) {
    if (g.advantages.size() != g.samples.size()) throw DataError("AR advantages do not match the samples");
    std::vector<ad::Var> terms;
    for (std::size_t i = 0; i < g.samples.size(); ++i) {
      if (g.advantages[i] == 0.0) {
        if (stats) stats->terms += g.samples[i].tokens.size();
        continue;
      }
      terms.push_back(rl::answer_surrogate(policy, params, g.samples[i], g.question.features, {},
                                           g.advantages[i], eps, eps, per_token_mean, stats));
    }
    if (terms.empty()) continue;
    per_group.push_back(ad::scale(ad::sum_list(terms), -1.0 / static_cast<double>(g.samples.size())));
  }
  if (per_group.empty()) return ad::scale(ad::sum(params), 0.0);
  return ad::scale(ad::sum_list(per_group), 1.0 / static_cast<double>(groups.size()));
}

double ar_grpo_loss(std::span<const ArGroup> groups, const textpol::TextPolicy& policy,
                    std::span<const double> params, double eps, bool per_token_mean) {
  ad::Tape tape;
  return ar_grpo_loss(groups, policy, tape.constant(params), eps, per_token_mean).scalar();
}

ArTrainer::ArTrainer(textpol::TextPolicy policy, numcore::ParamVector params, envs::EnvSpec env,
                     ArConfig config, std::uint64_t seed)
    : policy_(std::move(policy)),
      params_(std::move(params)),
      env_(std::move(env)),
      config_(std::move(config)),
      adam_(numcore::AdamState::zeros(params_.size())),
      rng_(seed) {
  config_.validate();
  env_.validate();
  if (policy_.shape().latent_size != 0) throw ConfigError("the AR policy takes no latent");
}

void ArTrainer::set_optimizer_state(numcore::AdamState s) {
  if (s.m.size() != params_.size()) throw DataError("optimizer state does not match the parameters");
  adam_ = std::move(s);
}

rl::StepMetrics ArTrainer::train_step() {
  const auto questions = env_.questions();
  std::vector<envs::Condition> batch;
  for (int i = 0; i < config_.questions_per_step; ++i) {
    batch.push_back(questions[static_cast<std::size_t>(
        rng_.integer(0, static_cast<int>(questions.size())))]);
  }
  return train_step(batch);
}

rl::StepMetrics ArTrainer::train_step(std::span<const envs::Condition> batch) {
  if (batch.empty()) throw ConfigError("train_step needs at least one question");
  rl::StepMetrics out;
  out.policy = "ar";
  out.step = step_++;
  std::vector<ArGroup> groups;
  double rewards = 0.0, entropy = 0.0;
  std::size_t count = 0, tokens = 0;
  for (const auto& q : batch) {
    groups.push_back(ar_rollout(policy_, params_.values(), q, env_, config_.group,
                                config_.sampling, rng_, config_.eps_std));
    const auto& g = groups.back();
    double s = 0.0, s2 = 0.0;
    for (const auto& a : g.samples) {
      s += a.reward;
      s2 += a.reward * a.reward;
      for (double h : a.entropies) entropy += h;
      tokens += a.entropies.size();
    }
    const double n = static_cast<double>(g.samples.size());
    out.reward_std += std::sqrt(std::max(0.0, s2 / n - (s / n) * (s / n)));
    rewards += s;
    count += g.samples.size();
  }
  out.mean_reward = rewards / static_cast<double>(count);
  out.reward_std /= static_cast<double>(groups.size());
  out.text_entropy = tokens == 0 ? 0.0 : entropy / static_cast<double>(tokens);
  rl::ClipStats stats;
  try {
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
      ad::Tape tape;
      ad::Var p = tape.parameter(params_.values());
      ad::Var loss = ar_grpo_loss(groups, policy_, p, config_.eps, config_.per_token_mean, &stats);
      tape.backward(loss);
      numcore::adamw_step(params_.values(), tape.grad(p), adam_, config_.optim);
      if (epoch == 0) out.text_loss = loss.scalar();
    }
  } catch (const NumericError&) {
    out.skipped = true;
  }
  out.clip_frac_text = stats.fraction();
  return out;
}

std::vector<double> entropy_series(std::span<const rl::StepMetrics> log) {
  if (log.empty()) throw DataError("metrics log is empty");
  std::vector<double> out;
  out.reserve(log.size());
  for (const auto& m : log) out.push_back(m.text_entropy);
  return out;
}

ad::Var ar_ce_loss(const textpol::TextPolicy& policy, ad::Var params,
                   std::span<const reasoner::TraceExample> batch) {
  if (batch.empty()) throw ConfigError("cross-entropy needs a non-empty batch");
  std::vector<ad::Var> nll;
  for (const auto& ex : batch) {
    const auto lp = textpol::sequence_logprobs(policy, params, ex.answer, ex.question.features, {});
    for (const auto& v : lp) nll.push_back(ad::neg(v));
  }
  return ad::scale(ad::sum_list(nll), 1.0 / static_cast<double>(nll.size()));
}

std::vector<double> train_ar_sft(const textpol::TextPolicy& policy, numcore::ParamVector& params,
                                 numcore::AdamState& state,
                                 std::span<const reasoner::TraceExample> corpus,
                                 const ArSftConfig& config, Rng& rng) {
  if (corpus.empty()) throw DataError("SFT corpus is empty");
  if (config.batch < 1 || config.epochs < 0) throw ConfigError("invalid AR SFT settings");
  if (state.m.size() != params.size()) state = numcore::AdamState::zeros(params.size());
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      std::vector<reasoner::TraceExample> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(corpus[order[i]]);
      ad::Tape tape;
      ad::Var p = tape.parameter(params.values());
      ad::Var loss = ar_ce_loss(policy, p, batch);
      tape.backward(loss);
      numcore::adamw_step(params.values(), tape.grad(p), state, config.optim);
      total += loss.scalar();
      ++batches;
    }
    log.push_back(total / batches);
  }
  return log;
}

rl::EvalResult evaluate_ar(const textpol::TextPolicy& policy, std::span<const double> params,
                           const envs::EnvSpec& env, const rl::EvalConfig& config, Rng& rng) {
  auto fn = [&](const envs::Condition& q, Rng& r) {
    rl::EvalSample s;
    auto a = textpol::sample_answer(policy, params, q.features, {}, config.sampling, r);
    s.reward = envs::answer_reward(a.tokens, q, env.modsum);
    s.tokens = std::move(a.tokens);
    s.entropies = std::move(a.entropies);
    return s;
  };
  return rl::evaluate(env, fn, config, rng);
}

}  // namespace ladi::arbaseline

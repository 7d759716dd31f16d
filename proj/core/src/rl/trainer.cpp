#include "ladi/rl/trainer.hpp"

#include <array>
#include <cmath>

#include "ladi/reasoner/sft.hpp"

namespace ladi::rl {

nlohmann::json StepMetrics::to_json() const {
  return {{"policy", policy},
          {"step", step},
          {"mean_reward", mean_reward},
          {"reward_std", reward_std},
          {"latent_loss", latent_loss},
          {"text_loss", text_loss},
          {"text_entropy", text_entropy},
          {"clip_frac_latent", clip_frac_latent},
          {"clip_frac_text", clip_frac_text},
          {"skipped", skipped}};
}

StepMetrics StepMetrics::from_json(const nlohmann::json& j) {
  for (const auto& f : metric_fields()) {
    if (!j.contains(f)) throw DataError("metrics record is missing field '" + f + "'");
  }
  StepMetrics m;
  m.policy = j.at("policy").get<std::string>();
  m.step = j.at("step").get<int>();
  m.mean_reward = j.at("mean_reward").get<double>();
  m.reward_std = j.at("reward_std").get<double>();
  m.latent_loss = j.at("latent_loss").get<double>();
  m.text_loss = j.at("text_loss").get<double>();
  m.text_entropy = j.at("text_entropy").get<double>();
  m.clip_frac_latent = j.at("clip_frac_latent").get<double>();
  m.clip_frac_text = j.at("clip_frac_text").get<double>();
  m.skipped = j.at("skipped").get<bool>();
  return m;
}

void RlConfig::validate() const {
  rollout.grpo.validate();
  rollout.sampler.validate();
  rollout.guidance.validate();
  rollout.sampling.validate();
  if (questions_per_step < 1) throw ConfigError("need at least one question per step");
  if (!(optim.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
}

LadiTrainer::LadiTrainer(reasoner::LadiModel model, reasoner::LadiParams params,
                         envs::EnvSpec env, RlConfig config, std::uint64_t seed)
    : model_(std::move(model)),
      params_(std::move(params)),
      env_(std::move(env)),
      config_(std::move(config)),
      adam_velocity_(numcore::AdamState::zeros(params_.velocity.size())),
      adam_text_(numcore::AdamState::zeros(params_.text.size())),
      rng_(seed) {
  config_.validate();
  env_.validate();
  if (config_.rollout.grpo.beta_kl > 0.0) reference_ = params_.velocity.values();
}

void LadiTrainer::set_optimizer_state(numcore::AdamState velocity, numcore::AdamState text) {
  if (velocity.m.size() != params_.velocity.size() || text.m.size() != params_.text.size()) {
    throw DataError("optimizer state does not match the parameters");
  }
  adam_velocity_ = std::move(velocity);
  adam_text_ = std::move(text);
}

StepMetrics LadiTrainer::train_step() {
  const auto questions = env_.questions();
  std::vector<envs::Condition> batch;
  for (int i = 0; i < config_.questions_per_step; ++i) {
    batch.push_back(questions[static_cast<std::size_t>(
        rng_.integer(0, static_cast<int>(questions.size())))]);
  }
  return train_step(batch);
}

namespace {

bool finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

StepMetrics LadiTrainer::train_step(std::span<const envs::Condition> batch) {
  if (batch.empty()) throw ConfigError("train_step needs at least one question");
  StepMetrics out;
  out.policy = "ladi";
  out.step = step_++;

  std::vector<RolloutGroup> groups;
  std::size_t answers = 0, tokens = 0;
  double entropy = 0.0, rewards = 0.0;
  for (const auto& q : batch) {
    groups.push_back(collect_rollouts(q, model_, params_, env_, config_.rollout, rng_));
    const auto& g = groups.back();
    out.reward_std += reward_std(g);
    for (const auto& row : g.rewards) {
      for (double r : row) rewards += r;
      answers += row.size();
    }
    for (const auto& row : g.answers) {
      for (const auto& a : row) {
        for (double h : a.entropies) entropy += h;
        tokens += a.entropies.size();
      }
    }
  }
  out.mean_reward = rewards / static_cast<double>(answers);
  out.reward_std /= static_cast<double>(groups.size());
  out.text_entropy = tokens == 0 ? 0.0 : entropy / static_cast<double>(tokens);

  const auto& grpo = config_.rollout.grpo;
  const double inv = 1.0 / static_cast<double>(groups.size());
  ClipStats lat_stats, text_stats;
  try {
    for (int epoch = 0; epoch < grpo.epochs; ++epoch) {
      ad::Tape tape;
      ad::Var vel = tape.parameter(params_.velocity.values());
      ad::Var txt = tape.parameter(params_.text.values());
      std::vector<ad::Var> lat_terms, text_terms;
      for (const auto& g : groups) {
        lat_terms.push_back(latent_policy_loss(g, model_.velocity, vel, grpo, reference_, &lat_stats));
        text_terms.push_back(text_policy_loss(g, model_.text, txt, grpo, &text_stats));
      }
      ad::Var l_lat = ad::scale(ad::sum_list(lat_terms), inv);
      ad::Var l_txt = ad::scale(ad::sum_list(text_terms), inv);
      ad::Var total = joint_loss(l_lat, l_txt, grpo.w_lat, grpo.w_text);
      tape.backward(total);
      const auto g_vel = tape.grad(vel);
      const auto g_txt = tape.grad(txt);
      if (!finite(g_vel) || !finite(g_txt)) throw NumericError("non-finite gradient");
      numcore::adamw_step(params_.velocity.values(), g_vel, adam_velocity_, config_.optim);
      numcore::adamw_step(params_.text.values(), g_txt, adam_text_, config_.optim);
      if (epoch == 0) {
        out.latent_loss = l_lat.scalar();
        out.text_loss = l_txt.scalar();
      }
    }
  } catch (const NumericError&) {
    out.skipped = true;
  }
  out.clip_frac_latent = lat_stats.fraction();
  out.clip_frac_text = text_stats.fraction();
  return out;
}

void EvalConfig::validate() const {
  if (samples < 1) throw ConfigError("evaluation needs at least one sample");
  for (int k : ks) {
    if (k < 1 || k > samples) throw ConfigError("pass@k needs 1 <= k <= samples");
  }
  sampler.validate();
  sampling.validate();
}

EvalConfig default_eval_config() {
  EvalConfig c;
  c.sampler.steps = 30;
  c.sampler.mode = flowlat::SamplerMode::kOde;
  return c;
}

nlohmann::json EvalResult::to_json() const {
  nlohmann::json p = nlohmann::json::object();
  for (const auto& [k, v] : pass_at) p["pass@" + std::to_string(k)] = v;
  return {{"mean_reward", mean_reward},
          {"pass_at", p},
          {"mode_coverage", mode_coverage},
          {"entropy", entropy},
          {"samples", samples},
          {"correct", correct}};
}

EvalResult EvalResult::from_json(const nlohmann::json& j) {
  for (const char* f : {"mean_reward", "pass_at", "mode_coverage", "entropy", "samples", "correct"}) {
    if (!j.contains(f)) throw DataError(std::string("eval record is missing field '") + f + "'");
  }
  EvalResult r;
  try {
    r.mean_reward = j.at("mean_reward").get<double>();
    r.mode_coverage = j.at("mode_coverage").get<double>();
    r.entropy = j.at("entropy").get<double>();
    r.samples = j.at("samples").get<int>();
    r.correct = j.at("correct").get<std::vector<int>>();
    for (const auto& [key, v] : j.at("pass_at").items()) {
      if (key.rfind("pass@", 0) != 0) throw DataError("bad pass_at key '" + key + "'");
      r.pass_at[std::stoi(key.substr(5))] = v.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed eval record: ") + e.what());
  }
  return r;
}

EvalResult evaluate(const envs::EnvSpec& env, const SampleFn& sample,
                    const EvalConfig& config, Rng& rng) {
  config.validate();
  EvalResult out;
  out.samples = config.samples;
  const auto questions = env.questions();
  double entropy = 0.0;
  std::size_t tokens = 0, total = 0;
  for (const auto& q : questions) {
    int correct = 0;
    std::vector<std::vector<int>> answers;
    std::vector<std::array<double, 2>> points;
    for (int i = 0; i < config.samples; ++i) {
      auto s = sample(q, rng);
      out.mean_reward += s.reward;
      ++total;
      correct += s.reward == 1.0 ? 1 : 0;
      for (double h : s.entropies) entropy += h;
      tokens += s.entropies.size();
      if (env.kind == envs::TaskKind::kModSum) {
        if (s.reward == 1.0) answers.push_back(std::move(s.tokens));
      } else if (s.point.size() == 2) {
        points.push_back({s.point[0], s.point[1]});
      }
    }
    out.correct.push_back(correct);
    for (int k : config.ks) out.pass_at[k] += envs::pass_at_k(config.samples, correct, k);
    out.mode_coverage += env.kind == envs::TaskKind::kModSum
                             ? envs::mode_coverage(answers, q.target, env.modsum)
                             : envs::mode_coverage(points, env.mixture, config.coverage_radius);
  }
  const double nq = static_cast<double>(questions.size());
  for (auto& [k, v] : out.pass_at) v /= nq;
  out.mode_coverage /= nq;
  out.mean_reward /= static_cast<double>(total);
  out.entropy = tokens == 0 ? 0.0 : entropy / static_cast<double>(tokens);
  return out;
}

EvalResult evaluate_ladi(const reasoner::LadiModel& model, const reasoner::LadiParams& params,
                         const envs::EnvSpec& env, const EvalConfig& config, Rng& rng) {
  auto fn = [&](const envs::Condition& q, Rng& r) {
    EvalSample s;
    if (env.kind == envs::TaskKind::kModSum) {
      auto inf = reasoner::infer(model, params, q, config.sampler, config.sampling, r);
      s.reward = envs::answer_reward(inf.answer.tokens, q, env.modsum);
      s.tokens = std::move(inf.answer.tokens);
      s.entropies = std::move(inf.answer.entropies);
    } else {
      auto tr = flowlat::sample_trajectory(model.velocity, params.velocity.values(), q.features,
                                           model.rows, model.cols, config.sampler, r);
      s.reward = envs::mixture_reward(tr.final_latent, env.mixture);
      s.point = std::move(tr.final_latent);
    }
    return s;
  };
  return evaluate(env, fn, config, rng);
}

}  // namespace ladi::rl

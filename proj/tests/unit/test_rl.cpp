#include <cmath>
#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "ladi/numcore/grad.hpp"
#include "ladi/rl/grpo.hpp"
#include "ladi/rl/trainer.hpp"
#include "support.hpp"

using namespace ladi;
using namespace ladi::rl;

namespace {

reasoner::ModelShape tiny_shape() {
  reasoner::ModelShape s;
  s.rows = 2;
  s.cols = 2;
  s.max_len = 3;
  s.text_hidden = 5;
  s.velocity_hidden = {6};
  s.vae_embed = 3;
  s.vae_hidden = 4;
  return s;
}

reasoner::ModelShape mixture_shape() {
  reasoner::ModelShape s;
  s.rows = 1;
  s.cols = 2;
  s.question_size = 2;
  s.max_len = 1;
  s.text_hidden = 1;
  s.velocity_hidden = {32, 32};
  s.vae_embed = 1;
  s.vae_hidden = 1;
  return s;
}

envs::EnvSpec two_digit_env() {
  envs::EnvSpec e;
  e.modsum = {2, 10};
  return e;
}

RolloutSettings small_settings(int n, int m) {
  RolloutSettings s;
  s.grpo.n = n;
  s.grpo.m = m;
  return s;
}

void perturb(std::vector<double>& v, Rng& rng, double scale) {
  for (auto& x : v) x += scale * rng.normal();
}

}  // namespace

TEST(Advantages, HandValues) {
  EXPECT_EQ(group_advantages(std::vector<double>{1, 0, 1, 0}), (std::vector<double>{1, -1, 1, -1}));
  auto a = group_advantages(std::vector<double>{2, 4, 6});
  EXPECT_NEAR(a[0], -1.224744871391589, 1e-12);
  EXPECT_NEAR(a[1], 0.0, 1e-15);
  EXPECT_NEAR(a[2], 1.224744871391589, 1e-12);
  EXPECT_EQ(group_advantages(std::vector<double>{0.3, 0.3, 0.3}), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(group_advantages(std::vector<double>{1.0}), ConfigError);
}

TEST(Advantages, LatentUsesRowMeans) {
  EXPECT_EQ(latent_advantages({{1, 0}, {1, 1}}), (std::vector<double>{-1, 1}));
  EXPECT_EQ(latent_advantages({{1, 0}, {0, 1}}), (std::vector<double>{0, 0}));
}

TEST(Advantages, LatentIsPermutationEquivariant) {
  Rng rng(1);
  std::vector<std::vector<double>> r(5, std::vector<double>(3));
  for (auto& row : r)
    for (auto& v : row) v = rng.uniform(0, 1);
  auto a = latent_advantages(r);
  std::vector<std::vector<double>> rev(r.rbegin(), r.rend());
  auto b = latent_advantages(rev);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[a.size() - 1 - i], 1e-12);
  auto shuffled = r;
  for (auto& row : shuffled) std::rotate(row.begin(), row.begin() + 1, row.end());
  auto c = latent_advantages(shuffled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], c[i], 1e-12);
}

TEST(Advantages, TextIsLocalToEachRow) {
  auto t = text_local_advantages({{1, 0}, {1, 1}, {0, 0, 1, 1}});
  EXPECT_EQ(t[0], (std::vector<double>{1, -1}));
  EXPECT_EQ(t[1], (std::vector<double>{0, 0}));
  EXPECT_EQ(t[2], (std::vector<double>{-1, -1, 1, 1}));
}

TEST(Surrogate, ClippedCases) {
  EXPECT_NEAR(clipped_surrogate(1.2, 1.0, 0.2, 0.28), 1.2, 1e-15);
  EXPECT_NEAR(clipped_surrogate(1.5, 1.0, 0.2, 0.28), 1.28, 1e-15);
  EXPECT_NEAR(clipped_surrogate(0.5, -1.0, 0.2, 0.28), -0.8, 1e-15);
  EXPECT_NEAR(clipped_surrogate(0.5, 1.0, 0.2, 0.28), 0.5, 1e-15);
  EXPECT_EQ(clipped_surrogate(1.0, 0.7, 0.2, 0.28), 0.7);
}

TEST(JointLoss, WeightsAndAlpha) {
  EXPECT_EQ(joint_loss(2.0, 3.0, 10.0, 1.0), 23.0);
  EXPECT_EQ(joint_loss(2.0, 3.0, 10.0, 0.0), 20.0);
  EXPECT_THROW(joint_loss(1.0, 1.0, -1.0, 1.0), ConfigError);
  GrpoConfig c;
  EXPECT_NEAR(c.alpha(), 10.0 / 11.0, 1e-15);
  EXPECT_NEAR(c.alpha(), 0.909, 1e-3);
}

TEST(GrpoConfig, Validation) {
  GrpoConfig c;
  c.n = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c.allow_degenerate = true;
  EXPECT_NO_THROW(c.validate());
  c = {};
  c.eps_text_low = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta_kl = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Rollouts, ShapesAndRewards) {
  Rng rng(2);
  auto model = reasoner::LadiModel::build(tiny_shape());
  auto p = reasoner::init_params(model, rng);
  auto env = two_digit_env();
  auto q = envs::modsum_question(env.modsum, 4);
  auto g = collect_rollouts(q, model, p, env, small_settings(4, 3), rng);
  ASSERT_EQ(g.trajectories.size(), 4u);
  ASSERT_EQ(g.answers.size(), 4u);
  ASSERT_TRUE(g.has_text());
  for (std::size_t n = 0; n < 4; ++n) {
    ASSERT_EQ(g.answers[n].size(), 3u);
    double mean = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
      EXPECT_EQ(g.rewards[n][m], envs::answer_reward(g.answers[n][m].tokens, q, env.modsum));
      mean += g.rewards[n][m] / 3.0;
    }
    EXPECT_NEAR(g.mean_rewards[n], mean, 1e-15);
  }
  EXPECT_EQ(g.latent_adv, latent_advantages(g.rewards));
  EXPECT_EQ(g.text_adv, text_local_advantages(g.rewards));
  EXPECT_FALSE(g.latent_skipped);
}

TEST(Rollouts, SingleTrajectorySkipsLatentTerm) {
  Rng rng(3);
  auto model = reasoner::LadiModel::build(tiny_shape());
  auto p = reasoner::init_params(model, rng);
  auto env = two_digit_env();
  auto s = small_settings(1, 2);
  s.grpo.allow_degenerate = true;
  auto g = collect_rollouts(envs::modsum_question(env.modsum, 1), model, p, env, s, rng);
  EXPECT_TRUE(g.latent_skipped);
  EXPECT_EQ(g.latent_adv, (std::vector<double>{0.0}));
  EXPECT_EQ(latent_policy_loss(g, model.velocity, p.velocity.values(), s.grpo), 0.0);
}

TEST(Rollouts, OnPolicyLossesVanishAndRatiosAreOne) {
  Rng rng(4);
  auto model = reasoner::LadiModel::build(tiny_shape());
  auto p = reasoner::init_params(model, rng);
  perturb(p.text.values(), rng, 0.3);
  auto env = two_digit_env();
  auto s = small_settings(4, 3);
  auto g = collect_rollouts(envs::modsum_question(env.modsum, 6), model, p, env, s, rng);
  EXPECT_NEAR(latent_policy_loss(g, model.velocity, p.velocity.values(), s.grpo), 0.0, 1e-9);
  EXPECT_NEAR(text_policy_loss(g, model.text, p.text.values(), s.grpo), 0.0, 1e-9);
  for (double r : latent_ratios(g, model.velocity, p.velocity.values())) EXPECT_NEAR(r, 1.0, 1e-12);
  for (double r : text_ratios(g, model.text, p.text.values())) EXPECT_NEAR(r, 1.0, 1e-12);
}

TEST(Rollouts, OnPolicyTextGradientIsPlainPolicyGradient) {
  Rng rng(11);
  auto model = reasoner::LadiModel::build(tiny_shape());
  auto p = reasoner::init_params(model, rng);
  perturb(p.text.values(), rng, 0.3);
  auto env = two_digit_env();
  auto s = small_settings(3, 4);
  auto g = collect_rollouts(envs::modsum_question(env.modsum, 3), model, p, env, s, rng);
  g.text_adv = {{1.0, -1.0, 0.5, -0.5}, {0.2, 0.0, -0.2, 0.0}, {-1.0, 1.0, 1.0, -1.0}};
  numcore::LossFn surrogate = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return text_policy_loss(g, model.text, ps[0], s.grpo);
  };
  // -(1/NM) sum A log pi over every token.
  numcore::LossFn reinforce = [&](ad::Tape&, std::span<const ad::Var> ps) {
    std::vector<ad::Var> terms;
    for (std::size_t n = 0; n < g.answers.size(); ++n) {
      for (std::size_t m = 0; m < g.answers[n].size(); ++m) {
        auto lp = textpol::sequence_logprobs(model.text, ps[0], g.answers[n][m].tokens,
                                             g.question.features, g.trajectories[n].final_latent);
        terms.push_back(ad::scale(ad::sum_list(lp), -g.text_adv[n][m] / 12.0));
      }
    }
    return ad::sum_list(terms);
  };
  auto a = numcore::grad(surrogate, p.text.values());
  auto b = numcore::grad(reinforce, p.text.values());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Rollouts, ZeroAdvantagesGiveZeroGradient) {
  Rng rng(5);
  auto model = reasoner::LadiModel::build(tiny_shape());
  auto p = reasoner::init_params(model, rng);
  auto env = two_digit_env();
  auto s = small_settings(3, 2);
  auto g = collect_rollouts(envs::modsum_question(env.modsum, 2), model, p, env, s, rng);
  std::fill(g.latent_adv.begin(), g.latent_adv.end(), 0.0);
  for (auto& row : g.text_adv) std::fill(row.begin(), row.end(), 0.0);
  perturb(p.velocity.values(), rng, 0.05);
  perturb(p.text.values(), rng, 0.05);
  numcore::LossFn lat = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return latent_policy_loss(g, model.velocity, ps[0], s.grpo);
  };
  numcore::LossFn txt = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return text_policy_loss(g, model.text, ps[0], s.grpo);
  };
  for (double v : numcore::grad(lat, p.velocity.values())) EXPECT_EQ(v, 0.0);
  for (double v : numcore::grad(txt, p.text.values())) EXPECT_EQ(v, 0.0);
}

TEST(Rollouts, LossGradientsMatchFiniteDifferences) {
  Rng rng(6);
  auto model = reasoner::LadiModel::build(tiny_shape());
  auto p = reasoner::init_params(model, rng);
  perturb(p.text.values(), rng, 0.3);
  auto env = two_digit_env();
  auto s = small_settings(3, 2);
  s.grpo.eps_z = 10.0;
  s.grpo.eps_text_low = 0.9;
  s.grpo.eps_text_high = 10.0;
  auto g = collect_rollouts(envs::modsum_question(env.modsum, 5), model, p, env, s, rng);
  // Fixed non-zero advantages so the check does not hinge on lucky rewards.
  g.latent_adv = {0.7, -1.1, 0.4};
  g.text_adv = {{1.0, -1.0}, {0.5, -0.5}, {-0.3, 0.3}};
  auto vel = p.velocity.values();
  auto txt = p.text.values();
  perturb(vel, rng, 0.01);
  perturb(txt, rng, 0.05);
  numcore::LossFn lat = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return latent_policy_loss(g, model.velocity, ps[0], s.grpo);
  };
  numcore::LossFn tx = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return text_policy_loss(g, model.text, ps[0], s.grpo);
  };
  EXPECT_LT(numcore::finite_diff_check(lat, vel, 1e-6), 1e-4);
  EXPECT_LT(numcore::finite_diff_check(tx, txt, 1e-6), 1e-4);
  std::vector<std::span<const double>> one = {vel};
  EXPECT_NEAR(numcore::evaluate(lat, one), latent_policy_loss(g, model.velocity, vel, s.grpo), 1e-12);
  auto with_kl = s.grpo;
  with_kl.beta_kl = 0.5;
  const auto ref = p.velocity.values();
  numcore::LossFn kl = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return latent_policy_loss(g, model.velocity, ps[0], with_kl, ref);
  };
  EXPECT_GT(numcore::evaluate(kl, one), numcore::evaluate(lat, one));
  EXPECT_LT(numcore::finite_diff_check(kl, vel, 1e-6), 1e-4);
}

TEST(Trainer, MetricsRecordEveryField) {
  Rng rng(7);
  auto model = reasoner::LadiModel::build(tiny_shape());
  auto p = reasoner::init_params(model, rng);
  RlConfig cfg;
  cfg.rollout = small_settings(3, 2);
  LadiTrainer tr(model, p, two_digit_env(), cfg, 7);
  auto m = tr.train_step();
  EXPECT_EQ(m.step, 0);
  EXPECT_EQ(m.policy, "ladi");
  EXPECT_EQ(tr.step(), 1);
  auto j = m.to_json();
  for (const auto& f : metric_fields()) EXPECT_TRUE(j.contains(f)) << f;
  EXPECT_EQ(j.size(), metric_fields().size());
  EXPECT_EQ(StepMetrics::from_json(j), m);
  auto bad = j;
  bad.erase("reward_std");
  try {
    StepMetrics::from_json(bad);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("reward_std"), std::string::npos);
  }
}

TEST(Trainer, ZeroLearningRateLeavesParameters) {
  Rng rng(8);
  auto model = reasoner::LadiModel::build(tiny_shape());
  auto p = reasoner::init_params(model, rng);
  RlConfig cfg;
  cfg.rollout = small_settings(3, 2);
  cfg.optim.lr = 0.0;
  LadiTrainer tr(model, p, two_digit_env(), cfg, 8);
  for (int i = 0; i < 3; ++i) tr.train_step();
  EXPECT_EQ(tr.params(), p);
}

TEST(Trainer, MixtureRewardImproves) {
  Rng rng(9);
  auto model = reasoner::LadiModel::build(mixture_shape());
  auto p = reasoner::init_params(model, rng);
  envs::EnvSpec env;
  env.kind = envs::TaskKind::kMixture;
  RlConfig cfg;
  cfg.rollout.grpo.n = 16;
  cfg.rollout.grpo.m = 1;
  cfg.questions_per_step = 1;
  cfg.optim.lr = 3e-3;
  LadiTrainer tr(model, p, env, cfg, 9);
  const std::vector<envs::Condition> batch = {envs::mixture_question()};
  double first = 0.0, last = 0.0;
  const int steps = 200, window = 20;
  for (int s = 0; s < steps; ++s) {
    const double r = tr.train_step(batch).mean_reward;
    if (s < window) first += r / window;
    if (s >= steps - window) last += r / window;
  }
  std::cout << "mixture reward " << first << " -> " << last << "\n";
  EXPECT_GT(last, first);
}

TEST(Eval, ConfigAndResultRoundTrip) {
  auto ev = default_eval_config();
  EXPECT_EQ(ev.sampler.steps, 30);
  EXPECT_EQ(ev.sampler.mode, flowlat::SamplerMode::kOde);
  EXPECT_EQ(ev.samples, 200);
  EvalResult r;
  r.mean_reward = 0.5;
  r.pass_at = {{1, 0.5}, {16, 0.9}};
  r.samples = 4;
  r.correct = {2, 2};
  auto back = EvalResult::from_json(r.to_json());
  EXPECT_EQ(back.pass_at, r.pass_at);
  EXPECT_EQ(back.correct, r.correct);
  auto j = r.to_json();
  j.erase("samples");
  EXPECT_THROW(EvalResult::from_json(j), DataError);
}

TEST(Eval, PassAtKFromCounts) {
  envs::EnvSpec env = two_digit_env();
  EvalConfig cfg;
  cfg.samples = 10;
  cfg.ks = {1, 4};
  // Always answer 0 0: correct only for target 0.
  SampleFn f = [&](const envs::Condition& q, Rng&) {
    EvalSample s;
    s.tokens = {0, 0, envs::kEos};
    s.reward = envs::answer_reward(s.tokens, q, env.modsum);
    return s;
  };
  Rng rng(10);
  auto r = evaluate(env, f, cfg, rng);
  EXPECT_NEAR(r.pass_at.at(1), 0.1, 1e-15);
  EXPECT_NEAR(r.pass_at.at(4), 0.1, 1e-15);
  EXPECT_EQ(r.correct[0], 10);
  EXPECT_EQ(r.correct[3], 0);
  EXPECT_NEAR(r.mode_coverage, 0.1, 1e-15);
}

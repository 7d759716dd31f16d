#include <cmath>

#include <gtest/gtest.h>

#include "ladi/arbaseline/ar.hpp"
#include "ladi/numcore/grad.hpp"
#include "ladi/reasoner/model.hpp"
#include "support.hpp"

using namespace ladi;
using namespace ladi::arbaseline;

namespace {

envs::EnvSpec two_digit_env() {
  envs::EnvSpec e;
  e.modsum = {2, 10};
  return e;
}

textpol::TextPolicy small_policy() { return make_ar_policy(10, 3, 8); }

std::vector<double> random_params(const textpol::TextPolicy& p, Rng& rng, double scale) {
  std::vector<double> v(p.mlp().param_count());
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

TEST(ArPolicy, HasNoLatentInput) {
  auto p = small_policy();
  EXPECT_EQ(p.shape().latent_size, 0u);
  EXPECT_EQ(p.shape().question_size, 10u);
}

TEST(ArRollout, SizeAndRescoring) {
  Rng rng(1);
  auto pol = small_policy();
  auto params = random_params(pol, rng, 0.5);
  auto env = two_digit_env();
  auto q = envs::modsum_question(env.modsum, 8);
  auto g = ar_rollout(pol, params, q, env, 12, {}, rng);
  ASSERT_EQ(g.samples.size(), 12u);
  ASSERT_EQ(g.rewards.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(g.rewards[i], envs::answer_reward(g.samples[i].tokens, q, env.modsum));
    EXPECT_EQ(g.samples[i].reward, g.rewards[i]);
  }
  EXPECT_EQ(g.advantages, rl::group_advantages(g.rewards));
  EXPECT_THROW(ar_rollout(pol, params, q, env, 1, {}, rng), ConfigError);
}

TEST(ArRollout, DeltaPolicyGivesIdenticalAnswers) {
  Rng rng(2);
  auto pol = small_policy();
  auto params = fixtures::scripted_params(pol, {4, 4, envs::kEos});
  auto env = two_digit_env();
  auto g = ar_rollout(pol, params, envs::modsum_question(env.modsum, 8), env, 10, {}, rng);
  for (const auto& s : g.samples) EXPECT_EQ(s.tokens, (std::vector<int>{4, 4, envs::kEos}));
  for (double r : g.rewards) EXPECT_EQ(r, 1.0);
  for (double a : g.advantages) EXPECT_EQ(a, 0.0);
}

TEST(ArLoss, OnPolicyIsZero) {
  Rng rng(3);
  auto pol = small_policy();
  auto params = random_params(pol, rng, 0.5);
  auto env = two_digit_env();
  std::vector<ArGroup> gs = {ar_rollout(pol, params, envs::modsum_question(env.modsum, 1), env, 8, {}, rng),
                             ar_rollout(pol, params, envs::modsum_question(env.modsum, 2), env, 8, {}, rng)};
  EXPECT_NEAR(ar_grpo_loss(gs, pol, params, 0.2), 0.0, 1e-9);
}

TEST(ArLoss, ZeroAdvantagesGiveZeroGradient) {
  Rng rng(4);
  auto pol = small_policy();
  auto params = random_params(pol, rng, 0.5);
  auto env = two_digit_env();
  std::vector<ArGroup> gs = {ar_rollout(pol, params, envs::modsum_question(env.modsum, 1), env, 6, {}, rng)};
  std::fill(gs[0].advantages.begin(), gs[0].advantages.end(), 0.0);
  for (auto& x : params) x += 0.05 * rng.normal();
  numcore::LossFn f = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return ar_grpo_loss(gs, pol, ps[0], 0.2);
  };
  for (double g : numcore::grad(f, params)) EXPECT_EQ(g, 0.0);
}

TEST(ArLoss, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  auto pol = small_policy();
  auto params = random_params(pol, rng, 0.5);
  auto env = two_digit_env();
  std::vector<ArGroup> gs = {ar_rollout(pol, params, envs::modsum_question(env.modsum, 3), env, 2, {}, rng)};
  gs[0].advantages = {1.0, -1.0};
  for (auto& x : params) x += 0.02 * rng.normal();
  numcore::LossFn f = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return ar_grpo_loss(gs, pol, ps[0], 0.9);
  };
  EXPECT_LT(numcore::finite_diff_check(f, params, 1e-6), 1e-4);
  std::vector<std::span<const double>> one = {params};
  EXPECT_NEAR(numcore::evaluate(f, one), ar_grpo_loss(gs, pol, params, 0.9), 1e-12);
}

TEST(ArTrainer, UniformPolicyEntropy) {
  Rng rng(6);
  auto pol = small_policy();
  auto params = pol.init(rng);
  ArConfig cfg;
  cfg.group = 8;
  cfg.optim.lr = 0.0;
  ArTrainer tr(pol, params, two_digit_env(), cfg, 6);
  std::vector<rl::StepMetrics> log;
  for (int i = 0; i < 3; ++i) log.push_back(tr.train_step());
  auto series = entropy_series(log);
  ASSERT_EQ(series.size(), 3u);
  for (double h : series) EXPECT_NEAR(h, std::log(12.0), 1e-6);
  EXPECT_EQ(log[0].policy, "ar");
  EXPECT_EQ(tr.params(), params);
}

TEST(ArTrainer, EntropySeriesPreservesOrder) {
  std::vector<rl::StepMetrics> log(4);
  for (int i = 0; i < 4; ++i) log[i].text_entropy = 0.7;
  EXPECT_EQ(entropy_series(log), (std::vector<double>(4, 0.7)));
  log[2].text_entropy = 0.1;
  EXPECT_EQ(entropy_series(log)[2], 0.1);
  EXPECT_THROW(entropy_series(std::span<const rl::StepMetrics>{}), DataError);
}

TEST(ArTrainer, ReinforcementLowersEntropy) {
  Rng rng(7);
  auto pol = small_policy();
  ArConfig cfg;
  cfg.group = 16;
  cfg.optim.lr = 3e-2;
  ArTrainer tr(pol, pol.init(rng), two_digit_env(), cfg, 7);
  std::vector<rl::StepMetrics> log;
  for (int i = 0; i < 80; ++i) log.push_back(tr.train_step());
  auto series = entropy_series(log);
  std::cout << "AR entropy " << series.front() << " -> " << series.back() << "\n";
  EXPECT_LT(series.back(), series.front());
}

TEST(ArSft, CrossEntropyDecreases) {
  Rng rng(8);
  auto pol = small_policy();
  auto params = pol.init(rng);
  auto state = numcore::AdamState::zeros(params.size());
  auto corpus = reasoner::make_modsum_corpus(two_digit_env().modsum, 2, rng);
  ArSftConfig cfg;
  cfg.epochs = 30;
  auto losses = train_ar_sft(pol, params, state, corpus, cfg, rng);
  ASSERT_EQ(losses.size(), 30u);
  EXPECT_NEAR(losses.front(), std::log(12.0), 0.3);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(ArConfig, Validation) {
  ArConfig c;
  c.group = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.eps = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

#include <cmath>

#include <gtest/gtest.h>

#include "ladi/numcore/grad.hpp"
#include "ladi/numcore/kernels.hpp"
#include "ladi/textpol/policy.hpp"
#include "support.hpp"

using namespace ladi;
using namespace ladi::textpol;

namespace {

TextShape small_shape(std::size_t max_len = 4) {
  TextShape s;
  s.question_size = 3;
  s.latent_size = 2;
  s.max_len = max_len;
  s.hidden = 6;
  return s;
}

const std::vector<double> kQ = {0.0, 1.0, 0.0};
const std::vector<double> kZ = {0.4, -1.2};

}  // namespace

TEST(TextPolicy, FreshPolicyIsUniform) {
  Rng rng(1);
  TextPolicy pol(small_shape());
  auto p = pol.init(rng);
  std::vector<int> prefix = {3, 1};
  auto probs = token_distribution(pol, p.values(), prefix, kQ, kZ);
  ASSERT_EQ(probs.size(), static_cast<std::size_t>(envs::kVocab));
  for (double v : probs) EXPECT_NEAR(v, 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(numcore::entropy(probs), std::log(12.0), 1e-12);
}

TEST(TextPolicy, DistributionSumsToOne) {
  Rng rng(2);
  TextPolicy pol(small_shape());
  std::vector<double> p(pol.mlp().param_count());
  for (auto& v : p) v = rng.normal();
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> prefix = {trial % 10};
    auto probs = token_distribution(pol, p, prefix, kQ, kZ);
    double s = 0.0;
    for (double v : probs) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(TextPolicy, FeatureLayout) {
  TextPolicy pol(small_shape(3));
  std::vector<int> prefix = {7};
  auto f = pol.features(prefix, kQ, kZ);
  // question(3) | latent(2) | position one-hot(3) | 2 x 12 previous tokens
  ASSERT_EQ(f.size(), 3u + 2u + 3u + 24u);
  EXPECT_EQ(f[1], 1.0);
  EXPECT_EQ(f[3], 0.4);
  EXPECT_EQ(f[5 + 1], 1.0);
  EXPECT_EQ(f[8 + 7], 1.0);
  double s = 0.0;
  for (double v : f) s += v;
  EXPECT_NEAR(s, 1.0 + 0.4 - 1.2 + 1.0 + 1.0, 1e-15);
}

TEST(Nucleus, KeepsSmallestCoveringSet) {
  std::vector<double> p = {0.1, 0.6, 0.3};
  auto q = nucleus(p, 0.8);
  EXPECT_EQ(q[0], 0.0);
  EXPECT_NEAR(q[1], 0.6 / 0.9, 1e-15);
  EXPECT_NEAR(q[2], 0.3 / 0.9, 1e-15);
  auto all = nucleus(p, 1.0);
  EXPECT_NEAR(all[0], 0.1, 1e-15);
  auto top = nucleus(p, 0.5);
  EXPECT_EQ(top, (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(Sampling, GreedyFollowsArgmax) {
  Rng rng(3);
  TextPolicy pol(small_shape());
  auto p = fixtures::scripted_params(pol, {3, 1, envs::kEos});
  SamplingConfig cfg;
  cfg.greedy = true;
  auto a = sample_answer(pol, p, kQ, kZ, cfg, rng);
  EXPECT_EQ(a.tokens, (std::vector<int>{3, 1, envs::kEos}));
  EXPECT_TRUE(a.terminated());
  auto b = sample_answer(pol, p, kQ, kZ, cfg, rng);
  EXPECT_EQ(a, b);
}

TEST(Sampling, StopsAtMaxLength) {
  Rng rng(4);
  TextPolicy pol(small_shape(3));
  auto p = fixtures::scripted_params(pol, {2, 2, 2});
  auto a = sample_answer(pol, p, kQ, kZ, {}, rng);
  EXPECT_EQ(a.tokens.size(), 3u);
  EXPECT_FALSE(a.terminated());
}

TEST(Sampling, FrequenciesMatchProbabilities) {
  Rng rng(5);
  TextPolicy pol(small_shape(1));
  std::vector<double> logits(envs::kVocab);
  for (int i = 0; i < envs::kVocab; ++i) logits[i] = 0.3 * i - 0.02 * i * i;
  auto p = fixtures::fixed_logit_params(pol, logits);
  const auto probs = numcore::softmax(logits);
  SamplingConfig cfg;
  cfg.top_p = 1.0;
  const int n = 100000;
  std::vector<int> counts(envs::kVocab, 0);
  for (int i = 0; i < n; ++i) {
    auto a = sample_answer(pol, p, kQ, kZ, cfg, rng);
    ASSERT_EQ(a.tokens.size(), 1u);
    ++counts[a.tokens[0]];
  }
  for (int i = 0; i < envs::kVocab; ++i) {
    const double se = std::sqrt(probs[i] * (1 - probs[i]) / n);
    EXPECT_NEAR(counts[i] / static_cast<double>(n), probs[i], 3 * se) << i;
  }
}

TEST(Sampling, TemperatureSharpens) {
  Rng rng(6);
  TextPolicy pol(small_shape(1));
  std::vector<double> logits(envs::kVocab, 0.0);
  logits[4] = 1.0;
  auto p = fixtures::fixed_logit_params(pol, logits);
  SamplingConfig cfg;
  cfg.top_p = 1.0;
  cfg.temperature = 0.05;
  int hits = 0;
  for (int i = 0; i < 200; ++i) hits += sample_answer(pol, p, kQ, kZ, cfg, rng).tokens[0] == 4;
  EXPECT_GE(hits, 195);
}

TEST(Sampling, SamplingConfigValidation) {
  SamplingConfig c;
  c.top_p = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.temperature = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(LogProbs, RescoringMatchesStoredValues) {
  Rng rng(7);
  TextPolicy pol(small_shape());
  std::vector<double> p(pol.mlp().param_count());
  for (auto& v : p) v = 0.5 * rng.normal();
  SamplingConfig cfg;
  cfg.top_p = 0.9;
  cfg.temperature = 0.7;
  for (int i = 0; i < 20; ++i) {
    auto a = sample_answer(pol, p, kQ, kZ, cfg, rng);
    auto lp = sequence_logprobs(pol, p, a.tokens, kQ, kZ);
    ASSERT_EQ(lp.size(), a.old_logprobs.size());
    for (std::size_t j = 0; j < lp.size(); ++j) EXPECT_EQ(lp[j], a.old_logprobs[j]);
  }
}

TEST(LogProbs, UniformPolicy) {
  Rng rng(8);
  TextPolicy pol(small_shape());
  auto p = pol.init(rng);
  std::vector<int> toks = {1, 5, envs::kEos};
  for (double v : sequence_logprobs(pol, p.values(), toks, kQ, kZ)) {
    EXPECT_NEAR(v, fixtures::uniform_logprob(), 1e-14);
  }
  auto a = sample_answer(pol, p.values(), kQ, kZ, {}, rng);
  EXPECT_NEAR(mean_entropy(std::vector<AnswerSample>{a}), std::log(12.0), 1e-12);
}

TEST(LogProbs, TapeMatchesPlainAndFiniteDifferences) {
  Rng rng(9);
  TextPolicy pol(small_shape());
  std::vector<double> p(pol.mlp().param_count());
  for (auto& v : p) v = 0.3 * rng.normal();
  std::vector<int> toks = {4, 0, 9, envs::kEos};
  numcore::LossFn f = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return ad::sum_list(sequence_logprobs(pol, ps[0], toks, kQ, kZ));
  };
  double plain = 0.0;
  for (double v : sequence_logprobs(pol, p, toks, kQ, kZ)) plain += v;
  std::vector<std::span<const double>> spans = {p};
  EXPECT_NEAR(numcore::evaluate(f, spans), plain, 1e-12);
  EXPECT_LT(numcore::finite_diff_check(f, p, 1e-6), 1e-5);
}

TEST(TextPolicy, DescriptionRoundTrip) {
  TextPolicy pol(small_shape(5));
  auto back = TextPolicy::from_description(pol.describe());
  EXPECT_EQ(back.shape(), pol.shape());
  EXPECT_THROW(TextPolicy::from_description(nlohmann::json{{"hidden", 3}}), DataError);
}

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <gtest/gtest.h>

#include "ladi/numcore/grad.hpp"
#include "ladi/reasoner/model.hpp"
#include "ladi/reasoner/sft.hpp"
#include "ladi/rl/trainer.hpp"
#include "support.hpp"

using namespace ladi;
using namespace ladi::reasoner;

namespace {

ModelShape tiny_shape() {
  ModelShape s;
  s.rows = 2;
  s.cols = 2;
  s.question_size = 10;
  s.max_len = 3;
  s.text_hidden = 5;
  s.velocity_hidden = {6};
  s.vae_embed = 3;
  s.vae_hidden = 4;
  return s;
}

envs::ModSumSpec two_digit() { return {2, 10}; }

std::vector<double> random_values(std::size_t n, Rng& rng, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Full-size SFT run shared by the slower tests.
struct Trained {
  envs::EnvSpec env;
  LadiModel model;
  LadiParams params;
  std::vector<TraceExample> corpus;

  static const Trained& get() {
    static const Trained t = [] {
      Trained t;
      t.model = LadiModel::build(ModelShape{});
      Rng rng(101);
      t.params = init_params(t.model, rng);
      t.corpus = make_modsum_corpus(t.env.modsum, 5, rng);
      SftState st;
      train_sft(t.model, t.params, st, t.corpus, SftConfig{}, rng);
      return t;
    }();
    return t;
  }
};

}  // namespace

TEST(Corpus, DistinctVerifiedSolutions) {
  Rng rng(1);
  const auto spec = two_digit();
  auto corpus = make_modsum_corpus(spec, 5, rng);
  ASSERT_EQ(corpus.size(), 50u);
  std::set<std::pair<int, std::vector<int>>> seen;
  for (const auto& ex : corpus) {
    EXPECT_EQ(envs::modsum_reward(ex.trace, ex.question.target, spec), 1.0);
    EXPECT_EQ(envs::answer_reward(ex.answer, ex.question, spec), 1.0);
    EXPECT_EQ(ex.answer.back(), envs::kEos);
    seen.insert({ex.question.target, ex.trace});
  }
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_THROW(make_modsum_corpus(spec, 11, rng), ConfigError);
}

TEST(Corpus, FileRoundTripAndErrors) {
  Rng rng(2);
  const auto spec = two_digit();
  auto corpus = make_modsum_corpus(spec, 2, rng);
  const auto path = std::filesystem::temp_directory_path() / "ladi_corpus_test.jsonl";
  write_corpus(path, corpus);
  EXPECT_EQ(read_corpus(path, spec), corpus);
  {
    std::ofstream out(path);
    out << R"({"question":[3],"trace":[1,2],"answer":[1,2,11]})" << "\n";
    out << R"({"question":[3],"trace":[1,1],"answer":[1,1,11]})" << "\n";
  }
  try {
    read_corpus(path, spec);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(Vae, DeterministicEncodingIsRepeatable) {
  Rng rng(3);
  auto model = LadiModel::build(tiny_shape());
  auto p = init_params(model, rng);
  std::vector<int> trace = {4, 9};
  Rng a(7), b(8);
  auto z1 = encode_trace(model.vae, p.vae.values(), trace, a, true);
  auto z2 = encode_trace(model.vae, p.vae.values(), trace, b, true);
  EXPECT_EQ(z1.values, z2.values);
  EXPECT_EQ(z1.values.size(), 4u);
}

TEST(Vae, ZeroEncoderGivesStandardNormal) {
  auto model = LadiModel::build(tiny_shape());
  Rng init_rng(0);
  std::vector<double> zero(model.vae.init(init_rng).size(), 0.0);
  std::vector<int> trace = {1, 2};
  auto st = model.vae.stats(zero, trace);
  for (double v : st.mean) EXPECT_EQ(v, 0.0);
  for (double v : st.logvar) EXPECT_EQ(v, 0.0);
  Rng rng(4);
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n / 4; ++i) {
    for (double v : encode_trace(model.vae, zero, trace, rng, false).values) {
      s += v;
      s2 += v * v;
    }
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(SftLoss, PureCrossEntropyWhenOtherWeightsAreZero) {
  Rng rng(5);
  auto model = LadiModel::build(tiny_shape());
  auto p = init_params(model, rng);
  auto corpus = make_modsum_corpus(two_digit(), 1, rng);
  auto draws = draw_sft(corpus.size(), model.latent_size(), rng);
  SftWeights w{0.0, 0.0};
  ad::Tape tape;
  auto terms = sft_loss(model, tape.parameter(p.vae.values()), tape.parameter(p.velocity.values()),
                        tape.parameter(p.text.values()), corpus, w, draws);
  EXPECT_EQ(terms.total.value()[0], terms.ce.value()[0]);
  // Fresh decoder is uniform: CE is ln 12 per token.
  EXPECT_NEAR(terms.ce.value()[0], std::log(12.0), 1e-12);
  EXPECT_GT(terms.fm.value()[0], 0.0);
}

TEST(SftLoss, ScriptedDecoderHasZeroCrossEntropy) {
  Rng rng(6);
  auto model = LadiModel::build(tiny_shape());
  auto p = init_params(model, rng);
  envs::ModSumSpec spec = two_digit();
  TraceExample ex{envs::modsum_question(spec, 7), {3, 4}, {3, 4, envs::kEos}};
  auto scripted = fixtures::scripted_params(model.text, ex.answer);
  p.text.values() = scripted;
  std::vector<TraceExample> batch = {ex};
  auto draws = draw_sft(1, model.latent_size(), rng);
  ad::Tape tape;
  auto terms = sft_loss(model, tape.parameter(p.vae.values()), tape.parameter(p.velocity.values()),
                        tape.parameter(p.text.values()), batch, SftWeights{0.0, 0.0}, draws);
  EXPECT_LT(terms.ce.value()[0], 1e-12);
}

TEST(SftLoss, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  auto model = LadiModel::build(tiny_shape());
  auto p = init_params(model, rng);
  auto text = random_values(p.text.size(), rng, 0.3);
  auto corpus = make_modsum_corpus(two_digit(), 1, rng);
  std::vector<TraceExample> batch(corpus.begin(), corpus.begin() + 2);
  auto draws = draw_sft(batch.size(), model.latent_size(), rng);
  SftWeights w{1.0, 0.5};
  // The flow term sees the encoded latents detached, so the encoder is
  // checked with the flow weight off and the other two networks with it on.
  SftWeights no_flow{0.0, 0.5};
  numcore::LossFn encoder = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return sft_loss(model, ps[0], ps[1], ps[2], batch, no_flow, draws).total;
  };
  std::vector<std::span<const double>> spans = {p.vae.values(), p.velocity.values(), text};
  EXPECT_LT(numcore::finite_diff_check(encoder, spans, 1e-6), 1e-4);
  numcore::LossFn joint = [&](ad::Tape& tape, std::span<const ad::Var> ps) {
    return sft_loss(model, tape.constant(p.vae.values()), ps[0], ps[1], batch, w, draws).total;
  };
  std::vector<std::span<const double>> rest = {p.velocity.values(), text};
  EXPECT_LT(numcore::finite_diff_check(joint, rest, 1e-6), 1e-4);
  LadiParams plain = p;
  plain.text.values() = text;
  EXPECT_NEAR(numcore::evaluate(joint, rest), sft_loss(model, plain, batch, w, draws), 1e-12);
}

TEST(SftConfig, Validation) {
  SftConfig c;
  c.batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  SftWeights w{-1.0, 0.0};
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Sft, TrainedModelReconstructsTraces) {
  const auto& t = Trained::get();
  const double acc = reconstruction_accuracy(t.model, t.params, t.corpus);
  std::cout << "reconstruction accuracy " << acc << "\n";
  EXPECT_GE(acc, 0.95);
}

TEST(Sft, InferenceIsDeterministicInOdeMode) {
  const auto& t = Trained::get();
  auto ev = rl::default_eval_config();
  ev.sampling.greedy = true;
  const auto q = envs::modsum_question(t.env.modsum, 3);
  Rng a(9), b(9);
  auto x = infer(t.model, t.params, q, ev.sampler, ev.sampling, a);
  auto y = infer(t.model, t.params, q, ev.sampler, ev.sampling, b);
  EXPECT_EQ(x.latent.values, y.latent.values);
  EXPECT_EQ(x.answer.tokens, y.answer.tokens);
}

TEST(Sft, AccuracyBeatsUniformAndStepCountIsReported) {
  const auto& t = Trained::get();
  auto ev = rl::default_eval_config();
  ev.samples = 100;
  Rng rng(10);
  const auto r30 = rl::evaluate_ladi(t.model, t.params, t.env, ev, rng);
  ev.sampler.steps = 10;
  const auto r10 = rl::evaluate_ladi(t.model, t.params, t.env, ev, rng);
  std::cout << "pass@1 K=30 " << r30.pass_at.at(1) << " K=10 " << r10.pass_at.at(1) << "\n";
  // Uniform decoding hits two specific digits then EOS with probability 10 / 12^3.
  EXPECT_GT(r30.pass_at.at(1), 10.0 / (12.0 * 12.0 * 12.0));
  EXPECT_GT(r30.pass_at.at(1), 0.1);
}

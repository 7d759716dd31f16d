#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "ladi/common.hpp"
#include "ladi/numcore/autodiff.hpp"
#include "ladi/numcore/checkpoint.hpp"
#include "ladi/numcore/grad.hpp"
#include "ladi/numcore/kernels.hpp"
#include "ladi/numcore/mlp.hpp"
#include "ladi/numcore/optim.hpp"
#include "ladi/numcore/params.hpp"

using namespace ladi;
using numcore::Activation;
using numcore::MlpSpec;

TEST(Mlp, IdentityWeightsPassInputThrough) {
  MlpSpec spec{{2, 2}, {Activation::kIdentity}};
  std::vector<double> p = {1, 0, 0, 1, 0, 0};
  auto y = numcore::mlp_forward(spec, p, std::vector<double>{1, 2});
  EXPECT_EQ(y, (std::vector<double>{1, 2}));
}

TEST(Mlp, ZeroParamsGiveZeroOutput) {
  auto spec = MlpSpec::tanh_net({3, 5, 2});
  std::vector<double> p(spec.param_count(), 0.0);
  auto y = numcore::mlp_forward(spec, p, std::vector<double>{0.3, -7, 2});
  EXPECT_EQ(y, (std::vector<double>{0, 0}));
}

TEST(Mlp, HandEvaluatedTwoLayerNet) {
  auto spec = MlpSpec::tanh_net({2, 2, 1});
  // W1 = [[0.5, -1], [2, 0.25]], b1 = [0.1, -0.2], W2 = [[1.5, -0.5]], b2 = [0.3]
  std::vector<double> p = {0.5, -1, 2, 0.25, 0.1, -0.2, 1.5, -0.5, 0.3};
  auto y = numcore::mlp_forward(spec, p, std::vector<double>{1, 0});
  const double h1 = std::tanh(0.5 + 0.1), h2 = std::tanh(2 - 0.2);
  ASSERT_EQ(y.size(), 1u);
  EXPECT_NEAR(y[0], 1.5 * h1 - 0.5 * h2 + 0.3, 1e-15);
}

TEST(Mlp, TapeForwardMatchesPlainForward) {
  Rng rng(3);
  auto spec = MlpSpec::tanh_net({4, 6, 3});
  numcore::ParamVector pv;
  numcore::append_mlp(pv, spec, "m", rng);
  std::vector<double> x = {0.1, -0.4, 2.0, 0.7};
  ad::Tape tape;
  auto out = numcore::mlp_forward(spec, tape.parameter(pv.values()), 0, tape.constant(x));
  auto plain = numcore::mlp_forward(spec, pv.values(), x);
  ASSERT_EQ(out.size(), plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_EQ(out.value()[i], plain[i]);
}

TEST(Mlp, RejectsMismatchedSpec) {
  MlpSpec spec{{2, 3, 1}, {Activation::kTanh}};
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Grad, SumOfSquares) {
  numcore::LossFn f = [](ad::Tape&, std::span<const ad::Var> ps) { return ad::sqnorm(ps[0]); };
  auto g = numcore::grad(f, std::vector<double>{1, -2});
  EXPECT_EQ(g, (std::vector<double>{2, -4}));
}

TEST(Grad, ConstantLossHasZeroGradient) {
  numcore::LossFn f = [](ad::Tape& t, std::span<const ad::Var>) { return t.scalar(3.5); };
  auto g = numcore::grad(f, std::vector<double>{1, 2, 3});
  EXPECT_EQ(g, (std::vector<double>{0, 0, 0}));
}

TEST(Grad, FiniteDifferenceQuadraticIsExact) {
  numcore::LossFn f = [](ad::Tape&, std::span<const ad::Var> ps) { return ad::sqnorm(ps[0]); };
  EXPECT_LT(numcore::finite_diff_check(f, std::vector<double>{3.0}, 1e-4), 1e-6);
}

TEST(Grad, FiniteDifferenceConstantIsZero) {
  numcore::LossFn f = [](ad::Tape& t, std::span<const ad::Var>) { return t.scalar(-1.0); };
  EXPECT_EQ(numcore::finite_diff_check(f, std::vector<double>{3.0, 1.0}, 1e-4), 0.0);
}

TEST(Grad, TapeOpsMatchFiniteDifferences) {
  Rng rng(11);
  std::vector<double> a(5), b(5);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  numcore::LossFn f = [](ad::Tape&, std::span<const ad::Var> ps) {
    auto x = ad::tanh(ad::mul(ps[0], ps[1]));
    auto y = ad::exp(ad::scale(ps[0], 0.3));
    auto lse = ad::log_softmax_at(ad::add(x, y), 2);
    return ad::sum_list(std::vector<ad::Var>{lse, ad::dot(x, y), ad::sum(ad::slice(y, 1, 3))});
  };
  std::vector<std::span<const double>> ps = {a, b};
  EXPECT_LT(numcore::finite_diff_check(f, ps, 1e-6), 1e-6);
}

TEST(Tape, NonFiniteValueNamesTheOp) {
  ad::Tape t;
  auto x = t.parameter(std::vector<double>{800.0});
  try {
    ad::exp(x);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos);
  }
}

TEST(AdamW, ZeroGradZeroDecayLeavesParams) {
  std::vector<double> p = {1.0, -2.0};
  auto st = numcore::AdamState::zeros(2);
  numcore::adamw_step(p, std::vector<double>{0, 0}, st, {0.1, 0.9, 0.999, 0.0, 1e-8});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(AdamW, FirstStepIsUnitMagnitude) {
  std::vector<double> p = {0.0};
  auto st = numcore::AdamState::zeros(1);
  numcore::adamw_step(p, std::vector<double>{1.0}, st, {0.1, 0.9, 0.999, 0.0, 1e-8});
  // m_hat = 1, v_hat = 1: step = lr * 1 / (1 + eps)
  EXPECT_NEAR(p[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0], -0.1, 1e-8);
}

TEST(AdamW, DecayOnly) {
  std::vector<double> p = {1.0};
  auto st = numcore::AdamState::zeros(1);
  numcore::adamw_step(p, std::vector<double>{0.0}, st, {0.1, 0.9, 0.999, 0.01, 1e-8});
  EXPECT_NEAR(p[0], 0.999, 1e-15);
}

TEST(AdamW, NonFiniteGradientLeavesStateUntouched) {
  std::vector<double> p = {1.0, 2.0};
  auto st = numcore::AdamState::zeros(2);
  const auto before = st;
  EXPECT_THROW(numcore::adamw_step(p, std::vector<double>{1.0, NAN}, st, {}), NumericError);
  EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(st, before);
}

TEST(Kernels, SoftmaxAndEntropy) {
  auto p = numcore::softmax(std::vector<double>(12, 0.3));
  double s = 0;
  for (double v : p) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_NEAR(numcore::entropy(p), std::log(12.0), 1e-12);
  EXPECT_NEAR(numcore::log_softmax_at(std::vector<double>{1000, 0}, 1), -1000.0, 1e-9);
}

TEST(Params, SlicesTileTheVector) {
  numcore::ParamVector pv;
  pv.add_slice("a", 3);
  pv.add_slice("b", 2);
  EXPECT_EQ(pv.size(), 5u);
  EXPECT_EQ(pv.slice("b").offset, 3u);
  EXPECT_THROW(numcore::ParamVector::from_parts({{"a", 0, 3}, {"b", 4, 1}}, std::vector<double>(5)),
               DataError);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(5);
  auto spec = MlpSpec::tanh_net({3, 4, 2});
  numcore::ParamVector pv;
  numcore::append_mlp(pv, spec, "net", rng);
  numcore::AdamState st = numcore::AdamState::zeros(pv.size());
  st.m[0] = 0.1;
  st.v[1] = 1.0 / 3.0;
  st.step = 7;
  numcore::Checkpoint ck;
  ck.seed = 42;
  ck.info = {{"note", "x"}};
  ck.entries.push_back({"net", {{"widths", {3, 4, 2}}}, pv, st});
  const auto path = std::filesystem::temp_directory_path() / "ladi_ckpt_roundtrip.bin";
  numcore::save_checkpoint(path, ck);
  const auto back = numcore::load_checkpoint(path);
  EXPECT_EQ(back, ck);
  std::vector<double> probe = {0.2, -1.0, 0.5};
  EXPECT_EQ(numcore::mlp_forward(spec, back.entry("net").params.values(), probe),
            numcore::mlp_forward(spec, pv.values(), probe));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsWrongMagicAndTruncation) {
  numcore::Container c{"LADICKPT", {{"k", 1}}, {1.0, 2.0}};
  auto bytes = numcore::encode_container(c);
  EXPECT_THROW(numcore::decode_container(bytes, "LADITRAJ"), DataError);
  EXPECT_THROW(numcore::decode_container(bytes.substr(0, bytes.size() - 3), "LADICKPT"), DataError);
  EXPECT_EQ(numcore::decode_container(bytes, "LADICKPT").payload, c.payload);
}

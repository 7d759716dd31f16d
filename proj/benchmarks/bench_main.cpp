#include <benchmark/benchmark.h>

#include "ladi/envs/envs.hpp"
#include "ladi/flowlat/fm.hpp"
#include "ladi/flowlat/sampler.hpp"
#include "ladi/flowlat/velocity.hpp"
#include "ladi/guidance/repulsion.hpp"
#include "ladi/numcore/grad.hpp"
#include "ladi/reasoner/model.hpp"
#include "ladi/rl/grpo.hpp"

using namespace ladi;

namespace {

void BM_VelocityForward(benchmark::State& state) {
  flowlat::VelocityNet net(flowlat::VelocityShape{});
  Rng rng(1);
  auto p = net.init(rng);
  std::vector<double> x(32), c(10, 0.0);
  for (auto& v : x) v = rng.normal();
  c[3] = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(net(p.values(), x, 0.4, c));
}
BENCHMARK(BM_VelocityForward);

void BM_FmLossGrad(benchmark::State& state) {
  flowlat::VelocityNet net(flowlat::VelocityShape{});
  Rng rng(2);
  auto p = net.init(rng);
  const auto batch_size = static_cast<std::size_t>(state.range(0));
  std::vector<flowlat::FmExample> batch;
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::vector<double> x0(32), c(10, 0.0);
    for (auto& v : x0) v = rng.normal();
    c[i % 10] = 1.0;
    batch.push_back({x0, c});
  }
  auto draws = flowlat::draw_fm(batch_size, 32, rng);
  numcore::LossFn f = [&](ad::Tape&, std::span<const ad::Var> ps) {
    return flowlat::fm_loss(net, ps[0], batch, draws);
  };
  for (auto _ : state) benchmark::DoNotOptimize(numcore::grad(f, p.values()));
}
BENCHMARK(BM_FmLossGrad)->Arg(1)->Arg(16);

void BM_SampleGroup(benchmark::State& state) {
  flowlat::VelocityNet net(flowlat::VelocityShape{});
  Rng rng(3);
  auto p = net.init(rng);
  std::vector<double> c(10, 0.0);
  c[5] = 1.0;
  flowlat::SamplerConfig cfg;
  guidance::GuidanceConfig guide;
  const bool guided = state.range(0) != 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        flowlat::sample_group(net, p.values(), c, 8, 4, cfg, guided ? &guide : nullptr, 8, rng));
  }
}
BENCHMARK(BM_SampleGroup)->Arg(0)->Arg(1);

void BM_CollectRollouts(benchmark::State& state) {
  auto model = reasoner::LadiModel::build(reasoner::ModelShape{});
  Rng rng(4);
  auto params = reasoner::init_params(model, rng);
  envs::EnvSpec env;
  rl::RolloutSettings settings;
  auto q = envs::modsum_question(env.modsum, 7);
  for (auto _ : state) benchmark::DoNotOptimize(rl::collect_rollouts(q, model, params, env, settings, rng));
}
BENCHMARK(BM_CollectRollouts)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

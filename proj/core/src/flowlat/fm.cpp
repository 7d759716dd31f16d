#include "ladi/flowlat/fm.hpp"

#include <algorithm>
#include <numeric>

namespace ladi::flowlat {

std::vector<FmDraw> draw_fm(std::size_t batch, std::size_t dim, Rng& rng,
                            double eps_t) {
  std::vector<FmDraw> draws(batch);
  for (auto& d : draws) {
    d.t = rng.uniform(eps_t, 1.0 - eps_t);
    d.noise.resize(dim);
    for (auto& z : d.noise) z = rng.normal();
  }
  return draws;
}

namespace {

void check_batch(std::span<const FmExample> batch, std::span<const FmDraw> draws) {
  if (batch.empty()) throw ConfigError("fm_loss needs a non-empty batch");
  if (batch.size() != draws.size()) throw ConfigError("fm_loss draw count mismatch");
}

// x_t and the regression target x1 - x0.
void interpolant(const FmExample& ex, const FmDraw& d, std::vector<double>& xt,
                 std::vector<double>& target) {
  if (ex.x0.size() != d.noise.size()) throw ConfigError("fm_loss latent size mismatch");
  xt.resize(ex.x0.size());
  target.resize(ex.x0.size());
  for (std::size_t i = 0; i < xt.size(); ++i) {
    xt[i] = (1.0 - d.t) * ex.x0[i] + d.t * d.noise[i];
    target[i] = d.noise[i] - ex.x0[i];
  }
}

}  // namespace

double fm_loss(const VelocityNet& net, std::span<const double> params,
               std::span<const FmExample> batch, std::span<const FmDraw> draws) {
  check_batch(batch, draws);
  std::vector<double> xt, target;
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    interpolant(batch[b], draws[b], xt, target);
    const auto v = net(params, xt, draws[b].t, batch[b].cond);
    double sq = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = target[i] - v[i];
      sq += d * d;
    }
    total += sq;
  }
  return total / static_cast<double>(batch.size());
}

ad::Var fm_loss(const VelocityNet& net, ad::Var params,
                std::span<const FmExample> batch, std::span<const FmDraw> draws) {
  check_batch(batch, draws);
  ad::Tape& tape = *params.tape();
  std::vector<double> xt, target;
  std::vector<ad::Var> terms;
  terms.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    interpolant(batch[b], draws[b], xt, target);
    ad::Var v = net.forward(params, xt, draws[b].t, batch[b].cond);
    terms.push_back(ad::sqnorm(ad::sub(tape.constant(target), v)));
  }
  return ad::scale(ad::sum_list(terms), 1.0 / static_cast<double>(batch.size()));
}

void FlowTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("flow epochs must be >= 0");
  if (batch < 1) throw ConfigError("flow batch must be >= 1");
  if (!(optim.lr > 0.0)) throw ConfigError("flow learning rate must be > 0");
}

std::vector<double> train_flow(const VelocityNet& net, numcore::ParamVector& params,
                               numcore::AdamState& state, std::span<const FmExample> data,
                               const FlowTrainConfig& config, Rng& rng) {
  config.validate();
  if (data.empty()) throw ConfigError("flow training needs data");
  if (state.m.size() != params.size()) state = numcore::AdamState::zeros(params.size());
  const std::size_t dim = data.front().x0.size();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  const auto bs = static_cast<std::size_t>(config.batch);
  for (int e = 0; e < config.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    int batches = 0;
    for (std::size_t s = 0; s < order.size(); s += bs) {
      std::vector<FmExample> batch;
      for (std::size_t i = s; i < std::min(order.size(), s + bs); ++i) batch.push_back(data[order[i]]);
      const auto draws = draw_fm(batch.size(), dim, rng);
      ad::Tape tape;
      auto p = tape.parameter(params.values());
      auto loss = fm_loss(net, p, batch, draws);
      tape.backward(loss);
      numcore::adamw_step(params.values(), tape.grad(p), state, config.optim);
      total += loss.scalar();
      ++batches;
    }
    history.push_back(total / batches);
  }
  return history;
}

}  // namespace ladi::flowlat

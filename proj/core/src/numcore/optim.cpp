#include "ladi/numcore/optim.hpp"

#include <cmath>
#include <string>

#include "ladi/common.hpp"

namespace ladi::numcore {

void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamState& state, const AdamWConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ConfigError("adamw_step shape mismatch");
  }
  if (!(config.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    params[i] -= config.lr * config.weight_decay * params[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

}  // namespace ladi::numcore

#pragma once

#include <cmath>
#include <vector>

#include "ladi/envs/envs.hpp"
#include "ladi/flowlat/velocity.hpp"
#include "ladi/numcore/params.hpp"
#include "ladi/textpol/policy.hpp"

namespace ladi::fixtures {

// Single affine layer, no hidden units: v = W [x; time features; c] + b.
inline flowlat::VelocityNet linear_velocity(std::size_t dim, std::size_t cond) {
  flowlat::VelocityShape s;
  s.latent_size = dim;
  s.cond_size = cond;
  s.hidden = {};
  return flowlat::VelocityNet(s);
}

// Parameters of linear_velocity that make v constant.
inline std::vector<double> constant_velocity_params(const flowlat::VelocityNet& net,
                                                    const std::vector<double>& v) {
  std::vector<double> p(net.mlp().param_count(), 0.0);
  const std::size_t in = net.mlp().input_size();
  for (std::size_t i = 0; i < v.size(); ++i) p[v.size() * in + i] = v[i];
  return p;
}

// Text-policy parameters whose next-token logits are `logits` at every
// position (output bias only).
inline std::vector<double> fixed_logit_params(const textpol::TextPolicy& policy,
                                              const std::vector<double>& logits) {
  std::vector<double> p(policy.mlp().param_count(), 0.0);
  const std::size_t bias = p.size() - logits.size();
  for (std::size_t i = 0; i < logits.size(); ++i) p[bias + i] = logits[i];
  return p;
}

// Text-policy parameters that emit `tokens[j]` at position j with
// probability 1 to double precision, whatever the question or latent.
inline std::vector<double> scripted_params(const textpol::TextPolicy& policy,
                                           const std::vector<int>& tokens) {
  const auto& sh = policy.shape();
  const std::size_t in = policy.mlp().input_size();
  const std::size_t hidden = sh.hidden;
  std::vector<double> p(policy.mlp().param_count(), 0.0);
  const std::size_t pos0 = sh.question_size + sh.latent_size;
  // Hidden unit j fires only at position j.
  for (std::size_t j = 0; j < tokens.size(); ++j) p[j * in + pos0 + j] = 20.0;
  const std::size_t w2 = hidden * in + hidden;
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    p[w2 + static_cast<std::size_t>(tokens[j]) * hidden + j] = 2000.0;
  }
  return p;
}

inline double uniform_logprob() { return -std::log(static_cast<double>(envs::kVocab)); }

}  // namespace ladi::fixtures

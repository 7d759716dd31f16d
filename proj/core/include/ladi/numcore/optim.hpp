#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ladi::numcore {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  double eps = 1e-8;

  bool operator==(const AdamWConfig&) const = default;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }

  bool operator==(const AdamState&) const = default;
};

// Bias-corrected Adam with decoupled weight decay, applied in place.
// Non-finite gradients abort the update with NumericError before anything
// is modified.
void adamw_step(std::span<double> params, std::span<const double> grads,
                AdamState& state, const AdamWConfig& config);

}  // namespace ladi::numcore

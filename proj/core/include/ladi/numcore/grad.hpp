#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ladi/numcore/autodiff.hpp"

namespace ladi::numcore {

// A differentiable scalar function of one or more parameter vectors. The
// callable receives one parameter leaf per vector, in order.
using LossFn = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

struct ValueAndGrad {
  double value = 0.0;
  std::vector<std::vector<double>> grads;
};

double evaluate(const LossFn& loss,
                std::span<const std::span<const double>> params);

ValueAndGrad value_and_grad(const LossFn& loss,
                            std::span<const std::span<const double>> params);

// Single-vector convenience form.
std::vector<double> grad(const LossFn& loss, std::span<const double> params);

// Worst per-coordinate relative error between grad() and central differences,
// with denominator max(|analytic|, |numeric|, 1e-8). `max_coords` > 0 checks
// an evenly strided subset of coordinates of each vector.
double finite_diff_check(const LossFn& loss,
                         std::span<const std::span<const double>> params,
                         double step, std::size_t max_coords = 0);

double finite_diff_check(const LossFn& loss, std::span<const double> params,
                         double step, std::size_t max_coords = 0);

}  // namespace ladi::numcore

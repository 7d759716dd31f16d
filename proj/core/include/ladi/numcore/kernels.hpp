#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Plain-value kernels. The tape ops call these for their forward pass, so a
// value computed with or without a tape is bit-identical.
namespace ladi::numcore {

void affine_kernel(std::span<const double> params, std::size_t w_offset,
                   std::size_t b_offset, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<double> y);

void embed_mean_kernel(std::span<const double> params, std::size_t offset,
                       std::size_t dim, std::span<const int> ids,
                       std::span<double> y);

double log_sum_exp(std::span<const double> x);
std::vector<double> softmax(std::span<const double> logits);
double log_softmax_at(std::span<const double> logits, int index);
double entropy(std::span<const double> probs);

double clip(double x, double lo, double hi);
double clipped_surrogate(double ratio, double advantage, double eps_low,
                         double eps_high);

double sqdist(std::span<const double> a, std::span<const double> b);

}  // namespace ladi::numcore

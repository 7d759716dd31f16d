#include "ladi/numcore/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ladi::numcore {

void affine_kernel(std::span<const double> params, std::size_t w_offset,
                   std::size_t b_offset, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<double> y) {
  const double* w = params.data() + w_offset;
  const double* b = params.data() + b_offset;
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void embed_mean_kernel(std::span<const double> params, std::size_t offset,
                       std::size_t dim, std::span<const int> ids,
                       std::span<double> y) {
  std::fill(y.begin(), y.end(), 0.0);
  if (ids.empty()) return;
  for (int id : ids) {
    const double* row = params.data() + offset + static_cast<std::size_t>(id) * dim;
    for (std::size_t d = 0; d < dim; ++d) y[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto& v : y) v *= inv;
}

double log_sum_exp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

double log_softmax_at(std::span<const double> logits, int index) {
  return logits[static_cast<std::size_t>(index)] - log_sum_exp(logits);
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

double clipped_surrogate(double ratio, double advantage, double eps_low,
                         double eps_high) {
  const double unclipped = ratio * advantage;
  const double clipped = clip(ratio, 1.0 - eps_low, 1.0 + eps_high) * advantage;
  return std::min(unclipped, clipped);
}

double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace ladi::numcore

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ladi::flowlat {

// B x D grid of continuous values standing in for one reasoning trace,
// stored row-major.
struct LatentBlock {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::optional<int> condition;

  static LatentBlock zeros(std::size_t rows, std::size_t cols) {
    return {rows, cols, std::vector<double>(rows * cols, 0.0), std::nullopt};
  }

  std::size_t size() const { return values.size(); }
  std::span<const double> flat() const { return values; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool all_finite() const;

  bool operator==(const LatentBlock&) const = default;
};

// (1 - t) x0 + t x1, with x0 the data end and x1 the noise end.
LatentBlock interpolate(const LatentBlock& x0, const LatentBlock& x1, double t);

}  // namespace ladi::flowlat

#include "ladi/flowlat/latent.hpp"

#include <algorithm>
#include <cmath>

#include "ladi/common.hpp"

namespace ladi::flowlat {

bool LatentBlock::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

LatentBlock interpolate(const LatentBlock& x0, const LatentBlock& x1, double t) {
  if (x0.rows != x1.rows || x0.cols != x1.cols || x0.size() != x1.size()) {
    throw ConfigError("interpolate: latent shapes differ");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolate: t outside [0, 1]");
  LatentBlock out = x0;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (1.0 - t) * x0.values[i] + t * x1.values[i];
  }
  return out;
}

}  // namespace ladi::flowlat

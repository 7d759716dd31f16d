#include "ladi/guidance/repulsion.hpp"

#include <algorithm>
#include <cmath>

#include "ladi/common.hpp"
#include "ladi/numcore/kernels.hpp"

namespace ladi::guidance {

void GuidanceConfig::validate() const {
  if (!(gamma_max >= 0.0)) throw ConfigError("guidance gamma_max must be >= 0");
}

std::optional<double> bandwidth(std::span<const Latent> latents) {
  const std::size_t n = latents.size();
  if (n < 2) return std::nullopt;
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d.push_back(std::sqrt(numcore::sqdist(latents[i], latents[j])));
    }
  }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  const double median = (m % 2 == 1) ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
  if (!(median > 0.0)) return std::nullopt;
  return median;
}

Latent repulsion_force(std::span<const Latent> latents, std::size_t n,
                       double sigma) {
  if (!(sigma > 0.0)) throw DomainError("repulsion bandwidth must be positive");
  const auto& zn = latents[n];
  Latent force(zn.size(), 0.0);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t m = 0; m < latents.size(); ++m) {
    if (m == n) continue;
    const auto& zm = latents[m];
    const double u = numcore::sqdist(zn, zm) * inv;
    const double coeff = 2.0 * (1.0 - u) * std::exp(-u);
    for (std::size_t i = 0; i < force.size(); ++i) force[i] += coeff * (zn[i] - zm[i]);
  }
  return force;
}

double guidance_scale(const GuidanceConfig& config, int t, int steps) {
  if (steps < 1) throw ConfigError("guidance needs K >= 1");
  if (t < 0 || t > steps) throw DomainError("guidance step index outside [0, K]");
  return config.gamma_max * static_cast<double>(t) / static_cast<double>(steps);
}

double offset_scale(const GuidanceConfig& config, int t, int steps, std::size_t group) {
  double s = guidance_scale(config, t, steps);
  if (config.mean_force && group > 1) s /= static_cast<double>(group - 1);
  if (config.drift) s /= static_cast<double>(steps);
  return s;
}

GuidedMean guided_update(std::span<const double> base_mean,
                         std::span<const Latent> latents, std::size_t n, int t,
                         int steps, const GuidanceConfig& config) {
  GuidedMean out{Latent(base_mean.begin(), base_mean.end()),
                 Latent(base_mean.size(), 0.0)};
  const double gamma = offset_scale(config, t, steps, latents.size());
  if (!config.enabled || gamma == 0.0) return out;
  const auto sigma = bandwidth(latents);
  if (!sigma) return out;
  const auto force = repulsion_force(latents, n, *sigma);
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    out.offset[i] = gamma * force[i];
    out.mean[i] += out.offset[i];
  }
  return out;
}

std::vector<Latent> group_offsets(std::span<const Latent> latents, int t,
                                  int steps, const GuidanceConfig& config) {
  const std::size_t dim = latents.empty() ? 0 : latents.front().size();
  std::vector<Latent> offsets(latents.size(), Latent(dim, 0.0));
  const double gamma = offset_scale(config, t, steps, latents.size());
  if (!config.enabled || gamma == 0.0) return offsets;
  const auto sigma = bandwidth(latents);
  if (!sigma) return offsets;
  for (std::size_t n = 0; n < latents.size(); ++n) {
    auto f = repulsion_force(latents, n, *sigma);
    for (std::size_t i = 0; i < dim; ++i) offsets[n][i] = gamma * f[i];
  }
  return offsets;
}

}  // namespace ladi::guidance

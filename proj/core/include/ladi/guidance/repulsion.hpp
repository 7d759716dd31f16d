#pragma once

#include <optional>
#include <span>
#include <vector>

namespace ladi::guidance {

struct GuidanceConfig {
  double gamma_max = 0.8;
  bool enabled = true;
  // Average the pairwise terms over the N - 1 neighbours instead of summing.
  bool mean_force = true;
  // Treat gamma_t F as a drift and integrate it over one step (times 1/K).
  bool drift = true;

  void validate() const;
  bool operator==(const GuidanceConfig&) const = default;
};

using Latent = std::vector<double>;

// Median of the N(N-1)/2 pairwise Euclidean distances between flattened
// latents. Empty when N < 2 or when every point coincides.
std::optional<double> bandwidth(std::span<const Latent> latents);

// Kernel interaction force on latents[n]:
//   sum_{m != n} 2 (1 - d^2 / 2s^2) exp(-d^2 / 2s^2) (z_n - z_m).
// The coefficient changes sign at d = sqrt(2) s, so far pairs attract weakly.
Latent repulsion_force(std::span<const Latent> latents, std::size_t n,
                       double sigma);

// Time-dependent guidance scale gamma_max * t / K, where t counts denoising
// steps remaining (K at the first step, approaching 0 at the end).
double guidance_scale(const GuidanceConfig& config, int t, int steps);

// Multiplier applied to the force of a group of `group` latents: the
// guidance scale, with the mean_force and drift factors folded in.
double offset_scale(const GuidanceConfig& config, int t, int steps, std::size_t group);

struct GuidedMean {
  Latent mean;
  Latent offset;
};

// base_mean + offset_scale * F(latents[n]). Offset is zero when guidance is
// disabled or the group is degenerate.
GuidedMean guided_update(std::span<const double> base_mean,
                         std::span<const Latent> latents, std::size_t n, int t,
                         int steps, const GuidanceConfig& config);

// Offsets for the whole group at one denoising step; bandwidth is computed
// once from the current group.
std::vector<Latent> group_offsets(std::span<const Latent> latents, int t,
                                  int steps, const GuidanceConfig& config);

}  // namespace ladi::guidance

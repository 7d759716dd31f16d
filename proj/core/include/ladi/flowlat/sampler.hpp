#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ladi/common.hpp"
#include "ladi/flowlat/kernels.hpp"
#include "ladi/flowlat/velocity.hpp"
#include "ladi/guidance/repulsion.hpp"

namespace ladi::flowlat {

enum class SamplerMode { kOde, kSde, kCps };

const char* to_string(SamplerMode m);
SamplerMode sampler_mode_from_string(const std::string& s);

// Contiguous span of stochastic steps. The start index is drawn uniformly
// from [range_lo, range_hi) once per sampled group.
struct SdeWindow {
  int size = 2;
  int range_lo = 0;
  int range_hi = 5;

  bool operator==(const SdeWindow&) const = default;
};

struct SamplerConfig {
  int steps = 10;
  double time_clamp = kDefaultTimeClamp;
  SamplerMode mode = SamplerMode::kCps;
  double noise_level = 0.8;           // a, for the SDE kernel
  std::optional<double> eta;          // CPS strength; empty = calibrated
  std::optional<SdeWindow> window = SdeWindow{};  // empty = every step stochastic
  bool simplified_logprob = true;
  bool cfg = false;                   // classifier-free guidance; must stay off

  void validate() const;
  double resolved_eta() const;
  double dt() const { return 1.0 / steps; }
  // t_k = (K - k) / K for k = 0..K.
  double time_at(int k) const;

  bool operator==(const SamplerConfig&) const = default;
};

struct TrajectoryStep {
  double t = 1.0;
  double dt = 0.1;
  KernelCoeffs kernel;           // coefficients of the transition mean
  std::vector<double> state;     // z at time t
  std::vector<double> mean;      // transition mean, guidance offset included
  std::vector<double> offset;    // guidance offset (frozen for recomputation)
  bool stochastic = false;
  std::optional<double> old_logprob;

  bool operator==(const TrajectoryStep&) const = default;
};

struct DenoisingTrajectory {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> condition;
  std::vector<TrajectoryStep> steps;
  std::vector<double> final_latent;
  int window_start = -1;
  double noise_level = 0.8;
  double time_clamp = kDefaultTimeClamp;
  bool simplified_logprob = true;

  // State reached by step k.
  std::span<const double> next_state(std::size_t k) const;
  std::size_t stochastic_steps() const;

  bool operator==(const DenoisingTrajectory&) const = default;
};

// Samples a group of trajectories step by step. Guidance, when given, is
// applied across the group at every step from the current states.
std::vector<DenoisingTrajectory> sample_group(
    const VelocityNet& net, std::span<const double> params,
    std::span<const double> cond, std::size_t rows, std::size_t cols,
    const SamplerConfig& config, const guidance::GuidanceConfig* guide,
    std::size_t count, Rng& rng);

// Same, from caller-supplied initial states (one per trajectory).
std::vector<DenoisingTrajectory> sample_group_from(
    const VelocityNet& net, std::span<const double> params,
    std::span<const double> cond, std::size_t rows, std::size_t cols,
    const SamplerConfig& config, const guidance::GuidanceConfig* guide,
    std::vector<std::vector<double>> initial, Rng& rng);

DenoisingTrajectory sample_trajectory(const VelocityNet& net,
                                      std::span<const double> params,
                                      std::span<const double> cond,
                                      std::size_t rows, std::size_t cols,
                                      const SamplerConfig& config, Rng& rng);

inline constexpr const char* kTrajectoryMagic = "LADITRAJ";

void save_trajectories(const std::filesystem::path& path,
                       std::span<const DenoisingTrajectory> trajectories);
std::vector<DenoisingTrajectory> load_trajectories(const std::filesystem::path& path);

}  // namespace ladi::flowlat

#include "ladi/flowlat/sampler.hpp"

#include "ladi/numcore/checkpoint.hpp"

namespace ladi::flowlat {

const char* to_string(SamplerMode m) {
  switch (m) {
    case SamplerMode::kOde: return "ode";
    case SamplerMode::kSde: return "sde";
    case SamplerMode::kCps: return "cps";
  }
  return "?";
}

SamplerMode sampler_mode_from_string(const std::string& s) {
  if (s == "ode") return SamplerMode::kOde;
  if (s == "sde") return SamplerMode::kSde;
  if (s == "cps") return SamplerMode::kCps;
  throw ConfigError("unknown sampler mode: " + s);
}

void SamplerConfig::validate() const {
  if (steps < 1) throw ConfigError("sampler needs at least one step");
  if (!(time_clamp > 0.0 && time_clamp < 0.5)) throw ConfigError("time clamp must lie in (0, 0.5)");
  if (!(noise_level >= 0.0)) throw ConfigError("noise level a must be >= 0");
  if (eta && !(*eta >= 0.0 && *eta <= 1.0)) throw ConfigError("CPS eta must lie in [0, 1]");
  if (cfg) throw ConfigError("classifier-free guidance is not supported");
  if (window) {
    const auto& w = *window;
    if (w.size < 1 || w.size > steps) throw ConfigError("SDE window size must lie in [1, K]");
    if (w.range_lo < 0 || w.range_hi <= w.range_lo) throw ConfigError("SDE window range must be non-empty");
    if (w.range_hi - 1 + w.size > steps) throw ConfigError("SDE window may extend past the last step");
  }
}

double SamplerConfig::resolved_eta() const {
  return eta ? *eta : default_cps_eta(noise_level, steps);
}

double SamplerConfig::time_at(int k) const {
  return static_cast<double>(steps - k) / static_cast<double>(steps);
}

std::span<const double> DenoisingTrajectory::next_state(std::size_t k) const {
  if (k + 1 < steps.size()) return steps[k + 1].state;
  return final_latent;
}

std::size_t DenoisingTrajectory::stochastic_steps() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.stochastic ? 1 : 0;
  return n;
}

std::vector<DenoisingTrajectory> sample_group(
    const VelocityNet& net, std::span<const double> params,
    std::span<const double> cond, std::size_t rows, std::size_t cols,
    const SamplerConfig& config, const guidance::GuidanceConfig* guide,
    std::size_t count, Rng& rng) {
  std::vector<std::vector<double>> initial(count, std::vector<double>(rows * cols));
  for (auto& z : initial) {
    for (auto& v : z) v = rng.normal();
  }
  return sample_group_from(net, params, cond, rows, cols, config, guide,
                           std::move(initial), rng);
}

std::vector<DenoisingTrajectory> sample_group_from(
    const VelocityNet& net, std::span<const double> params,
    std::span<const double> cond, std::size_t rows, std::size_t cols,
    const SamplerConfig& config, const guidance::GuidanceConfig* guide,
    std::vector<std::vector<double>> initial, Rng& rng) {
  config.validate();
  const std::size_t dim = rows * cols;
  if (dim != net.shape().latent_size) throw ConfigError("latent block does not match velocity net");
  const std::size_t count = initial.size();
  const int K = config.steps;

  int window_start = -1;
  if (config.mode != SamplerMode::kOde && config.window) {
    window_start = rng.integer(config.window->range_lo, config.window->range_hi);
  }
  auto is_stochastic = [&](int k) {
    if (config.mode == SamplerMode::kOde) return false;
    if (!config.window) return true;
    return k >= window_start && k < window_start + config.window->size;
  };
  const double eta = config.mode == SamplerMode::kCps ? config.resolved_eta() : 0.0;
  const bool guided = guide != nullptr && guide->enabled && count >= 2;

  std::vector<DenoisingTrajectory> out(count);
  for (auto& tr : out) {
    tr.rows = rows;
    tr.cols = cols;
    tr.condition.assign(cond.begin(), cond.end());
    tr.window_start = window_start;
    tr.noise_level = config.noise_level;
    tr.time_clamp = config.time_clamp;
    tr.simplified_logprob = config.simplified_logprob;
    tr.steps.reserve(static_cast<std::size_t>(K));
  }
  std::vector<std::vector<double>> states = std::move(initial);
  for (const auto& z : states) {
    if (z.size() != dim) throw ConfigError("initial state has the wrong size");
  }

  const double dt = config.dt();
  for (int k = 0; k < K; ++k) {
    const double t = config.time_at(k);
    const bool stochastic = is_stochastic(k);
    KernelCoeffs kc = ode_coeffs(dt);
    if (stochastic) {
      kc = config.mode == SamplerMode::kSde
               ? sde_coeffs(t, dt, config.noise_level, config.time_clamp)
               : cps_coeffs(t, dt, eta);
    }
    std::vector<guidance::Latent> offsets;
    if (guided) {
      offsets = guidance::group_offsets(states, K - k, K, *guide);
    } else {
      offsets.assign(count, guidance::Latent(dim, 0.0));
    }
    for (std::size_t n = 0; n < count; ++n) {
      TrajectoryStep step;
      step.t = t;
      step.dt = dt;
      step.kernel = kc;
      step.state = states[n];
      step.stochastic = stochastic;
      step.mean = kernel_mean(kc, states[n], net(params, states[n], t, cond));
      for (std::size_t i = 0; i < dim; ++i) step.mean[i] += offsets[n][i];
      step.offset = std::move(offsets[n]);
      std::vector<double> next = step.mean;
      if (stochastic) {
        for (auto& v : next) v += kc.std * rng.normal();
        step.old_logprob = transition_logprob(next, step.mean, kc.std,
                                              config.simplified_logprob);
      }
      out[n].steps.push_back(std::move(step));
      states[n] = std::move(next);
    }
  }
  for (std::size_t n = 0; n < count; ++n) out[n].final_latent = std::move(states[n]);
  return out;
}

DenoisingTrajectory sample_trajectory(const VelocityNet& net,
                                      std::span<const double> params,
                                      std::span<const double> cond,
                                      std::size_t rows, std::size_t cols,
                                      const SamplerConfig& config, Rng& rng) {
  return std::move(sample_group(net, params, cond, rows, cols, config, nullptr, 1, rng).front());
}

void save_trajectories(const std::filesystem::path& path,
                       std::span<const DenoisingTrajectory> trajectories) {
  numcore::Container c;
  c.magic = kTrajectoryMagic;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& tr : trajectories) {
    std::vector<bool> stochastic, has_logprob;
    for (const auto& s : tr.steps) {
      stochastic.push_back(s.stochastic);
      has_logprob.push_back(s.old_logprob.has_value());
    }
    items.push_back({{"rows", tr.rows},
                     {"cols", tr.cols},
                     {"cond_size", tr.condition.size()},
                     {"steps", tr.steps.size()},
                     {"window_start", tr.window_start},
                     {"noise_level", tr.noise_level},
                     {"time_clamp", tr.time_clamp},
                     {"simplified_logprob", tr.simplified_logprob},
                     {"stochastic", stochastic},
                     {"has_logprob", has_logprob}});
    auto& p = c.payload;
    p.insert(p.end(), tr.condition.begin(), tr.condition.end());
    for (const auto& s : tr.steps) {
      p.insert(p.end(), {s.t, s.dt, s.kernel.state, s.kernel.velocity, s.kernel.std,
                         s.old_logprob.value_or(0.0)});
      p.insert(p.end(), s.state.begin(), s.state.end());
      p.insert(p.end(), s.mean.begin(), s.mean.end());
      p.insert(p.end(), s.offset.begin(), s.offset.end());
    }
    p.insert(p.end(), tr.final_latent.begin(), tr.final_latent.end());
  }
  c.header = {{"kind", "trajectories"}, {"items", items}};
  numcore::write_container(path, c);
}

std::vector<DenoisingTrajectory> load_trajectories(const std::filesystem::path& path) {
  const auto c = numcore::read_container(path, kTrajectoryMagic);
  if (c.header.value("kind", "") != "trajectories") throw DataError("not a trajectory file");
  std::vector<DenoisingTrajectory> out;
  std::size_t pos = 0;
  auto take = [&](std::size_t n) {
    if (pos + n > c.payload.size()) throw DataError("trajectory payload too short");
    std::vector<double> v(c.payload.begin() + static_cast<std::ptrdiff_t>(pos),
                          c.payload.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return v;
  };
  for (const auto& it : c.header.at("items")) {
    DenoisingTrajectory tr;
    tr.rows = it.at("rows").get<std::size_t>();
    tr.cols = it.at("cols").get<std::size_t>();
    tr.window_start = it.at("window_start").get<int>();
    tr.noise_level = it.at("noise_level").get<double>();
    tr.time_clamp = it.at("time_clamp").get<double>();
    tr.simplified_logprob = it.at("simplified_logprob").get<bool>();
    const auto stochastic = it.at("stochastic").get<std::vector<bool>>();
    const auto has_logprob = it.at("has_logprob").get<std::vector<bool>>();
    const std::size_t dim = tr.rows * tr.cols;
    tr.condition = take(it.at("cond_size").get<std::size_t>());
    const auto steps = it.at("steps").get<std::size_t>();
    for (std::size_t k = 0; k < steps; ++k) {
      TrajectoryStep s;
      const auto head = take(6);
      s.t = head[0];
      s.dt = head[1];
      s.kernel = {head[2], head[3], head[4]};
      if (has_logprob.at(k)) s.old_logprob = head[5];
      s.stochastic = stochastic.at(k);
      s.state = take(dim);
      s.mean = take(dim);
      s.offset = take(dim);
      tr.steps.push_back(std::move(s));
    }
    tr.final_latent = take(dim);
    out.push_back(std::move(tr));
  }
  if (pos != c.payload.size()) throw DataError("trajectory payload has trailing data");
  return out;
}

}  // namespace ladi::flowlat

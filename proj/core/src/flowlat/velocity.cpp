#include "ladi/flowlat/velocity.hpp"

#include <cmath>
#include <numbers>

namespace ladi::flowlat {

VelocityNet::VelocityNet(VelocityShape shape) : shape_(std::move(shape)) {
  if (shape_.latent_size == 0) throw ConfigError("velocity latent size must be > 0");
  if (!(shape_.input_scale > 0.0) || !(shape_.output_scale > 0.0)) {
    throw ConfigError("velocity scales must be positive");
  }
  std::vector<std::size_t> widths;
  widths.push_back(shape_.latent_size + kTimeFeatures + shape_.cond_size);
  widths.insert(widths.end(), shape_.hidden.begin(), shape_.hidden.end());
  widths.push_back(shape_.latent_size);
  mlp_ = numcore::MlpSpec::tanh_net(std::move(widths));
}

numcore::ParamVector VelocityNet::init(Rng& rng) const {
  numcore::ParamVector p;
  numcore::append_mlp(p, mlp_, "velocity", rng);
  return p;
}

std::vector<double> VelocityNet::features(std::span<const double> x, double t,
                                          std::span<const double> cond) const {
  if (x.size() != shape_.latent_size || cond.size() != shape_.cond_size) {
    throw ConfigError("velocity input dimension mismatch");
  }
  std::vector<double> f;
  f.reserve(mlp_.input_size());
  const double inv = 1.0 / shape_.input_scale;
  for (double v : x) f.push_back(v * inv);
  const double pi = std::numbers::pi;
  f.push_back(t);
  f.push_back(std::sin(pi * t));
  f.push_back(std::cos(pi * t));
  f.push_back(std::sin(2.0 * pi * t));
  f.insert(f.end(), cond.begin(), cond.end());
  return f;
}

std::vector<double> VelocityNet::operator()(std::span<const double> params,
                                            std::span<const double> x, double t,
                                            std::span<const double> cond) const {
  auto out = numcore::mlp_forward(mlp_, params, 0, features(x, t, cond));
  for (auto& v : out) v *= shape_.output_scale;
  return out;
}

ad::Var VelocityNet::forward(ad::Var params, std::span<const double> x, double t,
                             std::span<const double> cond) const {
  ad::Tape& tape = *params.tape();
  ad::Var in = tape.constant(features(x, t, cond));
  return ad::scale(numcore::mlp_forward(mlp_, params, 0, in), shape_.output_scale);
}

nlohmann::json VelocityNet::describe() const {
  return {{"latent_size", shape_.latent_size},
          {"cond_size", shape_.cond_size},
          {"hidden", shape_.hidden},
          {"input_scale", shape_.input_scale},
          {"output_scale", shape_.output_scale},
          {"widths", mlp_.widths}};
}

VelocityNet VelocityNet::from_description(const nlohmann::json& j) {
  try {
    VelocityShape s;
    s.latent_size = j.at("latent_size").get<std::size_t>();
    s.cond_size = j.at("cond_size").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    s.input_scale = j.at("input_scale").get<double>();
    s.output_scale = j.at("output_scale").get<double>();
    return VelocityNet(s);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed velocity description: ") + e.what());
  }
}

}  // namespace ladi::flowlat

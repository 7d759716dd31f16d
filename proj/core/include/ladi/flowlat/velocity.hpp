#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ladi/common.hpp"
#include "ladi/numcore/autodiff.hpp"
#include "ladi/numcore/mlp.hpp"
#include "ladi/numcore/params.hpp"

namespace ladi::flowlat {

struct VelocityShape {
  std::size_t latent_size = 32;
  std::size_t cond_size = 10;
  std::vector<std::size_t> hidden = {64, 64};
  // Fixed preconditioning: the network sees x / input_scale and its output is
  // multiplied by output_scale.
  double input_scale = 1.0;
  double output_scale = 1.0;

  bool operator==(const VelocityShape&) const = default;
};

inline constexpr std::size_t kTimeFeatures = 4;

// Conditional velocity field v(x, t, c) as a tanh MLP.
class VelocityNet {
 public:
  VelocityNet() = default;
  explicit VelocityNet(VelocityShape shape);

  const VelocityShape& shape() const { return shape_; }
  const numcore::MlpSpec& mlp() const { return mlp_; }

  numcore::ParamVector init(Rng& rng) const;

  std::vector<double> operator()(std::span<const double> params,
                                 std::span<const double> x, double t,
                                 std::span<const double> cond) const;

  ad::Var forward(ad::Var params, std::span<const double> x, double t,
                  std::span<const double> cond) const;

  std::vector<double> features(std::span<const double> x, double t,
                               std::span<const double> cond) const;

  nlohmann::json describe() const;
  static VelocityNet from_description(const nlohmann::json& j);

 private:
  VelocityShape shape_;
  numcore::MlpSpec mlp_;
};

}  // namespace ladi::flowlat

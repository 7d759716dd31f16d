#pragma once

#include <span>
#include <vector>

#include "ladi/common.hpp"
#include "ladi/flowlat/kernels.hpp"
#include "ladi/flowlat/velocity.hpp"
#include "ladi/numcore/optim.hpp"

namespace ladi::flowlat {

struct FmExample {
  std::vector<double> x0;    // data-end latent
  std::vector<double> cond;  // condition features
};

// Monte-Carlo draws for one FM loss evaluation, kept separate so the same
// draws can be replayed (finite differences, batch permutations).
struct FmDraw {
  double t = 0.5;
  std::vector<double> noise;  // x1 ~ N(0, I)
};

std::vector<FmDraw> draw_fm(std::size_t batch, std::size_t dim, Rng& rng,
                            double eps_t = kDefaultTimeClamp);

// Mean over the batch of |(x1 - x0) - v(x_t, t, c)|^2 with x_t = (1-t) x0 + t x1.
double fm_loss(const VelocityNet& net, std::span<const double> params,
               std::span<const FmExample> batch, std::span<const FmDraw> draws);

ad::Var fm_loss(const VelocityNet& net, ad::Var params,
                std::span<const FmExample> batch, std::span<const FmDraw> draws);

struct FlowTrainConfig {
  int epochs = 200;
  int batch = 64;
  numcore::AdamWConfig optim{1e-3, 0.9, 0.999, 0.0, 1e-8};

  void validate() const;
};

// Plain flow matching on a fixed dataset with fresh draws every batch.
// Returns the mean batch loss of each epoch.
std::vector<double> train_flow(const VelocityNet& net, numcore::ParamVector& params,
                               numcore::AdamState& state, std::span<const FmExample> data,
                               const FlowTrainConfig& config, Rng& rng);

}  // namespace ladi::flowlat

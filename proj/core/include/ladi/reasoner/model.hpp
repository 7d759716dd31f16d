#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ladi/common.hpp"
#include "ladi/envs/envs.hpp"
#include "ladi/flowlat/latent.hpp"
#include "ladi/flowlat/velocity.hpp"
#include "ladi/numcore/autodiff.hpp"
#include "ladi/numcore/mlp.hpp"
#include "ladi/numcore/params.hpp"
#include "ladi/textpol/policy.hpp"

namespace ladi::reasoner {

struct TraceExample {
  envs::Condition question;
  std::vector<int> trace;   // worked solution (the answer digits for modsum)
  std::vector<int> answer;  // trace followed by EOS

  bool operator==(const TraceExample&) const = default;
};

// `per_target` distinct reference solutions for every residue.
std::vector<TraceExample> make_modsum_corpus(const envs::ModSumSpec& spec,
                                             int per_target, Rng& rng);

// Line-delimited JSON: {"question":[target],"trace":[...],"answer":[...]}.
void write_corpus(const std::filesystem::path& path,
                  std::span<const TraceExample> corpus);
std::vector<TraceExample> read_corpus(const std::filesystem::path& path,
                                      const envs::ModSumSpec& spec);

struct VaeShape {
  std::size_t rows = 8;
  std::size_t cols = 4;
  std::size_t max_trace = 8;
  std::size_t embed = 16;
  std::size_t hidden = 64;

  bool operator==(const VaeShape&) const = default;
};

// Encoder: position-specific token embeddings, mean-pooled, then a tanh MLP
// producing (mean, logvar) of the latent block. The text policy is the decoder.
class Vae {
 public:
  Vae() = default;
  explicit Vae(VaeShape shape);

  const VaeShape& shape() const { return shape_; }
  std::size_t latent_size() const { return shape_.rows * shape_.cols; }

  numcore::ParamVector init(Rng& rng) const;

  struct Stats {
    std::vector<double> mean;
    std::vector<double> logvar;
  };
  Stats stats(std::span<const double> params, std::span<const int> trace) const;
  std::pair<ad::Var, ad::Var> stats(ad::Var params, std::span<const int> trace) const;

  nlohmann::json describe() const;
  static Vae from_description(const nlohmann::json& j);

 private:
  std::vector<int> ids(std::span<const int> trace) const;
  std::size_t mlp_offset() const;

  VaeShape shape_;
  numcore::MlpSpec mlp_;
};

// mean + exp(logvar / 2) * noise; the deterministic flag returns the mean.
flowlat::LatentBlock encode_trace(const Vae& vae, std::span<const double> params,
                                  std::span<const int> trace, Rng& rng,
                                  bool deterministic);

struct ModelShape {
  std::size_t rows = 8;
  std::size_t cols = 4;
  std::size_t question_size = 10;
  std::size_t max_len = 8;
  std::size_t text_hidden = 64;
  std::vector<std::size_t> velocity_hidden = {64, 64};
  double velocity_input_scale = 1.0;
  double velocity_output_scale = 1.0;
  std::size_t vae_embed = 16;
  std::size_t vae_hidden = 64;

  bool operator==(const ModelShape&) const = default;
};

// The three networks of the latent-reasoning model.
struct LadiModel {
  flowlat::VelocityNet velocity;
  textpol::TextPolicy text;
  Vae vae;
  std::size_t rows = 0;
  std::size_t cols = 0;

  static LadiModel build(const ModelShape& shape);
  std::size_t latent_size() const { return rows * cols; }
};

struct LadiParams {
  numcore::ParamVector velocity;
  numcore::ParamVector text;
  numcore::ParamVector vae;

  bool operator==(const LadiParams&) const = default;
};

LadiParams init_params(const LadiModel& model, Rng& rng);

}  // namespace ladi::reasoner

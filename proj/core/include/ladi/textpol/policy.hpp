#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ladi/common.hpp"
#include "ladi/envs/envs.hpp"
#include "ladi/numcore/autodiff.hpp"
#include "ladi/numcore/mlp.hpp"
#include "ladi/numcore/params.hpp"

namespace ladi::textpol {

struct TextShape {
  std::size_t question_size = 10;
  std::size_t latent_size = 32;  // 0 for a question-only policy
  std::size_t max_len = 8;       // L_max, EOS included
  std::size_t hidden = 64;

  bool operator==(const TextShape&) const = default;
};

// p(y_j | y_<j, Q, Z): one tanh hidden layer over
//   [question | latent | position one-hot | one-hot of each previous token].
// The output layer starts at zero, so a fresh policy is uniform.
class TextPolicy {
 public:
  TextPolicy() = default;
  explicit TextPolicy(TextShape shape);

  const TextShape& shape() const { return shape_; }
  const numcore::MlpSpec& mlp() const { return mlp_; }
  std::size_t input_size() const { return mlp_.input_size(); }

  numcore::ParamVector init(Rng& rng, const std::string& prefix = "text") const;

  std::vector<double> features(std::span<const int> prefix,
                               std::span<const double> question,
                               std::span<const double> latent) const;

  std::vector<double> logits(std::span<const double> params,
                             std::span<const int> prefix,
                             std::span<const double> question,
                             std::span<const double> latent) const;
  ad::Var logits(ad::Var params, std::span<const int> prefix,
                 std::span<const double> question,
                 std::span<const double> latent) const;
  // Latent as a differentiable node (VAE training).
  ad::Var logits(ad::Var params, std::span<const int> prefix,
                 std::span<const double> question, ad::Var latent) const;

  nlohmann::json describe() const;
  static TextPolicy from_description(const nlohmann::json& j);

 private:
  TextShape shape_;
  numcore::MlpSpec mlp_;
};

std::vector<double> token_distribution(const TextPolicy& policy,
                                       std::span<const double> params,
                                       std::span<const int> prefix,
                                       std::span<const double> question,
                                       std::span<const double> latent);

struct SamplingConfig {
  double temperature = 1.0;
  double top_p = 0.98;
  bool greedy = false;

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

// Smallest set of most-probable tokens whose mass reaches top_p, renormalised;
// everything else is zeroed. Ties are broken by token index.
std::vector<double> nucleus(std::span<const double> probs, double top_p);

struct AnswerSample {
  std::vector<int> tokens;
  std::vector<double> old_logprobs;  // full-support, temperature 1
  std::vector<double> entropies;     // full-support entropy at each position
  double reward = 0.0;

  bool terminated() const { return !tokens.empty() && tokens.back() == envs::kEos; }
  bool operator==(const AnswerSample&) const = default;
};

AnswerSample sample_answer(const TextPolicy& policy, std::span<const double> params,
                           std::span<const double> question,
                           std::span<const double> latent,
                           const SamplingConfig& config, Rng& rng);

std::vector<double> sequence_logprobs(const TextPolicy& policy,
                                      std::span<const double> params,
                                      std::span<const int> tokens,
                                      std::span<const double> question,
                                      std::span<const double> latent);

// One scalar node per position.
std::vector<ad::Var> sequence_logprobs(const TextPolicy& policy, ad::Var params,
                                       std::span<const int> tokens,
                                       std::span<const double> question,
                                       std::span<const double> latent);

// Mean per-token entropy over a set of samples.
double mean_entropy(std::span<const AnswerSample> samples);

}  // namespace ladi::textpol

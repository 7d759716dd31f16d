#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ladi/common.hpp"
#include "ladi/flowlat/fm.hpp"
#include "ladi/flowlat/sampler.hpp"
#include "ladi/numcore/optim.hpp"
#include "ladi/reasoner/model.hpp"
#include "ladi/textpol/policy.hpp"

namespace ladi::reasoner {

// Random draws consumed by one sft_loss evaluation, fixed up front so the
// loss is a deterministic function of the parameters.
struct SftDraws {
  std::vector<std::vector<double>> eps;  // reparameterisation noise per example
  std::vector<flowlat::FmDraw> fm;
};

SftDraws draw_sft(std::size_t batch, std::size_t latent_size, Rng& rng);

struct SftWeights {
  double lambda = 1.0;     // flow-matching weight
  double beta_vae = 3e-3;  // KL(q(z|trace) || N(0, I)) weight

  void validate() const;
  bool operator==(const SftWeights&) const = default;
};

struct SftTerms {
  ad::Var total;
  ad::Var fm;
  ad::Var ce;
  ad::Var kl;
};

// lambda * FM(encoded latents, detached) + mean per-token answer NLL
// + beta_vae * mean KL of the encoder posterior.
SftTerms sft_loss(const LadiModel& model, ad::Var vae, ad::Var velocity, ad::Var text,
                  std::span<const TraceExample> batch, const SftWeights& weights,
                  const SftDraws& draws);

double sft_loss(const LadiModel& model, const LadiParams& params,
                std::span<const TraceExample> batch, const SftWeights& weights,
                const SftDraws& draws);

// Joint epochs update all three networks; the flow epochs that follow update
// only the velocity field against the frozen encoder.
struct SftConfig {
  int epochs = 150;
  int flow_epochs = 6000;
  int batch = 16;
  SftWeights weights;
  numcore::AdamWConfig optim{3e-3, 0.9, 0.999, 0.0, 1e-8};

  void validate() const;
  bool operator==(const SftConfig&) const = default;
};

struct SftRecord {
  int epoch = 0;
  bool flow_only = false;
  double loss = 0.0;
  double fm = 0.0;
  double ce = 0.0;
  double kl = 0.0;
};

struct SftState {
  numcore::AdamState velocity;
  numcore::AdamState text;
  numcore::AdamState vae;
};

std::vector<SftRecord> train_sft(const LadiModel& model, LadiParams& params,
                                 SftState& state, std::span<const TraceExample> corpus,
                                 const SftConfig& config, Rng& rng);

struct Inference {
  flowlat::LatentBlock latent;
  textpol::AnswerSample answer;
};

// Denoise a latent block for the question, then decode an answer from it.
Inference infer(const LadiModel& model, const LadiParams& params,
                const envs::Condition& question, const flowlat::SamplerConfig& sampler,
                const textpol::SamplingConfig& sampling, Rng& rng);

// Per-token accuracy of greedy decoding from the deterministic encoding.
double reconstruction_accuracy(const LadiModel& model, const LadiParams& params,
                               std::span<const TraceExample> corpus);

}  // namespace ladi::reasoner

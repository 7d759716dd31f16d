#include "ladi/reasoner/sft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ladi/numcore/grad.hpp"

namespace ladi::reasoner {

SftDraws draw_sft(std::size_t batch, std::size_t latent_size, Rng& rng) {
  SftDraws d;
  d.eps.assign(batch, std::vector<double>(latent_size));
  for (auto& e : d.eps) {
    for (auto& v : e) v = rng.normal();
  }
  d.fm = flowlat::draw_fm(batch, latent_size, rng);
  return d;
}

void SftWeights::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("SFT lambda must be >= 0");
  if (!(beta_vae >= 0.0)) throw ConfigError("VAE KL weight must be >= 0");
}

void SftConfig::validate() const {
  weights.validate();
  if (epochs < 0 || flow_epochs < 0) throw ConfigError("SFT epochs must be >= 0");
  if (batch < 1) throw ConfigError("SFT batch must be >= 1");
}

SftTerms sft_loss(const LadiModel& model, ad::Var vae, ad::Var velocity, ad::Var text,
                  std::span<const TraceExample> batch, const SftWeights& weights,
                  const SftDraws& draws) {
  weights.validate();
  if (batch.empty()) throw ConfigError("sft_loss needs a non-empty batch");
  if (draws.eps.size() != batch.size() || draws.fm.size() != batch.size()) {
    throw ConfigError("sft_loss draw count mismatch");
  }
  ad::Tape& tape = *vae.tape();
  const std::size_t n = model.latent_size();
  std::vector<ad::Var> nll, kls;
  std::vector<flowlat::FmExample> fm_batch;
  std::size_t tokens = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    auto [mean, logvar] = model.vae.stats(vae, ex.trace);
    ad::Var std = ad::exp(ad::scale(logvar, 0.5));
    ad::Var z = ad::add(mean, ad::mul(std, tape.constant(draws.eps[b])));
    // 0.5 * sum(mu^2 + e^logvar - 1 - logvar)
    kls.push_back(ad::scale(
        ad::add_scalar(ad::sum(ad::sub(ad::add(ad::mul(mean, mean), ad::exp(logvar)), logvar)),
                       -static_cast<double>(n)),
        0.5));
    for (std::size_t j = 0; j < ex.answer.size(); ++j) {
      ad::Var logits = model.text.logits(text, std::span<const int>(ex.answer).first(j),
                                         ex.question.features, z);
      nll.push_back(ad::neg(ad::log_softmax_at(logits, ex.answer[j])));
    }
    tokens += ex.answer.size();
    auto zv = z.value();
    fm_batch.push_back({std::vector<double>(zv.begin(), zv.end()), ex.question.features});
  }
  SftTerms t;
  t.ce = ad::scale(ad::sum_list(nll), 1.0 / static_cast<double>(tokens));
  t.kl = ad::scale(ad::sum_list(kls), 1.0 / static_cast<double>(batch.size()));
  t.fm = flowlat::fm_loss(model.velocity, velocity, fm_batch, draws.fm);
  const std::vector<ad::Var> parts = {ad::scale(t.fm, weights.lambda), t.ce,
                                      ad::scale(t.kl, weights.beta_vae)};
  t.total = ad::sum_list(parts);
  return t;
}

double sft_loss(const LadiModel& model, const LadiParams& params,
                std::span<const TraceExample> batch, const SftWeights& weights,
                const SftDraws& draws) {
  ad::Tape tape;
  ad::Var vae = tape.constant(params.vae.values());
  ad::Var vel = tape.constant(params.velocity.values());
  ad::Var text = tape.constant(params.text.values());
  return sft_loss(model, vae, vel, text, batch, weights, draws).total.scalar();
}

std::vector<SftRecord> train_sft(const LadiModel& model, LadiParams& params,
                                 SftState& state, std::span<const TraceExample> corpus,
                                 const SftConfig& config, Rng& rng) {
  config.validate();
  if (corpus.empty()) throw DataError("SFT corpus is empty");
  if (state.velocity.m.size() != params.velocity.size()) state.velocity = numcore::AdamState::zeros(params.velocity.size());
  if (state.text.m.size() != params.text.size()) state.text = numcore::AdamState::zeros(params.text.size());
  if (state.vae.m.size() != params.vae.size()) state.vae = numcore::AdamState::zeros(params.vae.size());

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<SftRecord> log;
  for (int epoch = 0; epoch < config.epochs + config.flow_epochs; ++epoch) {
    const bool flow_only = epoch >= config.epochs;
    std::shuffle(order.begin(), order.end(), rng.engine());
    SftRecord rec;
    rec.epoch = epoch;
    rec.flow_only = flow_only;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      std::vector<TraceExample> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(corpus[order[i]]);
      const auto draws = draw_sft(batch.size(), model.latent_size(), rng);

      ad::Tape tape;
      ad::Var vel = tape.parameter(params.velocity.values());
      if (flow_only) {
        std::vector<flowlat::FmExample> fm_batch;
        for (std::size_t b = 0; b < batch.size(); ++b) {
          auto st = model.vae.stats(params.vae.values(), batch[b].trace);
          for (std::size_t i = 0; i < st.mean.size(); ++i) {
            st.mean[i] += std::exp(0.5 * st.logvar[i]) * draws.eps[b][i];
          }
          fm_batch.push_back({std::move(st.mean), batch[b].question.features});
        }
        ad::Var fm = flowlat::fm_loss(model.velocity, vel, fm_batch, draws.fm);
        tape.backward(fm);
        numcore::adamw_step(params.velocity.values(), tape.grad(vel), state.velocity, config.optim);
        rec.fm += fm.scalar();
        rec.loss += config.weights.lambda * fm.scalar();
        ++batches;
        continue;
      }
      ad::Var vae = tape.parameter(params.vae.values());
      ad::Var text = tape.parameter(params.text.values());
      const auto terms = sft_loss(model, vae, vel, text, batch, config.weights, draws);
      tape.backward(terms.total);
      numcore::adamw_step(params.vae.values(), tape.grad(vae), state.vae, config.optim);
      numcore::adamw_step(params.text.values(), tape.grad(text), state.text, config.optim);
      numcore::adamw_step(params.velocity.values(), tape.grad(vel), state.velocity, config.optim);
      rec.loss += terms.total.scalar();
      rec.fm += terms.fm.scalar();
      rec.ce += terms.ce.scalar();
      rec.kl += terms.kl.scalar();
      ++batches;
    }
    rec.loss /= batches;
    rec.fm /= batches;
    rec.ce /= batches;
    rec.kl /= batches;
    log.push_back(rec);
  }
  return log;
}

Inference infer(const LadiModel& model, const LadiParams& params,
                const envs::Condition& question, const flowlat::SamplerConfig& sampler,
                const textpol::SamplingConfig& sampling, Rng& rng) {
  const auto tr = flowlat::sample_trajectory(model.velocity, params.velocity.values(),
                                             question.features, model.rows, model.cols,
                                             sampler, rng);
  Inference out;
  out.latent = {model.rows, model.cols, tr.final_latent, question.target};
  out.answer = textpol::sample_answer(model.text, params.text.values(), question.features,
                                     tr.final_latent, sampling, rng);
  return out;
}

double reconstruction_accuracy(const LadiModel& model, const LadiParams& params,
                               std::span<const TraceExample> corpus) {
  std::size_t hit = 0, total = 0;
  Rng unused(0);
  textpol::SamplingConfig greedy;
  greedy.greedy = true;
  for (const auto& ex : corpus) {
    const auto z = encode_trace(model.vae, params.vae.values(), ex.trace, unused, true);
    const auto s = textpol::sample_answer(model.text, params.text.values(),
                                          ex.question.features, z.values, greedy, unused);
    for (std::size_t j = 0; j < ex.answer.size(); ++j) {
      hit += (j < s.tokens.size() && s.tokens[j] == ex.answer[j]) ? 1 : 0;
    }
    total += ex.answer.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace ladi::reasoner

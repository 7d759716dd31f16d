#include "ladi/textpol/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ladi/numcore/kernels.hpp"

namespace ladi::textpol {

using envs::kVocab;

TextPolicy::TextPolicy(TextShape shape) : shape_(std::move(shape)) {
  if (shape_.max_len < 1) throw ConfigError("text max length must be >= 1");
  if (shape_.hidden == 0) throw ConfigError("text hidden width must be > 0");
  const std::size_t in = shape_.question_size + shape_.latent_size + shape_.max_len +
                         (shape_.max_len - 1) * kVocab;
  mlp_ = numcore::MlpSpec::tanh_net({in, shape_.hidden, static_cast<std::size_t>(kVocab)});
}

numcore::ParamVector TextPolicy::init(Rng& rng, const std::string& prefix) const {
  numcore::ParamVector p;
  numcore::append_mlp(p, mlp_, prefix, rng, true);
  return p;
}

std::vector<double> TextPolicy::features(std::span<const int> prefix,
                                         std::span<const double> question,
                                         std::span<const double> latent) const {
  if (question.size() != shape_.question_size || latent.size() != shape_.latent_size) {
    throw ConfigError("text policy input dimension mismatch");
  }
  if (prefix.size() >= shape_.max_len) throw InputError("prefix reaches the maximum answer length");
  std::vector<double> f(mlp_.input_size(), 0.0);
  std::size_t o = 0;
  std::copy(question.begin(), question.end(), f.begin());
  o += question.size();
  std::copy(latent.begin(), latent.end(), f.begin() + static_cast<std::ptrdiff_t>(o));
  o += latent.size();
  f[o + prefix.size()] = 1.0;
  o += shape_.max_len;
  for (std::size_t j = 0; j < prefix.size(); ++j) {
    const int tok = prefix[j];
    if (tok < 0 || tok >= kVocab) throw InputError("token outside the vocabulary");
    f[o + j * kVocab + static_cast<std::size_t>(tok)] = 1.0;
  }
  return f;
}

std::vector<double> TextPolicy::logits(std::span<const double> params,
                                       std::span<const int> prefix,
                                       std::span<const double> question,
                                       std::span<const double> latent) const {
  return numcore::mlp_forward(mlp_, params, 0, features(prefix, question, latent));
}

ad::Var TextPolicy::logits(ad::Var params, std::span<const int> prefix,
                           std::span<const double> question,
                           std::span<const double> latent) const {
  ad::Var in = params.tape()->constant(features(prefix, question, latent));
  return numcore::mlp_forward(mlp_, params, 0, in);
}

ad::Var TextPolicy::logits(ad::Var params, std::span<const int> prefix,
                           std::span<const double> question, ad::Var latent) const {
  const std::vector<double> zeros(shape_.latent_size, 0.0);
  auto f = features(prefix, question, zeros);
  ad::Tape& tape = *params.tape();
  const std::size_t q = shape_.question_size, l = shape_.latent_size;
  const std::vector<ad::Var> parts = {
      tape.constant(std::span<const double>(f).first(q)), latent,
      tape.constant(std::span<const double>(f).subspan(q + l))};
  return numcore::mlp_forward(mlp_, params, 0, ad::concat(parts));
}

nlohmann::json TextPolicy::describe() const {
  return {{"question_size", shape_.question_size},
          {"latent_size", shape_.latent_size},
          {"max_len", shape_.max_len},
          {"hidden", shape_.hidden},
          {"vocab", kVocab}};
}

TextPolicy TextPolicy::from_description(const nlohmann::json& j) {
  try {
    if (j.at("vocab").get<int>() != kVocab) throw DataError("text policy vocabulary mismatch");
    TextShape s;
    s.question_size = j.at("question_size").get<std::size_t>();
    s.latent_size = j.at("latent_size").get<std::size_t>();
    s.max_len = j.at("max_len").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::size_t>();
    return TextPolicy(s);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed text policy description: ") + e.what());
  }
}

std::vector<double> token_distribution(const TextPolicy& policy,
                                       std::span<const double> params,
                                       std::span<const int> prefix,
                                       std::span<const double> question,
                                       std::span<const double> latent) {
  return numcore::softmax(policy.logits(params, prefix, question, latent));
}

void SamplingConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
}

std::vector<double> nucleus(std::span<const double> probs, double top_p) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<double> out(probs.size(), 0.0);
  double mass = 0.0;
  for (std::size_t i : order) {
    out[i] = probs[i];
    mass += probs[i];
    if (mass >= top_p) break;
  }
  for (auto& p : out) p /= mass;
  return out;
}

namespace {

int draw(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

}  // namespace

AnswerSample sample_answer(const TextPolicy& policy, std::span<const double> params,
                           std::span<const double> question,
                           std::span<const double> latent,
                           const SamplingConfig& config, Rng& rng) {
  config.validate();
  AnswerSample s;
  const std::size_t lmax = policy.shape().max_len;
  while (s.tokens.size() < lmax) {
    const auto logits = policy.logits(params, s.tokens, question, latent);
    const auto probs = numcore::softmax(logits);
    int tok;
    if (config.greedy) {
      tok = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    } else {
      std::vector<double> q;
      if (config.temperature == 1.0) {
        q = probs;
      } else {
        std::vector<double> scaled(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / config.temperature;
        q = numcore::softmax(scaled);
      }
      if (config.top_p < 1.0) q = nucleus(q, config.top_p);
      tok = draw(q, rng);
    }
    s.old_logprobs.push_back(numcore::log_softmax_at(logits, tok));
    s.entropies.push_back(numcore::entropy(probs));
    s.tokens.push_back(tok);
    if (tok == envs::kEos) break;
  }
  return s;
}

std::vector<double> sequence_logprobs(const TextPolicy& policy,
                                      std::span<const double> params,
                                      std::span<const int> tokens,
                                      std::span<const double> question,
                                      std::span<const double> latent) {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto logits = policy.logits(params, tokens.first(j), question, latent);
    out.push_back(numcore::log_softmax_at(logits, tokens[j]));
  }
  return out;
}

std::vector<ad::Var> sequence_logprobs(const TextPolicy& policy, ad::Var params,
                                       std::span<const int> tokens,
                                       std::span<const double> question,
                                       std::span<const double> latent) {
  std::vector<ad::Var> out;
  out.reserve(tokens.size());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    out.push_back(ad::log_softmax_at(
        policy.logits(params, tokens.first(j), question, latent), tokens[j]));
  }
  return out;
}

double mean_entropy(std::span<const AnswerSample> samples) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : samples) {
    for (double h : s.entropies) total += h;
    count += s.entropies.size();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace ladi::textpol

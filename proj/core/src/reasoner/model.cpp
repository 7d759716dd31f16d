#include "ladi/reasoner/model.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "ladi/numcore/kernels.hpp"

namespace ladi::reasoner {

using envs::kEos;
using envs::kVocab;

std::vector<TraceExample> make_modsum_corpus(const envs::ModSumSpec& spec,
                                             int per_target, Rng& rng) {
  if (per_target < 1) throw ConfigError("corpus needs at least one solution per target");
  const double space = std::pow(10.0, spec.length) / spec.modulus;
  if (per_target > space) throw ConfigError("more solutions requested than exist");
  std::vector<TraceExample> out;
  for (int target = 0; target < spec.modulus; ++target) {
    std::set<std::vector<int>> seen;
    while (static_cast<int>(seen.size()) < per_target) {
      std::vector<int> digits(static_cast<std::size_t>(spec.length));
      int sum = 0;
      for (std::size_t i = 0; i + 1 < digits.size(); ++i) {
        digits[i] = rng.integer(0, 10);
        sum += digits[i];
      }
      // Last digit completes the residue; only residues reachable by a digit.
      int last = ((target - sum) % spec.modulus + spec.modulus) % spec.modulus;
      const int extra = rng.integer(0, (9 - last) / spec.modulus + 1);
      last += extra * spec.modulus;
      digits.back() = last;
      if (!seen.insert(digits).second) continue;
      TraceExample ex;
      ex.question = envs::modsum_question(spec, target);
      ex.trace = digits;
      ex.answer = digits;
      ex.answer.push_back(kEos);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& path,
                  std::span<const TraceExample> corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open corpus file for writing: " + path.string());
  for (const auto& ex : corpus) {
    nlohmann::json j = {{"question", {ex.question.target}},
                        {"trace", ex.trace},
                        {"answer", ex.answer}};
    out << j.dump() << '\n';
  }
}

std::vector<TraceExample> read_corpus(const std::filesystem::path& path,
                                      const envs::ModSumSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path.string());
  std::vector<TraceExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    TraceExample ex;
    try {
      const auto q = j.at("question").get<std::vector<int>>();
      if (q.size() != 1) throw DataError(where + ": question must hold one target");
      ex.question = envs::modsum_question(spec, q[0]);
      ex.trace = j.at("trace").get<std::vector<int>>();
      ex.answer = j.at("answer").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DomainError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (envs::modsum_reward(ex.trace, ex.question.target, spec) != 1.0) {
      throw DataError(where + ": reference trace does not verify");
    }
    if (envs::answer_reward(ex.answer, ex.question, spec) != 1.0) {
      throw DataError(where + ": answer does not verify");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Vae::Vae(VaeShape shape) : shape_(shape) {
  if (shape_.rows == 0 || shape_.cols == 0) throw ConfigError("latent block must be non-empty");
  if (shape_.max_trace == 0 || shape_.embed == 0) throw ConfigError("VAE sizes must be positive");
  mlp_ = numcore::MlpSpec::tanh_net({shape_.embed, shape_.hidden, 2 * latent_size()});
}

numcore::ParamVector Vae::init(Rng& rng) const {
  numcore::ParamVector p;
  p.add_slice("vae.embed", shape_.max_trace * kVocab * shape_.embed);
  const double bound = 1.0;
  for (auto& w : p.view("vae.embed")) w = rng.uniform(-bound, bound);
  numcore::append_mlp(p, mlp_, "vae.enc", rng);
  return p;
}

std::size_t Vae::mlp_offset() const { return shape_.max_trace * kVocab * shape_.embed; }

std::vector<int> Vae::ids(std::span<const int> trace) const {
  if (trace.empty()) throw InputError("cannot encode an empty trace");
  if (trace.size() > shape_.max_trace) {
    throw InputError("trace of length " + std::to_string(trace.size()) +
                     " exceeds the maximum " + std::to_string(shape_.max_trace));
  }
  std::vector<int> out(trace.size());
  for (std::size_t j = 0; j < trace.size(); ++j) {
    if (trace[j] < 0 || trace[j] >= kVocab) throw InputError("trace token outside the vocabulary");
    out[j] = static_cast<int>(j) * kVocab + trace[j];
  }
  return out;
}

Vae::Stats Vae::stats(std::span<const double> params, std::span<const int> trace) const {
  const auto id = ids(trace);
  std::vector<double> pooled(shape_.embed);
  numcore::embed_mean_kernel(params, 0, shape_.embed, id, pooled);
  const auto out = numcore::mlp_forward(mlp_, params, mlp_offset(), pooled);
  const std::size_t n = latent_size();
  return {std::vector<double>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n)),
          std::vector<double>(out.begin() + static_cast<std::ptrdiff_t>(n), out.end())};
}

std::pair<ad::Var, ad::Var> Vae::stats(ad::Var params, std::span<const int> trace) const {
  const auto id = ids(trace);
  ad::Var pooled = ad::embed_mean(params, 0, shape_.embed, id);
  ad::Var out = numcore::mlp_forward(mlp_, params, mlp_offset(), pooled);
  const std::size_t n = latent_size();
  return {ad::slice(out, 0, n), ad::slice(out, n, n)};
}

nlohmann::json Vae::describe() const {
  return {{"rows", shape_.rows},
          {"cols", shape_.cols},
          {"max_trace", shape_.max_trace},
          {"embed", shape_.embed},
          {"hidden", shape_.hidden}};
}

Vae Vae::from_description(const nlohmann::json& j) {
  try {
    VaeShape s;
    s.rows = j.at("rows").get<std::size_t>();
    s.cols = j.at("cols").get<std::size_t>();
    s.max_trace = j.at("max_trace").get<std::size_t>();
    s.embed = j.at("embed").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::size_t>();
    return Vae(s);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed encoder description: ") + e.what());
  }
}

flowlat::LatentBlock encode_trace(const Vae& vae, std::span<const double> params,
                                  std::span<const int> trace, Rng& rng,
                                  bool deterministic) {
  auto st = vae.stats(params, trace);
  flowlat::LatentBlock z{vae.shape().rows, vae.shape().cols, std::move(st.mean), std::nullopt};
  if (!deterministic) {
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      z.values[i] += std::exp(0.5 * st.logvar[i]) * rng.normal();
    }
  }
  return z;
}

LadiModel LadiModel::build(const ModelShape& s) {
  LadiModel m;
  m.rows = s.rows;
  m.cols = s.cols;
  m.velocity = flowlat::VelocityNet({s.rows * s.cols, s.question_size, s.velocity_hidden,
                                     s.velocity_input_scale, s.velocity_output_scale});
  m.text = textpol::TextPolicy({s.question_size, s.rows * s.cols, s.max_len, s.text_hidden});
  m.vae = Vae({s.rows, s.cols, s.max_len, s.vae_embed, s.vae_hidden});
  return m;
}

LadiParams init_params(const LadiModel& model, Rng& rng) {
  LadiParams p;
  p.velocity = model.velocity.init(rng);
  p.text = model.text.init(rng);
  p.vae = model.vae.init(rng);
  return p;
}

}  // namespace ladi::reasoner

#include "ladi/numcore/mlp.hpp"

#include <cmath>

#include "ladi/numcore/kernels.hpp"

namespace ladi::numcore {

const char* to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation: " + s);
}

MlpSpec MlpSpec::tanh_net(std::vector<std::size_t> widths) {
  MlpSpec spec;
  spec.widths = std::move(widths);
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    spec.activations.push_back(l + 2 == spec.widths.size() ? Activation::kIdentity
                                                           : Activation::kTanh);
  }
  spec.validate();
  return spec;
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    n += widths[l + 1] * widths[l] + widths[l + 1];
  }
  return n;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("MLP needs at least one layer");
  if (activations.size() + 1 != widths.size()) {
    throw ConfigError("MLP needs one activation per layer");
  }
  for (auto w : widths) {
    if (w == 0) throw ConfigError("MLP layer widths must be positive");
  }
}

std::size_t append_mlp(ParamVector& params, const MlpSpec& spec,
                       const std::string& prefix, Rng& rng, bool zero_output) {
  spec.validate();
  const std::size_t start = params.size();
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    const std::string tag = prefix + ".l" + std::to_string(l);
    params.add_slice(tag + ".w", out * in);
    params.add_slice(tag + ".b", out);
    if (zero_output && l + 1 == spec.layers()) continue;
    const double bound = std::sqrt(3.0 / static_cast<double>(in));
    for (auto& w : params.view(tag + ".w")) w = rng.uniform(-bound, bound);
  }
  return start;
}

std::vector<double> mlp_forward(const MlpSpec& spec,
                                std::span<const double> params,
                                std::size_t offset,
                                std::span<const double> input) {
  if (input.size() != spec.input_size()) {
    throw ConfigError("MLP input has " + std::to_string(input.size()) +
                      " entries, expected " + std::to_string(spec.input_size()));
  }
  if (offset + spec.param_count() > params.size()) {
    throw ConfigError("MLP parameter block out of range");
  }
  std::vector<double> x(input.begin(), input.end());
  std::vector<double> y;
  std::size_t cursor = offset;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    y.assign(out, 0.0);
    affine_kernel(params, cursor, cursor + out * in, out, in, x, y);
    cursor += out * in + out;
    if (spec.activations[l] == Activation::kTanh) {
      for (auto& v : y) v = std::tanh(v);
    }
    x.swap(y);
  }
  return x;
}

ad::Var mlp_forward(const MlpSpec& spec, ad::Var params, std::size_t offset,
                    ad::Var input) {
  if (input.size() != spec.input_size()) {
    throw ConfigError("MLP input has " + std::to_string(input.size()) +
                      " entries, expected " + std::to_string(spec.input_size()));
  }
  ad::Var x = input;
  std::size_t cursor = offset;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    x = ad::affine(params, cursor, cursor + out * in, out, in, x);
    cursor += out * in + out;
    if (spec.activations[l] == Activation::kTanh) x = ad::tanh(x);
  }
  return x;
}

}  // namespace ladi::numcore

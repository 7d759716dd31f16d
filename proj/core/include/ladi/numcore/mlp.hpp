#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ladi/common.hpp"
#include "ladi/numcore/autodiff.hpp"
#include "ladi/numcore/params.hpp"

namespace ladi::numcore {

enum class Activation { kTanh, kIdentity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected network. widths = {in, hidden..., out}; one activation per
// layer (widths.size() - 1 entries). Layer l stores W_l (row-major,
// out x in) followed by b_l, contiguously.
struct MlpSpec {
  std::vector<std::size_t> widths;
  std::vector<Activation> activations;

  // Builds a spec with tanh on hidden layers and identity on the output.
  static MlpSpec tanh_net(std::vector<std::size_t> widths);

  std::size_t layers() const { return activations.size(); }
  std::size_t input_size() const { return widths.front(); }
  std::size_t output_size() const { return widths.back(); }
  std::size_t param_count() const;
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

// Appends one slice per weight matrix and bias vector under `prefix` and
// returns the offset of the block. Weights are scaled-uniform with fan-in
// scaling; biases start at zero. zero_output leaves the last layer at zero.
std::size_t append_mlp(ParamVector& params, const MlpSpec& spec,
                       const std::string& prefix, Rng& rng,
                       bool zero_output = false);

// `params` is the full vector; the MLP block starts at `offset`.
std::vector<double> mlp_forward(const MlpSpec& spec,
                                std::span<const double> params,
                                std::size_t offset,
                                std::span<const double> input);

inline std::vector<double> mlp_forward(const MlpSpec& spec,
                                       std::span<const double> params,
                                       std::span<const double> input) {
  return mlp_forward(spec, params, 0, input);
}

ad::Var mlp_forward(const MlpSpec& spec, ad::Var params, std::size_t offset,
                    ad::Var input);

}  // namespace ladi::numcore

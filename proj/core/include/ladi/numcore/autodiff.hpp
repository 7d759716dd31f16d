#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace ladi::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

  std::size_t size() const;
  std::span<const double> value() const;
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Dynamically recorded computation over small dense vectors. Nodes are
// appended in evaluation order and swept in reverse by backward().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(std::vector<double> value);
  Var constant(std::span<const double> value);
  Var scalar(double value);
  // Differentiable leaf holding a copy of the given values.
  Var parameter(std::span<const double> values);

  // Appends a node. Throws NumericError naming the node if any value is
  // non-finite.
  Var record(const char* op, std::vector<double> value, BackwardFn backward,
             bool requires_grad);

  // Seeds the scalar root with 1 and accumulates gradients into every node
  // that requires them.
  void backward(Var root);

  std::span<const double> value(int id) const { return nodes_[id].value; }
  std::span<const double> grad(Var v) const;
  std::span<double> grad_buffer(int id) { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;
    bool requires_grad;
  };
  std::vector<Node> nodes_;
};

// Elementwise arithmetic on equal-length operands.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
// a * s where s is a scalar node.
Var scale_by(Var a, Var s);
Var add_scalar(Var a, double c);

Var tanh(Var a);
Var exp(Var a);

// Reductions to a size-1 node.
Var sum(Var a);
Var sqnorm(Var a);
Var dot(Var a, Var b);
Var sum_list(std::span<const Var> scalars);

Var concat(std::span<const Var> parts);
Var slice(Var a, std::size_t offset, std::size_t length);

// y = W x + b with W (rows x cols, row-major) at params[w_offset] and b at
// params[b_offset].
Var affine(Var params, std::size_t w_offset, std::size_t b_offset,
           std::size_t rows, std::size_t cols, Var x);

// Mean of the embedding columns selected by ids from a table of `dim`-wide
// rows stored at params[offset].
Var embed_mean(Var params, std::size_t offset, std::size_t dim,
               std::span<const int> ids);

// log softmax(logits)[index].
Var log_softmax_at(Var logits, int index);

// min(r * A, clip(r, 1 - lo, 1 + hi) * A) for a scalar ratio node.
Var clipped_surrogate(Var ratio, double advantage, double eps_low,
                      double eps_high);

}  // namespace ladi::ad

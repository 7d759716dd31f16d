#include "ladi/numcore/autodiff.hpp"

#include <cmath>
#include <string>

#include "ladi/common.hpp"
#include "ladi/numcore/kernels.hpp"

namespace ladi::ad {

std::size_t Var::size() const { return tape_->value(id_).size(); }

std::span<const double> Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  auto v = value();
  if (v.size() != 1) throw ConfigError("scalar() on a non-scalar node");
  return v[0];
}

Var Tape::constant(std::vector<double> value) {
  return record("const", std::move(value), nullptr, false);
}

Var Tape::constant(std::span<const double> value) {
  return constant(std::vector<double>(value.begin(), value.end()));
}

Var Tape::scalar(double value) { return constant(std::vector<double>{value}); }

Var Tape::parameter(std::span<const double> values) {
  return record("param", std::vector<double>(values.begin(), values.end()),
                nullptr, true);
}

Var Tape::record(const char* op, std::vector<double> value, BackwardFn backward,
                 bool requires_grad) {
  for (double v : value) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value at node #" +
                         std::to_string(nodes_.size()) + " (op " + op + ")");
    }
  }
  nodes_.push_back(Node{op, std::move(value), {}, std::move(backward),
                        requires_grad});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ConfigError("backward() on a foreign node");
  if (nodes_[root.id()].value.size() != 1) {
    throw ConfigError("backward() requires a scalar root");
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad.assign(n.value.size(), 0.0);
  }
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad[0] = 1.0;
  for (int i = root.id(); i >= 0; --i) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    for (double g : n.grad) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient at node #" + std::to_string(i) +
                           " (op " + n.op + ")");
      }
    }
    n.backward(*this, i);
  }
}

std::span<const double> Tape::grad(Var v) const {
  const auto& n = nodes_[v.id()];
  return n.grad;
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw ConfigError("operands live on different tapes");
  }
  return *a.tape();
}

void check_sizes(Var a, Var b, const char* op) {
  if (a.size() != b.size()) {
    throw ConfigError(std::string("size mismatch in ") + op + ": " +
                      std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
}

// Adds `g` into the gradient of node `id` when it tracks one.
void accumulate(Tape& t, int id, std::span<const double> g) {
  if (!t.requires_grad(id)) return;
  auto dst = t.grad_buffer(id);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_sizes(a, b, "add");
  std::vector<double> out(a.size());
  auto av = a.value();
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const int ia = a.id(), ib = b.id();
  return t.record(
      "add", std::move(out),
      [ia, ib](Tape& tp, int self) {
        auto g = tp.grad_buffer(self);
        accumulate(tp, ia, g);
        accumulate(tp, ib, g);
      },
      t.requires_grad(ia) || t.requires_grad(ib));
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_sizes(a, b, "sub");
  std::vector<double> out(a.size());
  auto av = a.value();
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const int ia = a.id(), ib = b.id();
  return t.record(
      "sub", std::move(out),
      [ia, ib](Tape& tp, int self) {
        auto g = tp.grad_buffer(self);
        accumulate(tp, ia, g);
        if (tp.requires_grad(ib)) {
          auto dst = tp.grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) dst[i] -= g[i];
        }
      },
      t.requires_grad(ia) || t.requires_grad(ib));
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_sizes(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.value();
  auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  return t.record(
      "mul", std::move(out),
      [ia, ib](Tape& tp, int self) {
        auto g = tp.grad_buffer(self);
        auto av = tp.value(ia);
        auto bv = tp.value(ib);
        if (tp.requires_grad(ia)) {
          auto dst = tp.grad_buffer(ia);
          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * bv[i];
        }
        if (tp.requires_grad(ib)) {
          auto dst = tp.grad_buffer(ib);
          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * av[i];
        }
      },
      t.requires_grad(ia) || t.requires_grad(ib));
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
  Tape& t = *a.tape();
  std::vector<double> out(a.value().begin(), a.value().end());
  for (auto& v : out) v *= c;
  const int ia = a.id();
  return t.record(
      "scale", std::move(out),
      [ia, c](Tape& tp, int self) {
        if (!tp.requires_grad(ia)) return;
        auto g = tp.grad_buffer(self);
        auto dst = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * c;
      },
      t.requires_grad(ia));
}

Var scale_by(Var a, Var s) {
  Tape& t = same_tape(a, s);
  if (s.size() != 1) throw ConfigError("scale_by expects a scalar factor");
  const double c = s.scalar();
  std::vector<double> out(a.value().begin(), a.value().end());
  for (auto& v : out) v *= c;
  const int ia = a.id(), is = s.id();
  return t.record(
      "scale_by", std::move(out),
      [ia, is](Tape& tp, int self) {
        auto g = tp.grad_buffer(self);
        auto av = tp.value(ia);
        const double c = tp.value(is)[0];
        if (tp.requires_grad(ia)) {
          auto dst = tp.grad_buffer(ia);
          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * c;
        }
        if (tp.requires_grad(is)) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
          tp.grad_buffer(is)[0] += acc;
        }
      },
      t.requires_grad(ia) || t.requires_grad(is));
}

Var add_scalar(Var a, double c) {
  Tape& t = *a.tape();
  std::vector<double> out(a.value().begin(), a.value().end());
  for (auto& v : out) v += c;
  const int ia = a.id();
  return t.record(
      "add_scalar", std::move(out),
      [ia](Tape& tp, int self) { accumulate(tp, ia, tp.grad_buffer(self)); },
      t.requires_grad(ia));
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  std::vector<double> out(a.value().begin(), a.value().end());
  for (auto& v : out) v = std::tanh(v);
  const int ia = a.id();
  return t.record(
      "tanh", std::move(out),
      [ia](Tape& tp, int self) {
        if (!tp.requires_grad(ia)) return;
        auto g = tp.grad_buffer(self);
        auto y = tp.value(self);
        auto dst = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * (1.0 - y[i] * y[i]);
      },
      t.requires_grad(ia));
}

Var exp(Var a) {
  Tape& t = *a.tape();
  std::vector<double> out(a.value().begin(), a.value().end());
  for (auto& v : out) v = std::exp(v);
  const int ia = a.id();
  return t.record(
      "exp", std::move(out),
      [ia](Tape& tp, int self) {
        if (!tp.requires_grad(ia)) return;
        auto g = tp.grad_buffer(self);
        auto y = tp.value(self);
        auto dst = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * y[i];
      },
      t.requires_grad(ia));
}

Var sum(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value()) s += v;
  const int ia = a.id();
  return t.record(
      "sum", {s},
      [ia](Tape& tp, int self) {
        if (!tp.requires_grad(ia)) return;
        const double g = tp.grad_buffer(self)[0];
        for (auto& d : tp.grad_buffer(ia)) d += g;
      },
      t.requires_grad(ia));
}

Var sqnorm(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value()) s += v * v;
  const int ia = a.id();
  return t.record(
      "sqnorm", {s},
      [ia](Tape& tp, int self) {
        if (!tp.requires_grad(ia)) return;
        const double g = tp.grad_buffer(self)[0];
        auto av = tp.value(ia);
        auto dst = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < av.size(); ++i) dst[i] += 2.0 * g * av[i];
      },
      t.requires_grad(ia));
}

Var dot(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_sizes(a, b, "dot");
  double s = 0.0;
  auto av = a.value();
  auto bv = b.value();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  return t.record(
      "dot", {s},
      [ia, ib](Tape& tp, int self) {
        const double g = tp.grad_buffer(self)[0];
        auto av = tp.value(ia);
        auto bv = tp.value(ib);
        if (tp.requires_grad(ia)) {
          auto dst = tp.grad_buffer(ia);
          for (std::size_t i = 0; i < av.size(); ++i) dst[i] += g * bv[i];
        }
        if (tp.requires_grad(ib)) {
          auto dst = tp.grad_buffer(ib);
          for (std::size_t i = 0; i < av.size(); ++i) dst[i] += g * av[i];
        }
      },
      t.requires_grad(ia) || t.requires_grad(ib));
}

Var sum_list(std::span<const Var> scalars) {
  if (scalars.empty()) throw ConfigError("sum_list of an empty list");
  Tape& t = *scalars.front().tape();
  double s = 0.0;
  bool rg = false;
  std::vector<int> ids;
  ids.reserve(scalars.size());
  for (const Var& v : scalars) {
    if (v.tape() != &t) throw ConfigError("operands live on different tapes");
    if (v.size() != 1) throw ConfigError("sum_list expects scalar nodes");
    s += v.scalar();
    rg = rg || t.requires_grad(v.id());
    ids.push_back(v.id());
  }
  return t.record(
      "sum_list", {s},
      [ids = std::move(ids)](Tape& tp, int self) {
        const double g = tp.grad_buffer(self)[0];
        for (int id : ids) {
          if (tp.requires_grad(id)) tp.grad_buffer(id)[0] += g;
        }
      },
      rg);
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat of an empty list");
  Tape& t = *parts.front().tape();
  std::vector<double> out;
  std::vector<std::pair<int, std::size_t>> segments;
  bool rg = false;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw ConfigError("operands live on different tapes");
    segments.emplace_back(p.id(), out.size());
    auto v = p.value();
    out.insert(out.end(), v.begin(), v.end());
    rg = rg || t.requires_grad(p.id());
  }
  return t.record(
      "concat", std::move(out),
      [segments = std::move(segments)](Tape& tp, int self) {
        auto g = tp.grad_buffer(self);
        for (const auto& [id, off] : segments) {
          if (!tp.requires_grad(id)) continue;
          auto dst = tp.grad_buffer(id);
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[off + i];
        }
      },
      rg);
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  Tape& t = *a.tape();
  auto v = a.value();
  if (offset + length > v.size()) throw ConfigError("slice out of range");
  std::vector<double> out(v.begin() + offset, v.begin() + offset + length);
  const int ia = a.id();
  return t.record(
      "slice", std::move(out),
      [ia, offset](Tape& tp, int self) {
        if (!tp.requires_grad(ia)) return;
        auto g = tp.grad_buffer(self);
        auto dst = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) dst[offset + i] += g[i];
      },
      t.requires_grad(ia));
}

Var affine(Var params, std::size_t w_offset, std::size_t b_offset,
           std::size_t rows, std::size_t cols, Var x) {
  Tape& t = same_tape(params, x);
  if (x.size() != cols) {
    throw ConfigError("affine input has " + std::to_string(x.size()) +
                      " entries, layer expects " + std::to_string(cols));
  }
  if (w_offset + rows * cols > params.size() || b_offset + rows > params.size()) {
    throw ConfigError("affine parameter slice out of range");
  }
  std::vector<double> out(rows);
  numcore::affine_kernel(params.value(), w_offset, b_offset, rows, cols,
                         x.value(), out);
  const int ip = params.id(), ix = x.id();
  return t.record(
      "affine", std::move(out),
      [ip, ix, w_offset, b_offset, rows, cols](Tape& tp, int self) {
        auto g = tp.grad_buffer(self);
        auto pv = tp.value(ip);
        auto xv = tp.value(ix);
        if (tp.requires_grad(ip)) {
          auto dp = tp.grad_buffer(ip);
          for (std::size_t r = 0; r < rows; ++r) {
            const double gr = g[r];
            if (gr == 0.0) continue;
            double* wrow = dp.data() + w_offset + r * cols;
            for (std::size_t c = 0; c < cols; ++c) wrow[c] += gr * xv[c];
            dp[b_offset + r] += gr;
          }
        }
        if (tp.requires_grad(ix)) {
          auto dx = tp.grad_buffer(ix);
          for (std::size_t r = 0; r < rows; ++r) {
            const double gr = g[r];
            if (gr == 0.0) continue;
            const double* wrow = pv.data() + w_offset + r * cols;
            for (std::size_t c = 0; c < cols; ++c) dx[c] += gr * wrow[c];
          }
        }
      },
      t.requires_grad(ip) || t.requires_grad(ix));
}

Var embed_mean(Var params, std::size_t offset, std::size_t dim,
               std::span<const int> ids) {
  Tape& t = *params.tape();
  std::vector<double> out(dim);
  numcore::embed_mean_kernel(params.value(), offset, dim, ids, out);
  const int ip = params.id();
  std::vector<int> idv(ids.begin(), ids.end());
  return t.record(
      "embed_mean", std::move(out),
      [ip, offset, dim, idv = std::move(idv)](Tape& tp, int self) {
        if (!tp.requires_grad(ip) || idv.empty()) return;
        auto g = tp.grad_buffer(self);
        auto dp = tp.grad_buffer(ip);
        const double inv = 1.0 / static_cast<double>(idv.size());
        for (int id : idv) {
          double* row = dp.data() + offset + static_cast<std::size_t>(id) * dim;
          for (std::size_t d = 0; d < dim; ++d) row[d] += g[d] * inv;
        }
      },
      t.requires_grad(ip));
}

Var log_softmax_at(Var logits, int index) {
  Tape& t = *logits.tape();
  auto lv = logits.value();
  if (index < 0 || static_cast<std::size_t>(index) >= lv.size()) {
    throw ConfigError("log_softmax_at index out of range");
  }
  const double out = numcore::log_softmax_at(lv, index);
  const int il = logits.id();
  return t.record(
      "log_softmax_at", {out},
      [il, index](Tape& tp, int self) {
        if (!tp.requires_grad(il)) return;
        const double g = tp.grad_buffer(self)[0];
        auto p = numcore::softmax(tp.value(il));
        auto dst = tp.grad_buffer(il);
        for (std::size_t i = 0; i < p.size(); ++i) dst[i] -= g * p[i];
        dst[static_cast<std::size_t>(index)] += g;
      },
      t.requires_grad(il));
}

Var clipped_surrogate(Var ratio, double advantage, double eps_low,
                      double eps_high) {
  Tape& t = *ratio.tape();
  const double r = ratio.scalar();
  const double out = numcore::clipped_surrogate(r, advantage, eps_low, eps_high);
  const double lo = 1.0 - eps_low, hi = 1.0 + eps_high;
  // d/dr: A on the unclipped branch, A inside the clip band, 0 when the
  // clipped constant wins.
  double slope = 0.0;
  if (r * advantage <= numcore::clip(r, lo, hi) * advantage) {
    slope = advantage;
  } else if (r >= lo && r <= hi) {
    slope = advantage;
  }
  const int ir = ratio.id();
  return t.record(
      "clipped_surrogate", {out},
      [ir, slope](Tape& tp, int self) {
        if (!tp.requires_grad(ir)) return;
        tp.grad_buffer(ir)[0] += slope * tp.grad_buffer(self)[0];
      },
      t.requires_grad(ir));
}

}  // namespace ladi::ad

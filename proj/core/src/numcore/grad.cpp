#include "ladi/numcore/grad.hpp"

#include <algorithm>
#include <cmath>

#include "ladi/common.hpp"

namespace ladi::numcore {

namespace {

ad::Var run(const LossFn& loss, ad::Tape& tape,
            std::span<const std::span<const double>> params,
            std::vector<ad::Var>& leaves) {
  leaves.clear();
  for (auto p : params) leaves.push_back(tape.parameter(p));
  ad::Var out = loss(tape, leaves);
  if (out.size() != 1) throw ConfigError("loss must evaluate to a scalar");
  return out;
}

}  // namespace

double evaluate(const LossFn& loss,
                std::span<const std::span<const double>> params) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  return run(loss, tape, params, leaves).scalar();
}

ValueAndGrad value_and_grad(const LossFn& loss,
                            std::span<const std::span<const double>> params) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  ad::Var out = run(loss, tape, params, leaves);
  tape.backward(out);
  ValueAndGrad result;
  result.value = out.scalar();
  for (const auto& leaf : leaves) {
    auto g = tape.grad(leaf);
    if (g.empty()) {
      result.grads.emplace_back(leaf.size(), 0.0);
    } else {
      result.grads.emplace_back(g.begin(), g.end());
    }
  }
  return result;
}

std::vector<double> grad(const LossFn& loss, std::span<const double> params) {
  const std::span<const double> one[] = {params};
  return value_and_grad(loss, one).grads.front();
}

double finite_diff_check(const LossFn& loss,
                         std::span<const std::span<const double>> params,
                         double step, std::size_t max_coords) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be > 0");
  const auto analytic = value_and_grad(loss, params).grads;

  std::vector<std::vector<double>> work;
  for (auto p : params) work.emplace_back(p.begin(), p.end());
  std::vector<std::span<const double>> views(work.begin(), work.end());

  double worst = 0.0;
  for (std::size_t v = 0; v < work.size(); ++v) {
    const std::size_t n = work[v].size();
    const std::size_t stride =
        (max_coords == 0 || n <= max_coords) ? 1 : (n + max_coords - 1) / max_coords;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = work[v][i];
      work[v][i] = saved + step;
      const double up = evaluate(loss, views);
      work[v][i] = saved - step;
      const double down = evaluate(loss, views);
      work[v][i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[v][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

double finite_diff_check(const LossFn& loss, std::span<const double> params,
                         double step, std::size_t max_coords) {
  const std::span<const double> one[] = {params};
  return finite_diff_check(loss, one, step, max_coords);
}

}  // namespace ladi::numcore

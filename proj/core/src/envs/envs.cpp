#include "ladi/envs/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace ladi::envs {

const char* to_string(TaskKind k) {
  return k == TaskKind::kModSum ? "modsum" : "mixture";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "modsum") return TaskKind::kModSum;
  if (s == "mixture") return TaskKind::kMixture;
  throw ConfigError("unknown task kind: " + s);
}

MixtureSpec MixtureSpec::on_circle(int count, double circle_radius, double radius) {
  MixtureSpec s;
  s.radius = radius;
  for (int i = 0; i < count; ++i) {
    const double a = 2.0 * std::numbers::pi * i / count;
    double x = circle_radius * std::cos(a), y = circle_radius * std::sin(a);
    if (std::abs(x) < 1e-12 * circle_radius) x = 0.0;
    if (std::abs(y) < 1e-12 * circle_radius) y = 0.0;
    s.centers.push_back({x, y});
  }
  return s;
}

void EnvSpec::validate() const {
  if (kind == TaskKind::kModSum) {
    if (modsum.length < 1) throw ConfigError("modsum length must be >= 1");
    if (modsum.modulus < 2 || modsum.modulus > 10) throw ConfigError("modsum modulus must lie in [2, 10]");
  } else {
    if (mixture.centers.empty()) throw ConfigError("mixture needs at least one center");
    if (!(mixture.radius > 0.0)) throw ConfigError("mixture radius must be > 0");
    for (std::size_t i = 0; i < mixture.centers.size(); ++i) {
      for (std::size_t j = i + 1; j < mixture.centers.size(); ++j) {
        if (mixture.centers[i] == mixture.centers[j]) {
          throw ConfigError("mixture centers must be pairwise distinct");
        }
      }
    }
  }
}

std::vector<Condition> EnvSpec::questions() const {
  std::vector<Condition> out;
  if (kind == TaskKind::kModSum) {
    for (int r = 0; r < modsum.modulus; ++r) out.push_back(modsum_question(modsum, r));
  } else {
    out.push_back(mixture_question());
  }
  return out;
}

std::size_t EnvSpec::feature_size() const {
  return kind == TaskKind::kModSum ? static_cast<std::size_t>(modsum.modulus) : 2;
}

Condition modsum_question(const ModSumSpec& spec, int target) {
  if (target < 0 || target >= spec.modulus) throw DomainError("modsum target out of range");
  Condition c;
  c.task = TaskKind::kModSum;
  c.target = target;
  c.features.assign(static_cast<std::size_t>(spec.modulus), 0.0);
  c.features[static_cast<std::size_t>(target)] = 1.0;
  return c;
}

Condition mixture_question(double x, double y) {
  return {TaskKind::kMixture, 0, {x, y}};
}

double modsum_reward(std::span<const int> answer, int target, const ModSumSpec& spec) {
  if (!answer.empty() && answer.back() == kEos) answer = answer.first(answer.size() - 1);
  if (answer.empty() || static_cast<int>(answer.size()) != spec.length) return 0.0;
  int sum = 0;
  for (int tok : answer) {
    if (tok < 0 || tok > 9) return 0.0;
    sum += tok;
  }
  return (sum % spec.modulus) == target ? 1.0 : 0.0;
}

double answer_reward(std::span<const int> tokens, const Condition& question,
                     const ModSumSpec& spec) {
  if (tokens.empty() || tokens.back() != kEos) return 0.0;
  return modsum_reward(tokens, question.target, spec);
}

double mixture_reward(std::span<const double> point, const MixtureSpec& spec) {
  if (point.size() != 2) throw ConfigError("mixture reward expects a 2-D point");
  if (!std::isfinite(point[0]) || !std::isfinite(point[1])) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : spec.centers) {
    const double dx = point[0] - c[0], dy = point[1] - c[1];
    best = std::min(best, dx * dx + dy * dy);
  }
  if (best <= spec.radius * spec.radius) return 1.0;
  const double r = std::exp(-best / (2.0 * spec.radius * spec.radius));
  return r < 1e-6 ? 0.0 : r;
}

std::vector<std::array<double, 2>> sample_mixture(const MixtureSpec& spec, std::size_t count,
                                                  double spread, Rng& rng) {
  if (spec.centers.empty()) throw ConfigError("mixture needs at least one center");
  std::vector<std::array<double, 2>> out(count);
  for (auto& p : out) {
    const auto& c = spec.centers[static_cast<std::size_t>(rng.integer(0, static_cast<int>(spec.centers.size())))];
    p = {c[0] + spread * rng.normal(), c[1] + spread * rng.normal()};
  }
  return out;
}

std::size_t nearest_center(std::span<const double> point, const MixtureSpec& spec) {
  if (point.size() != 2) throw ConfigError("mixture point must be 2-D");
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.centers.size(); ++i) {
    const double dx = point[0] - spec.centers[i][0], dy = point[1] - spec.centers[i][1];
    if (dx * dx + dy * dy < bd) {
      bd = dx * dx + dy * dy;
      best = i;
    }
  }
  return best;
}

double pass_at_k(int n, int c, int k) {
  if (k < 1 || k > n) throw DomainError("pass@k needs 1 <= k <= n");
  if (c < 0 || c > n) throw DomainError("pass@k needs 0 <= c <= n");
  if (n - c < k) return 1.0;
  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - miss;
}

int mode_coverage(std::span<const std::array<double, 2>> outputs,
                  const MixtureSpec& spec, double radius) {
  int covered = 0;
  for (const auto& c : spec.centers) {
    const bool hit = std::any_of(outputs.begin(), outputs.end(), [&](const auto& p) {
      const double dx = p[0] - c[0], dy = p[1] - c[1];
      return dx * dx + dy * dy <= radius * radius;
    });
    covered += hit ? 1 : 0;
  }
  return covered;
}

int mode_coverage(std::span<const std::vector<int>> answers, int target,
                  const ModSumSpec& spec) {
  std::set<std::vector<int>> classes;
  for (const auto& a : answers) {
    if (modsum_reward(a, target, spec) != 1.0) continue;
    std::vector<int> digits(a.begin(), a.end());
    if (!digits.empty() && digits.back() == kEos) digits.pop_back();
    std::sort(digits.begin(), digits.end());
    classes.insert(std::move(digits));
  }
  return static_cast<int>(classes.size());
}

namespace {

double enumerate(const NextTokenFn& policy, const ModSumSpec& spec, int target,
                 std::vector<int>& prefix, int sum) {
  const auto p = policy(prefix);
  if (p.size() != static_cast<std::size_t>(kVocab)) {
    throw ConfigError("policy distribution must cover the answer vocabulary");
  }
  if (static_cast<int>(prefix.size()) == spec.length) {
    return (sum % spec.modulus) == target ? p[kEos] : 0.0;
  }
  double total = 0.0;
  for (int d = 0; d <= 9; ++d) {
    if (p[static_cast<std::size_t>(d)] == 0.0) continue;
    prefix.push_back(d);
    total += p[static_cast<std::size_t>(d)] * enumerate(policy, spec, target, prefix, sum + d);
    prefix.pop_back();
  }
  return total;
}

}  // namespace

double exact_success_rate(const NextTokenFn& policy, const ModSumSpec& spec,
                          int target, long max_sequences) {
  const double count = std::pow(10.0, spec.length);
  if (count > static_cast<double>(max_sequences)) {
    throw CapabilityError("modsum answer space too large to enumerate");
  }
  std::vector<int> prefix;
  prefix.reserve(static_cast<std::size_t>(spec.length));
  return enumerate(policy, spec, target, prefix, 0);
}

}  // namespace ladi::envs

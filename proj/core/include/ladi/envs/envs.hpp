#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ladi/common.hpp"

namespace ladi::envs {

// Answer vocabulary: digits 0-9, then BOS and EOS.
inline constexpr int kBos = 10;
inline constexpr int kEos = 11;
inline constexpr int kVocab = 12;

enum class TaskKind { kModSum, kMixture };

const char* to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

// The query Q. For modsum the features are a one-hot of the target residue;
// for the mixture task they are 2-D coordinates.
struct Condition {
  TaskKind task = TaskKind::kModSum;
  int target = 0;
  std::vector<double> features;

  bool operator==(const Condition&) const = default;
};

struct ModSumSpec {
  int length = 4;    // digits per answer
  int modulus = 10;

  bool operator==(const ModSumSpec&) const = default;
};

struct MixtureSpec {
  std::vector<std::array<double, 2>> centers;
  double radius = 0.3;

  // `count` centers evenly spaced on a circle.
  static MixtureSpec on_circle(int count, double circle_radius, double radius);

  bool operator==(const MixtureSpec&) const = default;
};

struct EnvSpec {
  TaskKind kind = TaskKind::kModSum;
  ModSumSpec modsum;
  MixtureSpec mixture = MixtureSpec::on_circle(4, 1.5, 0.3);

  void validate() const;
  // Every distinct query of the task (modsum: one per residue).
  std::vector<Condition> questions() const;
  std::size_t feature_size() const;

  bool operator==(const EnvSpec&) const = default;
};

Condition modsum_question(const ModSumSpec& spec, int target);
Condition mixture_question(double x = 0.0, double y = 0.0);

// 1 iff the answer is exactly `length` digits (optionally followed by one
// EOS) whose sum is congruent to target; anything else scores 0.
double modsum_reward(std::span<const int> answer, int target,
                     const ModSumSpec& spec = {});

// Reward of a generated answer: the sample must have emitted EOS, otherwise
// it is malformed and scores 0.
double answer_reward(std::span<const int> tokens, const Condition& question,
                     const ModSumSpec& spec);

// 1 inside the acceptance radius of any center, otherwise
// exp(-min squared distance / (2 r^2)), truncated to 0 below 1e-6.
double mixture_reward(std::span<const double> point, const MixtureSpec& spec);

// Points drawn uniformly over the centers with isotropic Gaussian spread.
std::vector<std::array<double, 2>> sample_mixture(const MixtureSpec& spec, std::size_t count,
                                                  double spread, Rng& rng);

// Index of the nearest center.
std::size_t nearest_center(std::span<const double> point, const MixtureSpec& spec);

// Unbiased 1 - C(n - c, k) / C(n, k), evaluated as a running product.
double pass_at_k(int n, int c, int k);

// Mixture: number of centers with at least one output inside `radius`.
int mode_coverage(std::span<const std::array<double, 2>> outputs,
                  const MixtureSpec& spec, double radius);
// Modsum: number of distinct digit multisets among correct answers.
int mode_coverage(std::span<const std::vector<int>> answers, int target,
                  const ModSumSpec& spec);

// Next-token distribution of a policy given the tokens emitted so far.
using NextTokenFn = std::function<std::vector<double>(std::span<const int> prefix)>;

// Exact success probability of a modsum policy, summing path probability
// times reward over every digit sequence of the configured length.
double exact_success_rate(const NextTokenFn& policy, const ModSumSpec& spec,
                          int target, long max_sequences = 10'000'000);

}  // namespace ladi::envs

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "ladi/envs/envs.hpp"

using namespace ladi;
using namespace ladi::envs;

TEST(ModSum, Definitional) {
  ModSumSpec two{2, 10};
  EXPECT_EQ(modsum_reward(std::vector<int>{3, 4}, 7, two), 1.0);
  EXPECT_EQ(modsum_reward(std::vector<int>{3, 4, kEos}, 7, two), 1.0);
  EXPECT_EQ(modsum_reward(std::vector<int>{3, 5}, 7, two), 0.0);
  EXPECT_EQ(modsum_reward(std::vector<int>{}, 3, two), 0.0);
  EXPECT_EQ(modsum_reward(std::vector<int>{3, 4, 0}, 7, two), 0.0);
  EXPECT_EQ(modsum_reward(std::vector<int>{3, kBos}, 3, two), 0.0);
}

TEST(ModSum, AnswerNeedsEos) {
  ModSumSpec two{2, 10};
  auto q = modsum_question(two, 7);
  EXPECT_EQ(answer_reward(std::vector<int>{3, 4}, q, two), 0.0);
  EXPECT_EQ(answer_reward(std::vector<int>{3, 4, kEos}, q, two), 1.0);
}

TEST(ModSum, CensusOfLengthTwoSequences) {
  ModSumSpec two{2, 10};
  for (int target = 0; target < 10; ++target) {
    int valid = 0;
    for (int a = 0; a < 10; ++a)
      for (int b = 0; b < 10; ++b) valid += modsum_reward(std::vector<int>{a, b}, target, two) == 1.0;
    EXPECT_EQ(valid, 10) << target;
  }
}

TEST(ModSum, QuestionsAreOneHot) {
  EnvSpec env;
  auto qs = env.questions();
  ASSERT_EQ(qs.size(), 10u);
  for (int t = 0; t < 10; ++t) {
    EXPECT_EQ(qs[t].target, t);
    EXPECT_EQ(qs[t].features[t], 1.0);
  }
  EXPECT_THROW(modsum_question(env.modsum, 10), DomainError);
}

TEST(Mixture, RewardCases) {
  MixtureSpec m;
  m.centers = {{0, 0}, {1.0, 0}};
  m.radius = 0.5;
  EXPECT_EQ(mixture_reward(std::vector<double>{0, 0}, m), 1.0);
  EXPECT_EQ(mixture_reward(std::vector<double>{INFINITY, 0}, m), 0.0);
  EXPECT_EQ(mixture_reward(std::vector<double>{1e6, 0}, m), 0.0);
  // Midpoint of centers 2r apart sits exactly on both acceptance circles.
  EXPECT_EQ(mixture_reward(std::vector<double>{0.5, 0}, m), 1.0);
  // Off the circle: exp(-d^2 / (2 r^2)) with d the distance to the nearest center.
  const double d2 = 0.5 * 0.5 + 0.6 * 0.6;
  EXPECT_NEAR(mixture_reward(std::vector<double>{0.5, 0.6}, m), std::exp(-d2 / (2 * 0.25)), 1e-15);
}

TEST(PassAtK, HandValues) {
  EXPECT_EQ(pass_at_k(4, 4, 1), 1.0);
  EXPECT_EQ(pass_at_k(10, 0, 3), 0.0);
  EXPECT_NEAR(pass_at_k(5, 2, 2), 0.7, 1e-15);
  EXPECT_THROW(pass_at_k(3, 1, 4), DomainError);
}

TEST(PassAtK, MatchesSubsetEnumeration) {
  for (int n = 1; n <= 8; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) {
        // Successes are the first c items; count size-k subsets with one.
        long hit = 0, total = 0;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
          if (__builtin_popcount(mask) != k) continue;
          ++total;
          hit += (mask & ((1u << c) - 1)) != 0;
        }
        EXPECT_NEAR(pass_at_k(n, c, k), static_cast<double>(hit) / total, 1e-14)
            << n << " " << c << " " << k;
      }
    }
  }
}

TEST(Coverage, MixtureCases) {
  MixtureSpec m;
  m.centers = {{0, 0}, {3, 0}};
  std::vector<std::array<double, 2>> both = {{0, 0}, {3, 0}};
  EXPECT_EQ(mode_coverage(both, m, 0.3), 2);
  EXPECT_EQ(mode_coverage(std::span<const std::array<double, 2>>{}, m, 0.3), 0);
}

TEST(Coverage, MatchesBruteForceAssignment) {
  Rng rng(9);
  auto m = MixtureSpec::on_circle(5, 2.0, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::array<double, 2>> pts(20);
    for (auto& p : pts) p = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
    std::set<std::size_t> covered;
    for (const auto& p : pts) {
      for (std::size_t c = 0; c < m.centers.size(); ++c) {
        if (std::hypot(p[0] - m.centers[c][0], p[1] - m.centers[c][1]) <= 0.7) covered.insert(c);
      }
    }
    EXPECT_EQ(mode_coverage(pts, m, 0.7), static_cast<int>(covered.size()));
  }
}

TEST(Coverage, ModSumCountsDigitMultisets) {
  ModSumSpec s{3, 10};
  std::vector<std::vector<int>> answers = {{1, 2, 4, kEos}, {4, 2, 1, kEos}, {0, 0, 7}, {9, 9, 8}};
  EXPECT_EQ(mode_coverage(answers, 7, s), 2);
}

namespace {

// Uniform over digits for the first `length` positions, then EOS.
NextTokenFn uniform_digits(int length) {
  return [length](std::span<const int> prefix) {
    std::vector<double> p(kVocab, 0.0);
    if (static_cast<int>(prefix.size()) < length) {
      for (int d = 0; d < 10; ++d) p[d] = 0.1;
    } else {
      p[kEos] = 1.0;
    }
    return p;
  };
}

}  // namespace

TEST(ExactSuccess, UniformPolicy) {
  ModSumSpec s{2, 10};
  for (int t = 0; t < 10; ++t) EXPECT_NEAR(exact_success_rate(uniform_digits(2), s, t), 0.1, 1e-15);
}

TEST(ExactSuccess, DeltaPolicy) {
  ModSumSpec s{3, 10};
  NextTokenFn delta = [](std::span<const int> prefix) {
    std::vector<double> p(kVocab, 0.0);
    p[prefix.size() < 3 ? 2 : kEos] = 1.0;
    return p;
  };
  EXPECT_EQ(exact_success_rate(delta, s, 6), 1.0);
  EXPECT_EQ(exact_success_rate(delta, s, 5), 0.0);
}

TEST(ExactSuccess, RefusesHugeSpaces) {
  ModSumSpec s{9, 10};
  EXPECT_THROW(exact_success_rate(uniform_digits(9), s, 0, 1000), CapabilityError);
}

TEST(EnvSpec, Validation) {
  EnvSpec e;
  e.modsum.modulus = 1;
  EXPECT_THROW(e.validate(), ConfigError);
  EnvSpec m;
  m.kind = TaskKind::kMixture;
  m.mixture.centers = {{0, 0}, {0, 0}};
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_THROW(task_kind_from_string("chess"), ConfigError);
}

TEST(Mixture, SamplesLandNearCenters) {
  Rng rng(1);
  MixtureSpec m;
  m.centers = {{-5, 0}, {5, 0}};
  auto pts = sample_mixture(m, 4000, 0.1, rng);
  int left = 0;
  for (const auto& p : pts) {
    const std::vector<double> v{p[0], p[1]};
    left += nearest_center(v, m) == 0;
    EXPECT_LT(std::min(std::hypot(p[0] + 5, p[1]), std::hypot(p[0] - 5, p[1])), 1.0);
  }
  EXPECT_NEAR(left / 4000.0, 0.5, 4 * std::sqrt(0.25 / 4000));
}

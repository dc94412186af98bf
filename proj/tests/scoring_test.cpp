#include "packorder/scoring.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"

namespace packorder {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> random_sequence(std::size_t n, std::size_t l, std::mt19937_64& rng) {
  std::vector<std::size_t> seq = testing::iota_items(n);
  std::shuffle(seq.begin(), seq.end(), rng);
  seq.resize(l);
  return seq;
}

TEST(Score, SingleItemIsZero) {
  const auto m = testing::table1_matrix();
  const auto s = score(std::vector<std::string>{"apples"}, m);
  EXPECT_EQ(s.value, 0.0);
  EXPECT_TRUE(s.pair_terms.empty());
}

TEST(Score, TwoClassesAtHalf) {
  const auto m = testing::uniform_matrix(2);
  const auto s = score(std::vector<std::string>{"c00", "c01"}, m);
  EXPECT_DOUBLE_EQ(s.value, std::log(0.5));
  EXPECT_NEAR(s.value, -0.6931, 1e-4);
}

TEST(Score, Table1Sequence) {
  const auto m = testing::table1_matrix();
  const std::vector<std::string> seq{"Bottle", "Apples", "Bell Pepper", "Bananas"};
  const auto s = score(seq, m);
  // Oracle: product over the six pairs read straight from the printed table.
  const double expected = std::log(1.0 * 0.857 * 0.964 * 0.714 * 0.892 * 0.714);
  EXPECT_NEAR(s.value, expected, 1e-12);
  EXPECT_NEAR(s.value, -0.978, 0.05);
  EXPECT_NEAR(s.value, -0.979015, 1e-6);
  EXPECT_EQ(s.pair_terms.size(), 6u);
}

TEST(Score, PairTermsSumToValue) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = testing::random_matrix(9, rng);
    const auto seq = random_sequence(9, 9, rng);
    const auto s = score_indices(seq, m);
    double sum = 0.0;
    for (const auto& t : s.pair_terms) sum += t.log_prob;
    EXPECT_NEAR(s.value, sum, 1e-12);
  }
}

TEST(Score, UnresolvableLabelNamesIt) {
  const auto m = testing::table1_matrix();
  try {
    score(std::vector<std::string>{"apples", "dragonfruit"}, m);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::scoring);
    EXPECT_NE(std::string(e.what()).find("dragonfruit"), std::string::npos);
  }
}

TEST(Score, RepeatedClassesContributeZero) {
  const auto m = testing::table1_matrix();
  const auto once = score(std::vector<std::string>{"bottle", "apples"}, m);
  const auto twice = score(std::vector<std::string>{"bottle", "bottle", "apples"}, m);
  // bottle-bottle is 0, and bottle-below-apples appears twice with ln 1 = 0.
  EXPECT_EQ(twice.value, 2 * once.value);
  EXPECT_TRUE(twice.is_finite());
}

TEST(Score, ZeroProbabilityGivesNegativeInfinity) {
  const auto m = testing::table1_matrix();
  const auto s = score(std::vector<std::string>{"apples", "bottle"}, m);
  EXPECT_EQ(s.value, -kInf);
  EXPECT_EQ(s.zero_pairs, 1u);
  EXPECT_FALSE(s.is_finite());
}

TEST(AverageScore, Examples) {
  auto make = [](double v) {
    ConsistencyScore s;
    s.value = v;
    if (std::isinf(v)) s.zero_pairs = 1;
    return s;
  };
  std::vector<ConsistencyScore> one{make(0.0)};
  EXPECT_EQ(average_score(one).value, 0.0);
  std::vector<ConsistencyScore> two{make(-1.0), make(-3.0)};
  EXPECT_EQ(average_score(two).value, -2.0);
  std::vector<ConsistencyScore> inf{make(-1.0), make(-kInf)};
  const auto avg = average_score(inf);
  EXPECT_EQ(avg.value, -kInf);
  EXPECT_EQ(avg.infinite_count, 1u);
  EXPECT_THROW(average_score(std::vector<ConsistencyScore>{}), Error);
}

TEST(ConstraintSatisfaction, OptimumAndReverse) {
  const std::vector<std::size_t> order{3, 0, 4, 1, 2};
  const auto m = testing::total_order_matrix(order);
  EXPECT_EQ(constraint_satisfaction_indices(order, m), 1.0);
  const std::vector<std::size_t> rev(order.rbegin(), order.rend());
  EXPECT_EQ(constraint_satisfaction_indices(rev, m), 0.0);
}

TEST(ConstraintSatisfaction, Table1SequenceSatisfiesAllPairs) {
  const auto m = testing::table1_matrix();
  const std::vector<std::string> seq{"bottle", "apples", "bell pepper", "bananas"};
  // Oracle: count pairs with probability >= 0.5 by reading the printed table.
  const auto& t = testing::table1_printed();
  const std::vector<std::size_t> idx{0, 1, 3, 2};
  int ok = 0, pairs = 0;
  for (std::size_t p = 0; p < 4; ++p) {
    for (std::size_t q = p + 1; q < 4; ++q) {
      ++pairs;
      ok += t[idx[q]][idx[p]] >= 0.5 ? 1 : 0;
    }
  }
  EXPECT_EQ(pairs, 6);
  EXPECT_EQ(ok, 6);
  EXPECT_EQ(constraint_satisfaction_rate(seq, m), 1.0);
}

TEST(ConstraintSatisfaction, UndefinedBelowTwoItems) {
  const auto m = testing::table1_matrix();
  EXPECT_THROW(constraint_satisfaction_rate(std::vector<std::string>{"bottle"}, m), Error);
}

TEST(ScoreProperty, MatchesBruteForceOracle) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> len(1, 10);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = testing::random_matrix(12, rng, trial % 4 == 0 ? 0.1 : 0.0);
    const auto seq = random_sequence(12, len(rng), rng);
    const auto s = score_indices(seq, m);
    const double oracle = testing::oracle_score(seq, m);
    if (std::isinf(oracle)) {
      EXPECT_EQ(s.value, -kInf);
    } else {
      EXPECT_NEAR(s.value, oracle, 1e-12);
    }
  }
}

TEST(ScoreProperty, AdjacentSwapDelta) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> len(2, 10);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = testing::random_matrix(10, rng);
    auto seq = random_sequence(10, len(rng), rng);
    std::uniform_int_distribution<std::size_t> pos(0, seq.size() - 2);
    const std::size_t p = pos(rng);
    const double before = score_indices(seq, m).value;
    const std::size_t a = seq[p], b = seq[p + 1];
    std::swap(seq[p], seq[p + 1]);
    const double after = score_indices(seq, m).value;
    EXPECT_NEAR(after - before, std::log(m.prob(b, a)) - std::log(m.prob(a, b)), 1e-10);
  }
}

TEST(ScoreProperty, InvariantUnderRelabeling) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 8;
    const auto m = testing::random_matrix(n, rng);
    std::vector<std::size_t> perm = testing::iota_items(n);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> p(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) p[perm[i]][perm[k]] = m.prob(i, k);
    }
    const auto relabeled = testing::make_matrix(testing::class_names(n), p);
    const auto seq = random_sequence(n, n, rng);
    std::vector<std::size_t> mapped;
    for (auto s : seq) mapped.push_back(perm[s]);
    EXPECT_EQ(score_indices(seq, m).value, score_indices(mapped, relabeled).value);
  }
}

TEST(ScoreProperty, UniformMatrixScoresEveryPermutationEqually) {
  for (std::size_t l = 1; l <= 7; ++l) {
    const auto m = testing::uniform_matrix(l);
    auto seq = testing::iota_items(l);
    const double expected = static_cast<double>(l * (l - 1) / 2) * std::log(0.5);
    do {
      EXPECT_NEAR(score_indices(seq, m).value, expected, 1e-12);
    } while (std::next_permutation(seq.begin(), seq.end()));
  }
}

}  // namespace
}  // namespace packorder

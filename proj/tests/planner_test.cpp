#include "packorder/planner.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <random>

#include "test_support.hpp"

namespace packorder {
namespace {

std::vector<std::string> table1_items() { return {"bananas", "bell pepper", "bottle", "apples"}; }

const std::vector<std::string> kTable1Best{"bottle", "apples", "bell pepper", "bananas"};

double value_of(std::span<const std::size_t> seq, const PreferenceMatrix& m) {
  return testing::oracle_score(seq, m);
}

std::vector<std::size_t> random_subset(std::size_t n, std::size_t l, std::mt19937_64& rng) {
  auto v = testing::iota_items(n);
  std::shuffle(v.begin(), v.end(), rng);
  v.resize(l);
  return v;
}

bool is_permutation_of(std::vector<std::size_t> a, std::vector<std::size_t> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

TEST(PlanExact, Table1) {
  const auto m = testing::table1_matrix();
  PlanRequest req{table1_items(), PlanMethod::exact, 0, {}};
  EXPECT_EQ(plan(req, m), kTable1Best);
}

TEST(PlanExact, SingleItem) {
  const auto m = testing::table1_matrix();
  PlanRequest req{{"Apples"}, PlanMethod::exact, 0, {}};
  EXPECT_EQ(plan(req, m), std::vector<std::string>{"apples"});
}

TEST(PlanExact, TotalOrderRecovered) {
  const std::vector<std::size_t> order{4, 1, 5, 0, 3, 2};
  const auto m = testing::total_order_matrix(order);
  EXPECT_EQ(plan_exact(testing::iota_items(6), m), order);
}

TEST(PlanExact, CapacityErrorAboveLimit) {
  const auto m = testing::uniform_matrix(12);
  try {
    plan_exact(testing::iota_items(11), m);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::capacity);
  }
  PlanLimits limits;
  limits.exact_max_items = 3;
  EXPECT_THROW(plan_exact(testing::iota_items(4), m, limits), Error);
  EXPECT_NO_THROW(plan_exact(testing::iota_items(3), m, limits));
}

TEST(PlanExact, RejectsDuplicatesAndEmpty) {
  const auto m = testing::uniform_matrix(3);
  EXPECT_THROW(plan_exact(std::vector<std::size_t>{0, 0}, m), Error);
  EXPECT_THROW(plan_exact(std::vector<std::size_t>{}, m), Error);
}

TEST(PlanExact, MatchesOracleAndIsInputOrderInvariant) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> len(1, 7);
  for (int trial = 0; trial < 150; ++trial) {
    const auto m = testing::random_matrix(9, rng, trial % 5 == 0 ? 0.2 : 0.0);
    auto items = random_subset(9, len(rng), rng);
    const auto got = plan_exact(items, m);
    EXPECT_TRUE(is_permutation_of(got, items));
    const auto best = testing::oracle_best(items, m);
    if (std::isfinite(best.value)) {
      EXPECT_NEAR(value_of(got, m), best.value, 1e-9);
    }
    if (best.ties == 1) {
      EXPECT_EQ(got, best.order);
    }
    std::shuffle(items.begin(), items.end(), rng);
    EXPECT_EQ(plan_exact(items, m), got);
  }
}

TEST(PlanExact, UniformMatrixYieldsLexicographicOrder) {
  const auto m = testing::uniform_matrix(6);
  EXPECT_EQ(plan_exact(std::vector<std::size_t>{5, 3, 1, 0, 4, 2}, m), testing::iota_items(6));
}

TEST(PlanExact, PrefersFewerZeroPairsWhenAllInfinite) {
  // A 3-cycle of certainties: every order has at least one zero pair.
  std::vector<std::vector<double>> p{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
  const auto m = testing::make_matrix(testing::class_names(3), p);
  const auto got = plan_exact(testing::iota_items(3), m);
  EXPECT_EQ(testing::oracle_zero_pairs(got, m), 1u);
}

TEST(PlanGreedy, Table1Weights) {
  const auto m = testing::table1_matrix();
  // Oracle: column sums of the printed table.
  const auto& t = testing::table1_printed();
  std::map<std::string, double> w;
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += t[k][i];
    w[testing::table1_classes()[i]] = s;
  }
  EXPECT_NEAR(w["bottle"], 2.821, 1e-9);
  EXPECT_NEAR(w["apples"], 1.606, 1e-9);
  EXPECT_NEAR(w["bell pepper"], 1.141, 1e-9);
  EXPECT_NEAR(w["bananas"], 0.427, 1e-9);
  PlanRequest req{table1_items(), PlanMethod::greedy, 0, {}};
  EXPECT_EQ(plan(req, m), kTable1Best);
}

TEST(PlanGreedy, TiesKeepCatalogOrder) {
  const auto m = testing::uniform_matrix(5);
  EXPECT_EQ(plan_greedy(std::vector<std::size_t>{4, 2, 0, 3, 1}, m), testing::iota_items(5));
}

TEST(PlanLocalSearch, AtLeastGreedyAndDeterministic) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = testing::random_matrix(12, rng);
    const auto items = random_subset(12, 9, rng);
    const auto ls = plan_local_search(items, m, 123, 8);
    const auto gr = plan_greedy(items, m);
    EXPECT_TRUE(is_permutation_of(ls, items));
    EXPECT_GE(value_of(ls, m), value_of(gr, m) - 1e-9);
    EXPECT_EQ(plan_local_search(items, m, 123, 8), ls);
  }
}

TEST(PlanLocalSearch, RecoversTotalOrder) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    auto order = testing::iota_items(14);
    std::shuffle(order.begin(), order.end(), rng);
    const auto m = testing::total_order_matrix(order);
    EXPECT_EQ(plan_local_search(testing::iota_items(14), m, trial, 8), order);
  }
}

TEST(PlanLocalSearch, DominanceChain) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = testing::random_matrix(8, rng);
    const auto items = testing::iota_items(8);
    const double ex = value_of(plan_exact(items, m), m);
    const double ls = value_of(plan_local_search(items, m, trial, 8), m);
    const double gr = value_of(plan_greedy(items, m), m);
    EXPECT_GE(ex, ls - 1e-9);
    EXPECT_GE(ls, gr - 1e-9);
  }
}

TEST(PlanRandom, ReproducibleAndPermutation) {
  const auto items = testing::iota_items(7);
  const auto a = plan_random(items, 99);
  EXPECT_EQ(plan_random(items, 99), a);
  EXPECT_TRUE(is_permutation_of(a, items));
  bool differs = false;
  for (std::uint64_t s = 0; s < 20 && !differs; ++s) differs = plan_random(items, s) != a;
  EXPECT_TRUE(differs);
}

TEST(PlanRandom, UniformOverPermutations) {
  const auto items = testing::iota_items(3);
  std::map<std::vector<std::size_t>, int> counts;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) ++counts[plan_random(items, static_cast<std::uint64_t>(s))];
  EXPECT_EQ(counts.size(), 6u);
  for (const auto& [perm, c] : counts) EXPECT_NEAR(static_cast<double>(c) / draws, 1.0 / 6.0, 0.02);
}

TEST(PlanRequestLevel, LlmMethodNeedsProvider) {
  const auto m = testing::table1_matrix();
  PlanRequest req{table1_items(), PlanMethod::llm, 0, {}};
  EXPECT_THROW(plan(req, m), Error);
  req.items = {"apples", "dragonfruit"};
  req.method = PlanMethod::greedy;
  EXPECT_THROW(plan(req, m), Error);
}

TEST(PlanMethodNames, RoundTrip) {
  for (auto method : {PlanMethod::exact, PlanMethod::greedy, PlanMethod::local_search, PlanMethod::random,
                      PlanMethod::llm}) {
    EXPECT_EQ(parse_plan_method(to_string(method)), method);
  }
  EXPECT_THROW(parse_plan_method("annealing"), Error);
}

}  // namespace
}  // namespace packorder

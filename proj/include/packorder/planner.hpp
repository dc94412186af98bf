#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "packorder/error.hpp"
#include "packorder/preference.hpp"
#include "packorder/scoring.hpp"

namespace packorder {

enum class PlanMethod { exact, greedy, local_search, random, llm };

inline std::string_view to_string(PlanMethod m) {
  switch (m) {
    case PlanMethod::exact: return "exact";
    case PlanMethod::greedy: return "greedy";
    case PlanMethod::local_search: return "local_search";
    case PlanMethod::random: return "random";
    case PlanMethod::llm: return "llm";
  }
  return "unknown";
}

inline PlanMethod parse_plan_method(std::string_view s) {
  for (auto m : {PlanMethod::exact, PlanMethod::greedy, PlanMethod::local_search,
                 PlanMethod::random, PlanMethod::llm}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorCategory::invalid_input, "unknown planning method '" + std::string(s) + "'");
}

struct PlanLimits {
  std::size_t exact_max_items = 10;
  std::size_t local_search_restarts = 8;
};

struct PlanRequest {
  std::vector<std::string> items;
  PlanMethod method = PlanMethod::local_search;
  std::uint64_t seed = 0;
  PlanLimits limits;
};

// Extended-real ordering key: -inf scores compare below every finite score,
// and among -inf candidates fewer zero-probability pairs is better.
struct OrderKey {
  std::size_t zero_pairs = 0;
  double log_sum = 0.0;

  bool better_than(const OrderKey& o, double tie_eps = 0.0) const {
    if (zero_pairs != o.zero_pairs) return zero_pairs < o.zero_pairs;
    return log_sum > o.log_sum + tie_eps * std::max(1.0, std::abs(o.log_sum));
  }
};

inline OrderKey order_key(const ConsistencyScore& s) {
  double sum = 0.0;
  for (const auto& t : s.pair_terms) {
    if (std::isfinite(t.log_prob)) sum += t.log_prob;
  }
  return {s.zero_pairs, sum};
}

namespace detail {

inline constexpr double kTieEps = 1e-12;

// Log-probabilities restricted to a set of items, indexed locally.
class PairTable {
 public:
  PairTable(std::span<const std::size_t> items, const PreferenceMatrix& m)
      : n_(items.size()), log_(n_ * n_, 0.0), zero_(n_ * n_, 0) {
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b = 0; b < n_; ++b) {
        if (a == b) continue;
        const double p = m.prob(items[a], items[b]);
        if (p <= 0.0) {
          zero_[a * n_ + b] = 1;
        } else {
          log_[a * n_ + b] = std::log(p);
        }
      }
    }
  }

  double log(std::size_t a, std::size_t b) const { return log_[a * n_ + b]; }
  int zero(std::size_t a, std::size_t b) const { return zero_[a * n_ + b]; }

  OrderKey key(std::span<const std::size_t> order) const {
    OrderKey k;
    for (std::size_t p = 0; p < order.size(); ++p) {
      for (std::size_t q = p + 1; q < order.size(); ++q) {
        k.zero_pairs += zero(order[p], order[q]);
        k.log_sum += log(order[p], order[q]);
      }
    }
    return k;
  }

 private:
  std::size_t n_;
  std::vector<double> log_;
  std::vector<int> zero_;
};

// Items sorted by catalog index, rejecting duplicates.
inline std::vector<std::size_t> canonical_items(std::span<const std::size_t> items,
                                                const PreferenceMatrix& m) {
  if (items.empty()) throw Error(ErrorCategory::invalid_input, "plan request has no items");
  std::vector<std::size_t> sorted(items.begin(), items.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] >= m.size()) {
      throw Error(ErrorCategory::scoring, "item index " + std::to_string(sorted[i]) + " outside catalog");
    }
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      throw Error(ErrorCategory::invalid_input,
                  "plan request lists '" + m.catalog().name(sorted[i]) + "' more than once");
    }
  }
  return sorted;
}

inline std::vector<std::size_t> to_global(std::span<const std::size_t> local,
                                          std::span<const std::size_t> items) {
  std::vector<std::size_t> out;
  out.reserve(local.size());
  for (auto l : local) out.push_back(items[l]);
  return out;
}

class ExactSearch {
 public:
  explicit ExactSearch(const PairTable& table, std::size_t n)
      : table_(table), n_(n), used_(n, 0), prefix_(n) {}

  std::vector<std::size_t> run() {
    descend(0, OrderKey{});
    return best_;
  }

 private:
  // Children are visited in increasing local index, so permutations are
  // enumerated lexicographically and the first of any tie is kept.
  void descend(std::size_t depth, OrderKey key) {
    if (depth == n_) {
      if (best_.empty() || key.better_than(best_key_, kTieEps)) {
        best_key_ = key;
        best_.assign(prefix_.begin(), prefix_.end());
      }
      return;
    }
    for (std::size_t x = 0; x < n_; ++x) {
      if (used_[x]) continue;
      OrderKey next = key;
      for (std::size_t p = 0; p < depth; ++p) {
        next.zero_pairs += static_cast<std::size_t>(table_.zero(prefix_[p], x));
        next.log_sum += table_.log(prefix_[p], x);
      }
      used_[x] = 1;
      prefix_[depth] = x;
      descend(depth + 1, next);
      used_[x] = 0;
    }
  }

  const PairTable& table_;
  std::size_t n_;
  std::vector<std::uint8_t> used_;
  std::vector<std::size_t> prefix_;
  std::vector<std::size_t> best_;
  OrderKey best_key_;
};

inline std::vector<std::size_t> greedy_local(std::span<const std::size_t> items,
                                             const PreferenceMatrix& m) {
  const std::size_t n = items.size();
  std::vector<double> weight(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) weight[a] += m.prob(items[a], items[b]);
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weight[a] > weight[b]; });
  return order;
}

// Best-improvement insertion moves until no move improves the key.
inline void insertion_descent(std::vector<std::size_t>& order, const PairTable& t) {
  const std::size_t n = order.size();
  for (;;) {
    bool found = false;
    std::size_t best_from = 0;
    std::size_t best_to = 0;
    long best_dz = 0;
    double best_ds = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t x = order[i];
      long dz = 0;
      double ds = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const std::size_t y = order[j];
        dz += t.zero(y, x) - t.zero(x, y);
        ds += t.log(y, x) - t.log(x, y);
        if (dz < best_dz || (dz == best_dz && ds > best_ds + kTieEps)) {
          found = true;
          best_from = i, best_to = j, best_dz = dz, best_ds = ds;
        }
      }
      dz = 0;
      ds = 0.0;
      for (std::size_t j = i; j-- > 0;) {
        const std::size_t y = order[j];
        dz += t.zero(x, y) - t.zero(y, x);
        ds += t.log(x, y) - t.log(y, x);
        if (dz < best_dz || (dz == best_dz && ds > best_ds + kTieEps)) {
          found = true;
          best_from = i, best_to = j, best_dz = dz, best_ds = ds;
        }
      }
    }
    if (!found) return;
    const std::size_t x = order[best_from];
    order.erase(order.begin() + static_cast<std::ptrdiff_t>(best_from));
    order.insert(order.begin() + static_cast<std::ptrdiff_t>(best_to), x);
  }
}

}  // namespace detail

// Maximum-score permutation by exhaustive enumeration. Ties resolve to the
// lexicographically smallest sequence of catalog indices.
inline std::vector<std::size_t> plan_exact(std::span<const std::size_t> items,
                                           const PreferenceMatrix& m, const PlanLimits& limits = {}) {
  const auto sorted = detail::canonical_items(items, m);
  if (sorted.size() > limits.exact_max_items) {
    throw Error(ErrorCategory::capacity,
                "exact planning is limited to " + std::to_string(limits.exact_max_items) +
                    " items (got " + std::to_string(sorted.size()) +
                    "); use the greedy or local_search method");
  }
  const detail::PairTable table(sorted, m);
  detail::ExactSearch search(table, sorted.size());
  return detail::to_global(search.run(), sorted);
}

// Sorts by descending propensity to sit below the other items.
inline std::vector<std::size_t> plan_greedy(std::span<const std::size_t> items,
                                            const PreferenceMatrix& m) {
  const auto sorted = detail::canonical_items(items, m);
  return detail::to_global(detail::greedy_local(sorted, m), sorted);
}

inline std::vector<std::size_t> plan_local_search(std::span<const std::size_t> items,
                                                  const PreferenceMatrix& m, std::uint64_t seed,
                                                  std::size_t restarts) {
  const auto sorted = detail::canonical_items(items, m);
  const detail::PairTable table(sorted, m);
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> best;
  OrderKey best_key;
  const std::size_t runs = std::max<std::size_t>(restarts, 1);
  for (std::size_t r = 0; r < runs; ++r) {
    std::vector<std::size_t> order;
    if (r == 0) {
      order = detail::greedy_local(sorted, m);
    } else {
      order.resize(sorted.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
    }
    detail::insertion_descent(order, table);
    const OrderKey key = table.key(order);
    if (best.empty() || key.better_than(best_key, detail::kTieEps)) {
      best = std::move(order);
      best_key = key;
    }
  }
  return detail::to_global(best, sorted);
}

inline std::vector<std::size_t> plan_random(std::span<const std::size_t> items, std::uint64_t seed) {
  if (items.empty()) throw Error(ErrorCategory::invalid_input, "plan request has no items");
  std::vector<std::size_t> order(items.begin(), items.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Label-level entry point. The llm method needs a provider and is handled by
// the text pipeline instead.
inline std::vector<std::string> plan(const PlanRequest& req, const PreferenceMatrix& m) {
  const auto idx = resolve_sequence(req.items, m.catalog());
  std::vector<std::size_t> order;
  switch (req.method) {
    case PlanMethod::exact: order = plan_exact(idx, m, req.limits); break;
    case PlanMethod::greedy: order = plan_greedy(idx, m); break;
    case PlanMethod::local_search:
      order = plan_local_search(idx, m, req.seed, req.limits.local_search_restarts);
      break;
    case PlanMethod::random:
      detail::canonical_items(idx, m);
      order = plan_random(idx, req.seed);
      break;
    case PlanMethod::llm:
      throw Error(ErrorCategory::invalid_input, "the llm method requires a chat provider");
  }
  std::vector<std::string> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(m.catalog().name(i));
  return out;
}

}  // namespace packorder

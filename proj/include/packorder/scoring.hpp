#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "packorder/error.hpp"
#include "packorder/preference.hpp"

namespace packorder {

// One (lower position, upper position) contribution to the consistency score.
struct PairTerm {
  std::size_t lower;  // position p
  std::size_t upper;  // position q > p
  double log_prob;    // ln prob[class(p)][class(q)], -inf allowed
};

// Packing Consistency Score: the log-likelihood of a bottom-first sequence
// under the pairwise placement probabilities.
struct ConsistencyScore {
  double value = 0.0;  // finite or -inf
  std::vector<PairTerm> pair_terms;
  std::size_t zero_pairs = 0;

  bool is_finite() const noexcept { return zero_pairs == 0; }
};

// Resolves labels (aliases and plural variants allowed) to catalog indices.
inline std::vector<std::size_t> resolve_sequence(std::span<const std::string> labels,
                                                 const ClassCatalog& catalog) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& label : labels) {
    auto idx = catalog.resolve(label);
    if (!idx) throw Error(ErrorCategory::scoring, "label '" + label + "' is not in the catalog");
    out.push_back(*idx);
  }
  return out;
}

// Sum over position pairs p < q; same-class pairs contribute 0.
inline ConsistencyScore score_indices(std::span<const std::size_t> seq, const PreferenceMatrix& m) {
  ConsistencyScore s;
  double finite_sum = 0.0;
  for (std::size_t p = 0; p < seq.size(); ++p) {
    for (std::size_t q = p + 1; q < seq.size(); ++q) {
      if (seq[p] == seq[q]) {
        s.pair_terms.push_back({p, q, 0.0});
        continue;
      }
      const double pr = m.prob(seq[p], seq[q]);
      if (pr <= 0.0) {
        ++s.zero_pairs;
        s.pair_terms.push_back({p, q, -std::numeric_limits<double>::infinity()});
        continue;
      }
      const double term = std::log(pr);
      s.pair_terms.push_back({p, q, term});
      finite_sum += term;
    }
  }
  s.value = s.zero_pairs > 0 ? -std::numeric_limits<double>::infinity() : finite_sum;
  return s;
}

inline ConsistencyScore score(std::span<const std::string> labels, const PreferenceMatrix& m) {
  if (labels.empty()) throw Error(ErrorCategory::scoring, "cannot score an empty sequence");
  const auto idx = resolve_sequence(labels, m.catalog());
  return score_indices(idx, m);
}

struct AverageScore {
  double value = 0.0;  // -inf when any element is -inf
  std::size_t count = 0;
  std::size_t infinite_count = 0;
};

inline AverageScore average_score(std::span<const ConsistencyScore> scores) {
  if (scores.empty()) throw Error(ErrorCategory::aggregation, "cannot average an empty score list");
  AverageScore avg;
  avg.count = scores.size();
  double sum = 0.0;
  for (const auto& s : scores) {
    if (!s.is_finite()) {
      ++avg.infinite_count;
    } else {
      sum += s.value;
    }
  }
  avg.value = avg.infinite_count > 0 ? -std::numeric_limits<double>::infinity()
                                     : sum / static_cast<double>(scores.size());
  return avg;
}

// Fraction of distinct-class position pairs p < q honoring the majority
// human preference (prob >= 0.5).
inline double constraint_satisfaction_indices(std::span<const std::size_t> seq,
                                              const PreferenceMatrix& m) {
  if (seq.size() < 2) {
    throw Error(ErrorCategory::aggregation,
                "constraint satisfaction rate is undefined for sequences shorter than 2");
  }
  std::size_t pairs = 0;
  std::size_t satisfied = 0;
  for (std::size_t p = 0; p < seq.size(); ++p) {
    for (std::size_t q = p + 1; q < seq.size(); ++q) {
      if (seq[p] == seq[q]) continue;
      ++pairs;
      if (m.prob(seq[p], seq[q]) >= 0.5) ++satisfied;
    }
  }
  if (pairs == 0) {
    throw Error(ErrorCategory::aggregation,
                "constraint satisfaction rate is undefined without distinct-class pairs");
  }
  return static_cast<double>(satisfied) / static_cast<double>(pairs);
}

inline double constraint_satisfaction_rate(std::span<const std::string> labels,
                                           const PreferenceMatrix& m) {
  const auto idx = resolve_sequence(labels, m.catalog());
  return constraint_satisfaction_indices(idx, m);
}

}  // namespace packorder

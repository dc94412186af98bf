#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "packorder/error.hpp"
#include "packorder/label.hpp"

namespace packorder {

enum class Direction { top_first, bottom_first };

inline std::string_view to_string(Direction d) {
  return d == Direction::top_first ? "top_first" : "bottom_first";
}

inline Direction parse_direction(std::string_view s) {
  if (s == "top_first") return Direction::top_first;
  if (s == "bottom_first") return Direction::bottom_first;
  throw Error(ErrorCategory::invalid_input, "unknown direction '" + std::string(s) + "'");
}

struct SurveySequence {
  std::string participant;
  std::vector<std::string> items;

  friend bool operator==(const SurveySequence&, const SurveySequence&) = default;
};

// The set of human-annotated packing sequences.
struct SurveyCorpus {
  Direction direction = Direction::bottom_first;
  std::vector<SurveySequence> sequences;

  friend bool operator==(const SurveyCorpus&, const SurveyCorpus&) = default;
};

// Returns a bottom-first corpus with normalized labels. Duplicates inside a
// sequence collapse to their first occurrence in the *original* order, so a
// top-first sequence is deduplicated before it is reversed.
inline SurveyCorpus normalize_corpus(const SurveyCorpus& corpus) {
  SurveyCorpus out;
  out.direction = Direction::bottom_first;
  out.sequences.reserve(corpus.sequences.size());
  for (const auto& seq : corpus.sequences) {
    SurveySequence norm{seq.participant, {}};
    std::unordered_set<std::string> seen;
    for (const auto& raw : seq.items) {
      std::string label;
      try {
        label = make_class_label(raw);
      } catch (const Error& e) {
        throw Error(e.category(), "participant '" + seq.participant + "': " + e.what());
      }
      if (seen.insert(label).second) norm.items.push_back(std::move(label));
    }
    if (norm.items.size() < 2) {
      throw Error(ErrorCategory::model_build,
                  "participant '" + seq.participant +
                      "': sequence has fewer than 2 distinct items");
    }
    if (corpus.direction == Direction::top_first) {
      std::reverse(norm.items.begin(), norm.items.end());
    }
    out.sequences.push_back(std::move(norm));
  }
  return out;
}

// Pairwise placement probabilities. prob(i, k) is the probability that
// class i sits below class k. Immutable once built.
class PreferenceMatrix {
 public:
  PreferenceMatrix() = default;

  PreferenceMatrix(ClassCatalog catalog, double alpha, std::vector<double> prob,
                   std::vector<std::uint64_t> count, std::vector<std::uint8_t> observed)
      : catalog_(std::move(catalog)),
        alpha_(alpha),
        prob_(std::move(prob)),
        count_(std::move(count)),
        observed_(std::move(observed)) {
    const std::size_t cells = catalog_.size() * catalog_.size();
    if (prob_.size() != cells || count_.size() != cells || observed_.size() != cells) {
      throw Error(ErrorCategory::invalid_input, "preference matrix dimensions do not match catalog");
    }
  }

  const ClassCatalog& catalog() const noexcept { return catalog_; }
  std::size_t size() const noexcept { return catalog_.size(); }
  double alpha() const noexcept { return alpha_; }
  double prob(std::size_t i, std::size_t k) const { return prob_[i * size() + k]; }
  std::uint64_t count(std::size_t i, std::size_t k) const { return count_[i * size() + k]; }
  bool observed(std::size_t i, std::size_t k) const { return observed_[i * size() + k] != 0; }

  friend bool operator==(const PreferenceMatrix&, const PreferenceMatrix&) = default;

 private:
  ClassCatalog catalog_;
  double alpha_ = 0.0;
  std::vector<double> prob_;
  std::vector<std::uint64_t> count_;
  std::vector<std::uint8_t> observed_;
};

// Classes are ordered lexicographically so the result does not depend on the
// order of sequences in the corpus.
inline PreferenceMatrix build_matrix(const SurveyCorpus& corpus, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCategory::invalid_input, "smoothing alpha must be finite and non-negative");
  }
  if (corpus.sequences.empty()) {
    throw Error(ErrorCategory::model_build, "cannot build a preference model from an empty corpus");
  }
  const SurveyCorpus norm = normalize_corpus(corpus);

  std::set<std::string> labels;
  for (const auto& seq : norm.sequences) labels.insert(seq.items.begin(), seq.items.end());
  ClassCatalog catalog(std::vector<std::string>(labels.begin(), labels.end()));
  const std::size_t n = catalog.size();

  std::vector<std::uint64_t> count(n * n, 0);
  std::vector<std::size_t> idx;
  for (const auto& seq : norm.sequences) {
    idx.clear();
    for (const auto& item : seq.items) idx.push_back(*catalog.find_exact(item));
    for (std::size_t p = 0; p < idx.size(); ++p) {
      for (std::size_t q = p + 1; q < idx.size(); ++q) ++count[idx[p] * n + idx[q]];
    }
  }

  std::vector<double> prob(n * n, 0.0);
  std::vector<std::uint8_t> observed(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (i == k) continue;
      const auto below = static_cast<double>(count[i * n + k]);
      const auto above = static_cast<double>(count[k * n + i]);
      if (below + above == 0.0) {
        prob[i * n + k] = 0.5;
        continue;
      }
      observed[i * n + k] = 1;
      prob[i * n + k] = (below + alpha) / (below + above + 2.0 * alpha);
    }
  }
  return PreferenceMatrix(std::move(catalog), alpha, std::move(prob), std::move(count),
                          std::move(observed));
}

inline constexpr double kStrictComplementTolerance = 1e-9;
// Imported tables rounded to three decimals; the extra 1e-12 absorbs the
// binary representation of values such as 0.035 + 0.964.
inline constexpr double kLegacyComplementTolerance = 1e-3 + 1e-12;

inline nlohmann::json to_json(const PreferenceMatrix& m) {
  const std::size_t n = m.size();
  nlohmann::json prob = nlohmann::json::array();
  nlohmann::json count = nlohmann::json::array();
  nlohmann::json observed = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::json prow = nlohmann::json::array();
    nlohmann::json crow = nlohmann::json::array();
    nlohmann::json orow = nlohmann::json::array();
    for (std::size_t k = 0; k < n; ++k) {
      prow.push_back(m.prob(i, k));
      crow.push_back(m.count(i, k));
      orow.push_back(m.observed(i, k));
    }
    prob.push_back(std::move(prow));
    count.push_back(std::move(crow));
    observed.push_back(std::move(orow));
  }
  nlohmann::json doc = {{"classes", m.catalog().names()},
                        {"alpha", m.alpha()},
                        {"prob", std::move(prob)},
                        {"count", std::move(count)},
                        {"observed", std::move(observed)}};
  if (!m.catalog().aliases().empty()) doc["aliases"] = m.catalog().aliases();
  return doc;
}

namespace detail {

inline Error schema_error(const std::string& path, const std::string& msg) {
  return Error(ErrorCategory::invalid_input, path + ": " + msg);
}

inline const nlohmann::json& require_square(const nlohmann::json& doc, const char* field,
                                            std::size_t n) {
  const std::string path = std::string("/") + field;
  if (!doc.contains(field)) throw schema_error(path, "missing field");
  const auto& rows = doc.at(field);
  if (!rows.is_array() || rows.size() != n) {
    throw schema_error(path, "expected an array of " + std::to_string(n) + " rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != n) {
      throw schema_error(path + "/" + std::to_string(i),
                         "expected a row of " + std::to_string(n) + " entries");
    }
  }
  return rows;
}

}  // namespace detail

// Documents without a `count` field are treated as imported probability
// tables: all off-diagonal pairs count as observed and complementarity is
// checked with rounding slack.
inline PreferenceMatrix matrix_from_json(const nlohmann::json& doc) {
  using detail::schema_error;
  if (!doc.is_object()) throw schema_error("/", "expected an object");
  if (!doc.contains("classes") || !doc.at("classes").is_array()) {
    throw schema_error("/classes", "missing or not an array");
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i < doc.at("classes").size(); ++i) {
    const auto& c = doc.at("classes")[i];
    if (!c.is_string()) throw schema_error("/classes/" + std::to_string(i), "expected a string");
    names.push_back(c.get<std::string>());
  }
  ClassCatalog catalog;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::size_t before = catalog.size();
    try {
      catalog.add(names[i]);
    } catch (const Error& e) {
      throw schema_error("/classes/" + std::to_string(i), e.what());
    }
    if (catalog.size() == before) throw schema_error("/classes/" + std::to_string(i), "duplicate class");
  }
  if (doc.contains("aliases")) {
    const auto& al = doc.at("aliases");
    if (!al.is_object()) throw schema_error("/aliases", "expected an object");
    for (const auto& [from, to] : al.items()) {
      if (!to.is_string()) throw schema_error("/aliases/" + from, "expected a string");
      catalog.add_alias(from, to.get<std::string>());
    }
  }
  const std::size_t n = catalog.size();

  double alpha = 0.0;
  if (doc.contains("alpha")) {
    if (!doc.at("alpha").is_number()) throw schema_error("/alpha", "expected a number");
    alpha = doc.at("alpha").get<double>();
    if (!(alpha >= 0.0)) throw schema_error("/alpha", "must be non-negative");
  }

  const bool imported = !doc.contains("count");
  const double tol = imported ? kLegacyComplementTolerance : kStrictComplementTolerance;
  const auto& prows = detail::require_square(doc, "prob", n);

  std::vector<double> prob(n * n);
  std::vector<std::uint64_t> count(n * n, 0);
  std::vector<std::uint8_t> observed(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::string path = "/prob/" + std::to_string(i) + "/" + std::to_string(k);
      const auto& v = prows[i][k];
      if (!v.is_number()) throw schema_error(path, "expected a number");
      const double p = v.get<double>();
      if (!(p >= 0.0 && p <= 1.0)) throw schema_error(path, "probability outside [0,1]");
      prob[i * n + k] = p;
    }
  }
  if (!imported) {
    const auto& crows = detail::require_square(doc, "count", n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const auto& v = crows[i][k];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
          throw schema_error("/count/" + std::to_string(i) + "/" + std::to_string(k),
                             "expected a non-negative integer");
        }
        count[i * n + k] = v.get<std::uint64_t>();
      }
    }
  }
  if (doc.contains("observed")) {
    const auto& orows = detail::require_square(doc, "observed", n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const auto& v = orows[i][k];
        if (!v.is_boolean()) {
          throw schema_error("/observed/" + std::to_string(i) + "/" + std::to_string(k),
                             "expected a boolean");
        }
        observed[i * n + k] = v.get<bool>() ? 1 : 0;
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) observed[i * n + k] = i != k ? 1 : 0;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      const double sum = prob[i * n + k] + prob[k * n + i];
      if (std::abs(sum - 1.0) > tol) {
        throw schema_error("/prob/" + std::to_string(i) + "/" + std::to_string(k),
                           "prob[" + std::to_string(i) + "][" + std::to_string(k) + "] + prob[" +
                               std::to_string(k) + "][" + std::to_string(i) +
                               "] = " + std::to_string(sum) + " is not complementary");
      }
      if (observed[i * n + k] != observed[k * n + i]) {
        throw schema_error("/observed/" + std::to_string(i) + "/" + std::to_string(k),
                           "observed flags are not symmetric");
      }
    }
  }
  return PreferenceMatrix(std::move(catalog), alpha, std::move(prob), std::move(count),
                          std::move(observed));
}

}  // namespace packorder

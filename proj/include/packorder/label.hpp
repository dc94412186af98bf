#pragma once

#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "packorder/error.hpp"

namespace packorder {

// Lowercase (ASCII), trim, and collapse inner whitespace runs to one space.
inline std::string normalize_label(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

// Number of UTF-8 code points.
inline std::size_t char_length(std::string_view text) {
  std::size_t n = 0;
  for (char ch : text) {
    if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) ++n;
  }
  return n;
}

// Normalizes and validates a class label; throws invalid_input on empty
// results or embedded commas.
inline std::string make_class_label(std::string_view raw) {
  std::string label = normalize_label(raw);
  if (label.empty()) {
    throw Error(ErrorCategory::invalid_input, "class label is empty after normalization");
  }
  if (label.find(',') != std::string::npos) {
    throw Error(ErrorCategory::invalid_input, "class label contains a comma: '" + label + "'");
  }
  return label;
}

// Candidate spellings under naive plural handling, most specific first.
inline std::vector<std::string> plural_variants(const std::string& label) {
  std::vector<std::string> out{label, label + "s", label + "es"};
  if (label.size() > 1 && label.back() == 's') out.push_back(label.substr(0, label.size() - 1));
  if (label.size() > 2 && label.ends_with("es")) out.push_back(label.substr(0, label.size() - 2));
  return out;
}

using AliasTable = std::map<std::string, std::string>;

// Ordered set of known classes. Catalog index is the deterministic
// tie-break key used by the planners.
class ClassCatalog {
 public:
  ClassCatalog() = default;

  explicit ClassCatalog(std::vector<std::string> classes, AliasTable aliases = {}) {
    for (auto& c : classes) add(c);
    for (const auto& [from, to] : aliases) add_alias(from, to);
  }

  std::size_t add(std::string_view raw) {
    std::string label = make_class_label(raw);
    if (auto it = index_.find(label); it != index_.end()) return it->second;
    index_.emplace(label, classes_.size());
    classes_.push_back(std::move(label));
    return classes_.size() - 1;
  }

  void add_alias(std::string_view from, std::string_view to) {
    aliases_[normalize_label(from)] = make_class_label(to);
  }

  std::size_t size() const noexcept { return classes_.size(); }
  bool empty() const noexcept { return classes_.empty(); }
  const std::string& name(std::size_t i) const { return classes_.at(i); }
  const std::vector<std::string>& names() const noexcept { return classes_; }
  const AliasTable& aliases() const noexcept { return aliases_; }

  std::optional<std::size_t> find_exact(std::string_view label) const {
    if (auto it = index_.find(std::string(label)); it != index_.end()) return it->second;
    return std::nullopt;
  }

  // Normalize, apply the alias table, then try exact and plural-tolerant
  // lookups.
  std::optional<std::size_t> resolve(std::string_view raw) const {
    std::string label = normalize_label(raw);
    if (label.empty()) return std::nullopt;
    std::vector<std::string> keys{label};
    if (auto it = aliases_.find(label); it != aliases_.end()) keys.insert(keys.begin(), it->second);
    for (const auto& key : keys) {
      for (const auto& v : plural_variants(key)) {
        if (auto hit = find_exact(v)) return hit;
        if (auto it = aliases_.find(v); it != aliases_.end()) {
          if (auto hit = find_exact(it->second)) return hit;
        }
      }
    }
    return std::nullopt;
  }

  friend bool operator==(const ClassCatalog& a, const ClassCatalog& b) {
    return a.classes_ == b.classes_ && a.aliases_ == b.aliases_;
  }

 private:
  std::vector<std::string> classes_;
  std::unordered_map<std::string, std::size_t> index_;
  AliasTable aliases_;
};

}  // namespace packorder

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "packorder/error.hpp"
#include "packorder/label.hpp"
#include "packorder/preference.hpp"

namespace packorder {

struct SceneRecord {
  std::string id;
  std::size_t size = 0;
  std::vector<std::string> ground_truth;
  std::optional<std::string> image;  // resolved relative to the scene file

  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

struct SceneSet {
  std::vector<SceneRecord> scenes;
  ClassCatalog catalog;
  std::size_t min_size = 6;
  std::size_t max_size = 20;
};

struct SceneLoadOptions {
  bool enforce_catalog = true;
};

namespace detail {

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::invalid_input, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCategory::invalid_input, path + ": " + e.what());
  }
}

inline bool is_count(const nlohmann::json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

inline Error file_error(const std::string& file, const std::string& pointer, const std::string& msg) {
  return Error(ErrorCategory::invalid_input, file + ": " + pointer + ": " + msg);
}

inline std::vector<std::string> string_list(const nlohmann::json& j, const std::string& file,
                                            const std::string& pointer) {
  if (!j.is_array()) throw file_error(file, pointer, "expected a list of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw file_error(file, pointer + "/" + std::to_string(i), "expected a string");
    try {
      out.push_back(make_class_label(j[i].get<std::string>()));
    } catch (const Error& e) {
      throw file_error(file, pointer + "/" + std::to_string(i), e.what());
    }
  }
  return out;
}

}  // namespace detail

// `file` is only used for error context and resolving image paths.
inline SceneSet scene_set_from_json(const nlohmann::json& doc, const std::string& file = "<memory>",
                                    SceneLoadOptions opts = {}) {
  using detail::file_error;
  if (!doc.is_object()) throw file_error(file, "/", "expected an object");
  SceneSet set;
  if (doc.contains("catalog")) {
    for (const auto& c : detail::string_list(doc.at("catalog"), file, "/catalog")) set.catalog.add(c);
  } else if (opts.enforce_catalog) {
    throw file_error(file, "/catalog", "missing field");
  }
  if (doc.contains("size_range")) {
    const auto& r = doc.at("size_range");
    if (!r.is_array() || r.size() != 2 || !detail::is_count(r[0]) || !detail::is_count(r[1]) ||
        r[0].get<std::size_t>() > r[1].get<std::size_t>()) {
      throw file_error(file, "/size_range", "expected [min, max] with min <= max");
    }
    set.min_size = r[0].get<std::size_t>();
    set.max_size = r[1].get<std::size_t>();
  }
  if (!doc.contains("scenes") || !doc.at("scenes").is_array()) {
    throw file_error(file, "/scenes", "missing or not a list");
  }
  const auto base = std::filesystem::path(file).parent_path();
  std::set<std::string> ids;
  const auto& scenes = doc.at("scenes");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string ptr = "/scenes/" + std::to_string(i);
    const auto& s = scenes[i];
    if (!s.is_object()) throw file_error(file, ptr, "expected an object");
    SceneRecord rec;
    if (!s.contains("id") || !s.at("id").is_string() || s.at("id").get<std::string>().empty()) {
      throw file_error(file, ptr + "/id", "missing or not a non-empty string");
    }
    rec.id = s.at("id").get<std::string>();
    if (!ids.insert(rec.id).second) throw file_error(file, ptr + "/id", "duplicate scene id '" + rec.id + "'");
    if (!s.contains("ground_truth")) throw file_error(file, ptr + "/ground_truth", "missing field");
    rec.ground_truth = detail::string_list(s.at("ground_truth"), file, ptr + "/ground_truth");
    if (std::set<std::string>(rec.ground_truth.begin(), rec.ground_truth.end()).size() !=
        rec.ground_truth.size()) {
      throw file_error(file, ptr + "/ground_truth", "duplicate label");
    }
    rec.size = rec.ground_truth.size();
    if (s.contains("size")) {
      if (!detail::is_count(s.at("size")) || s.at("size").get<std::size_t>() != rec.size) {
        throw file_error(file, ptr + "/size", "does not match the ground-truth length " + std::to_string(rec.size));
      }
    }
    if (rec.size < set.min_size || rec.size > set.max_size) {
      throw file_error(file, ptr + "/size",
                       "scene size " + std::to_string(rec.size) + " outside declared range [" +
                           std::to_string(set.min_size) + ", " + std::to_string(set.max_size) + "]");
    }
    if (opts.enforce_catalog) {
      for (std::size_t k = 0; k < rec.ground_truth.size(); ++k) {
        if (!set.catalog.find_exact(rec.ground_truth[k])) {
          throw file_error(file, ptr + "/ground_truth/" + std::to_string(k),
                           "unknown label '" + rec.ground_truth[k] + "'");
        }
      }
    }
    if (s.contains("image") && !s.at("image").is_null()) {
      if (!s.at("image").is_string()) throw file_error(file, ptr + "/image", "expected a path string");
      rec.image = (base / s.at("image").get<std::string>()).string();
    }
    set.scenes.push_back(std::move(rec));
  }
  return set;
}

inline SceneSet load_scene_set(const std::string& path, SceneLoadOptions opts = {}) {
  return scene_set_from_json(detail::read_json_file(path), path, opts);
}

inline SurveyCorpus survey_from_json(const nlohmann::json& doc, const std::string& file = "<memory>") {
  using detail::file_error;
  if (!doc.is_object()) throw file_error(file, "/", "expected an object");
  if (!doc.contains("direction") || !doc.at("direction").is_string()) {
    throw file_error(file, "/direction", "missing or not a string");
  }
  SurveyCorpus corpus;
  try {
    corpus.direction = parse_direction(doc.at("direction").get<std::string>());
  } catch (const Error& e) {
    throw file_error(file, "/direction", e.what());
  }
  if (!doc.contains("sequences") || !doc.at("sequences").is_array()) {
    throw file_error(file, "/sequences", "missing or not a list");
  }
  const auto& seqs = doc.at("sequences");
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const std::string ptr = "/sequences/" + std::to_string(i);
    const auto& s = seqs[i];
    if (!s.is_object() || !s.contains("items")) throw file_error(file, ptr, "expected {participant, items}");
    SurveySequence seq;
    if (s.contains("participant")) {
      if (!s.at("participant").is_string()) throw file_error(file, ptr + "/participant", "expected a string");
      seq.participant = s.at("participant").get<std::string>();
    } else {
      seq.participant = "#" + std::to_string(i);
    }
    seq.items = detail::string_list(s.at("items"), file, ptr + "/items");
    corpus.sequences.push_back(std::move(seq));
  }
  return normalize_corpus(corpus);
}

inline SurveyCorpus load_survey(const std::string& path) {
  return survey_from_json(detail::read_json_file(path), path);
}

inline nlohmann::json survey_to_json(const SurveyCorpus& corpus) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : corpus.sequences) seqs.push_back({{"participant", s.participant}, {"items", s.items}});
  return {{"direction", to_string(corpus.direction)}, {"sequences", std::move(seqs)}};
}

inline AliasTable load_aliases(const std::string& path) {
  const auto doc = detail::read_json_file(path);
  if (!doc.is_object()) throw detail::file_error(path, "/", "expected an object of label -> class");
  AliasTable out;
  for (const auto& [from, to] : doc.items()) {
    if (!to.is_string()) throw detail::file_error(path, "/" + from, "expected a string");
    out[normalize_label(from)] = make_class_label(to.get<std::string>());
  }
  return out;
}

struct SynthOptions {
  std::size_t min_items = 2;
  std::size_t max_items = 0;  // 0: whole catalog
  std::size_t sequences_per_participant = 1;
};

// Draws k participants' bottom-first sequences: a random subset of the
// catalog in `true_order`, then one pass of independent adjacent
// transpositions with probability `noise`.
inline SurveyCorpus synth_corpus(const std::vector<std::string>& catalog,
                                 const std::vector<std::size_t>& true_order, double noise,
                                 std::size_t participants, std::uint64_t seed, SynthOptions opts = {}) {
  const std::size_t n = catalog.size();
  if (!(noise >= 0.0 && noise <= 0.5)) throw Error(ErrorCategory::invalid_input, "noise must be within [0, 0.5]");
  if (n < 2) throw Error(ErrorCategory::invalid_input, "synthetic corpus needs at least 2 classes");
  {
    std::vector<std::size_t> check = true_order;
    std::sort(check.begin(), check.end());
    std::vector<std::size_t> iota(n);
    std::iota(iota.begin(), iota.end(), 0);
    if (check != iota) throw Error(ErrorCategory::invalid_input, "true_order is not a permutation of the catalog");
  }
  const std::size_t max_items = opts.max_items == 0 ? n : std::min(opts.max_items, n);
  const std::size_t min_items = std::clamp<std::size_t>(opts.min_items, 2, max_items);

  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[true_order[r]] = r;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size_dist(min_items, max_items);
  std::bernoulli_distribution flip(noise);

  SurveyCorpus corpus;
  corpus.direction = Direction::bottom_first;
  std::vector<std::size_t> pool(n);
  for (std::size_t p = 0; p < participants; ++p) {
    for (std::size_t s = 0; s < std::max<std::size_t>(opts.sequences_per_participant, 1); ++s) {
      std::iota(pool.begin(), pool.end(), 0);
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<std::size_t> pick(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size_dist(rng)));
      std::sort(pick.begin(), pick.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
      for (std::size_t j = 0; j + 1 < pick.size(); ++j) {
        if (flip(rng)) std::swap(pick[j], pick[j + 1]);
      }
      SurveySequence seq{"p" + std::to_string(p), {}};
      for (auto c : pick) seq.items.push_back(catalog[c]);
      corpus.sequences.push_back(std::move(seq));
    }
  }
  return corpus;
}

}  // namespace packorder

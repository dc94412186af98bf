#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "packorder/dataset.hpp"
#include "packorder/error.hpp"
#include "packorder/label.hpp"
#include "packorder/scoring.hpp"
#include "packorder/text_pipeline.hpp"

namespace packorder {

struct Tally {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Tally& operator+=(const Tally& o) {
    tp += o.tp, fp += o.fp, fn += o.fn;
    return *this;
  }
  friend bool operator==(const Tally&, const Tally&) = default;
};

using ClassTallies = std::map<std::string, Tally>;

inline ClassTallies& operator+=(ClassTallies& acc, const ClassTallies& scene) {
  for (const auto& [cls, t] : scene) acc[cls] += t;
  return acc;
}

inline std::string resolve_or_raw(std::string_view label, const ClassCatalog& catalog) {
  if (auto idx = catalog.resolve(label)) return catalog.name(*idx);
  return normalize_label(label);
}

// Presence-based tallies for one scene. Predictions resolve through the
// catalog's aliases and plural variants; unresolved predictions count as
// false positives under their own normalized label.
inline ClassTallies match_labels(std::span<const std::string> predicted, std::span<const std::string> truth,
                                 const ClassCatalog& catalog) {
  std::set<std::string> truth_set;
  for (const auto& t : truth) {
    std::string r = resolve_or_raw(t, catalog);
    if (!r.empty()) truth_set.insert(std::move(r));
  }
  std::set<std::string> pred_set;
  for (const auto& p : predicted) {
    std::string r = resolve_or_raw(p, catalog);
    if (!r.empty()) pred_set.insert(std::move(r));
  }
  ClassTallies out;
  for (const auto& t : truth_set) {
    if (pred_set.contains(t)) {
      out[t].tp = 1;
    } else {
      out[t].fn = 1;
    }
  }
  for (const auto& p : pred_set) {
    if (!truth_set.contains(p)) out[p].fp = 1;
  }
  return out;
}

struct ClassMetrics {
  Tally tally;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct DetectionMetrics {
  std::map<std::string, ClassMetrics> per_class;
  double ap = 0.0;
  double ar = 0.0;
  double af1 = 0.0;
  std::size_t classes_evaluated = 0;
};

inline double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

// Per-class P/R/F1 from tallies accumulated over scenes; averages are taken
// over classes that occur in ground truth at least once.
inline DetectionMetrics f1_scores(const ClassTallies& tallies) {
  DetectionMetrics out;
  double sp = 0.0, sr = 0.0, sf = 0.0;
  for (const auto& [cls, t] : tallies) {
    ClassMetrics cm;
    cm.tally = t;
    cm.precision = t.tp + t.fp > 0 ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp) : 0.0;
    cm.recall = t.tp + t.fn > 0 ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn) : 0.0;
    cm.f1 = f1_score(cm.precision, cm.recall);
    if (t.tp + t.fn > 0) {
      ++out.classes_evaluated;
      sp += cm.precision, sr += cm.recall, sf += cm.f1;
    }
    out.per_class.emplace(cls, cm);
  }
  if (out.classes_evaluated == 0) {
    throw Error(ErrorCategory::evaluation, "no ground-truth classes to evaluate detection against");
  }
  const auto n = static_cast<double>(out.classes_evaluated);
  out.ap = sp / n, out.ar = sr / n, out.af1 = sf / n;
  return out;
}

// Fraction of detected items that appear in the accepted plan (0 when no
// plan was accepted).
inline double scene_success(std::span<const std::string> detected,
                            const std::optional<std::vector<std::string>>& planned) {
  if (!planned || detected.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& d : detected) {
    if (label_appears(normalize_label(d), *planned)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(detected.size());
}

inline double success_rate(std::span<const PipelineResult> results) {
  if (results.empty()) throw Error(ErrorCategory::aggregation, "success rate needs at least one result");
  double sum = 0.0;
  for (const auto& r : results) sum += r.status == PipelineStatus::ok ? scene_success(r.detected, r.planned) : 0.0;
  return sum / static_cast<double>(results.size());
}

// Alternative reading: fraction of runs that ended with an accepted plan.
inline double run_success_rate(std::span<const PipelineResult> results) {
  if (results.empty()) throw Error(ErrorCategory::aggregation, "success rate needs at least one result");
  std::size_t ok = 0;
  for (const auto& r : results) ok += r.status == PipelineStatus::ok ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

// ---------------------------------------------------------------------------
// Report

struct SceneReport {
  std::string id;
  std::size_t size = 0;
  std::vector<std::string> ground_truth;
  PipelineResult result;
  std::vector<std::string> scored_sequence;  // planned labels resolved to matrix classes
  std::size_t unmatched_planned = 0;
  std::optional<double> score;  // may be -inf
  std::optional<double> satisfaction;
  double success = 0.0;
  double time_seconds = 0.0;
};

struct SizeBreakdown {
  std::size_t size = 0;
  std::size_t scenes = 0;
  std::size_t scored = 0;
  std::optional<double> ac;
  std::size_t infinite_count = 0;
  std::optional<double> satisfaction;
  double af1 = 0.0;
  double success_rate = 0.0;
};

struct EvalReport {
  std::string mode;
  DetectionMetrics detection;
  std::optional<double> ac;
  std::size_t scored_scenes = 0;
  std::size_t infinite_count = 0;
  std::optional<double> satisfaction;
  double success_rate = 0.0;
  double run_success_rate = 0.0;
  double mean_time_seconds = 0.0;
  std::map<int, std::size_t> attempts_histogram;
  std::vector<SizeBreakdown> by_size;
  std::vector<SceneReport> scenes;
  nlohmann::json provenance = nlohmann::json::object();
};

struct SceneOutcome {
  std::string scene_id;
  PipelineResult result;
};

namespace detail {

inline std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct ScoreAccumulator {
  std::vector<ConsistencyScore> scores;
  std::vector<double> satisfaction;

  std::optional<double> ac() const {
    if (scores.empty()) return std::nullopt;
    return average_score(scores).value;
  }
  std::size_t infinite() const { return scores.empty() ? 0 : average_score(scores).infinite_count; }
};

}  // namespace detail

// Scores every planned sequence against the matrix and aggregates detection,
// planning and timing metrics. Scenes appear in scene-set order.
inline EvalReport assemble_report(const SceneSet& scenes, std::span<const SceneOutcome> outcomes,
                                  const PreferenceMatrix& matrix, const AliasTable& aliases,
                                  std::string mode, nlohmann::json provenance) {
  std::map<std::string, const PipelineResult*> by_id;
  for (const auto& o : outcomes) {
    if (!by_id.emplace(o.scene_id, &o.result).second) {
      throw Error(ErrorCategory::evaluation, "duplicate outcome for scene '" + o.scene_id + "'");
    }
  }
  if (by_id.size() != scenes.scenes.size()) {
    throw Error(ErrorCategory::evaluation, "outcomes do not cover the scene set");
  }

  ClassCatalog detect_catalog = scenes.catalog;
  ClassCatalog score_catalog = matrix.catalog();
  for (const auto& [from, to] : aliases) {
    detect_catalog.add_alias(from, to);
    score_catalog.add_alias(from, to);
  }

  EvalReport report;
  report.mode = std::move(mode);
  report.provenance = std::move(provenance);

  ClassTallies all;
  std::map<std::size_t, ClassTallies> size_tallies;
  detail::ScoreAccumulator all_scores;
  std::map<std::size_t, detail::ScoreAccumulator> size_scores;
  std::map<std::size_t, std::vector<double>> size_success;
  std::vector<PipelineResult> results;
  double time_sum = 0.0;

  for (const auto& scene : scenes.scenes) {
    auto it = by_id.find(scene.id);
    if (it == by_id.end()) {
      throw Error(ErrorCategory::evaluation, "no outcome for scene '" + scene.id + "'");
    }
    SceneReport sr;
    sr.id = scene.id;
    sr.size = scene.size;
    sr.ground_truth = scene.ground_truth;
    sr.result = *it->second;
    results.push_back(sr.result);

    const auto tallies = match_labels(sr.result.detected, scene.ground_truth, detect_catalog);
    all += tallies;
    size_tallies[scene.size] += tallies;

    if (sr.result.status == PipelineStatus::ok && sr.result.planned) {
      std::vector<std::size_t> idx;
      for (const auto& label : *sr.result.planned) {
        if (auto r = score_catalog.resolve(label)) {
          idx.push_back(*r);
          sr.scored_sequence.push_back(matrix.catalog().name(*r));
        } else {
          ++sr.unmatched_planned;
        }
      }
      if (!idx.empty()) {
        ConsistencyScore cs = score_indices(idx, matrix);
        sr.score = cs.value;
        all_scores.scores.push_back(cs);
        size_scores[scene.size].scores.push_back(cs);
        std::set<std::size_t> distinct(idx.begin(), idx.end());
        if (distinct.size() >= 2) {
          sr.satisfaction = constraint_satisfaction_indices(idx, matrix);
          all_scores.satisfaction.push_back(*sr.satisfaction);
          size_scores[scene.size].satisfaction.push_back(*sr.satisfaction);
        }
      }
      sr.success = scene_success(sr.result.detected, sr.result.planned);
    }
    size_success[scene.size].push_back(sr.success);
    for (const auto& t : sr.result.transcripts) sr.time_seconds += t.latency_seconds;
    time_sum += sr.time_seconds;
    ++report.attempts_histogram[sr.result.attempts];
    report.scenes.push_back(std::move(sr));
  }

  report.detection = f1_scores(all);
  report.ac = all_scores.ac();
  report.scored_scenes = all_scores.scores.size();
  report.infinite_count = all_scores.infinite();
  report.satisfaction = detail::mean_of(all_scores.satisfaction);
  if (!results.empty()) {
    report.success_rate = success_rate(results);
    report.run_success_rate = run_success_rate(results);
    report.mean_time_seconds = time_sum / static_cast<double>(results.size());
  }
  for (const auto& [size, tallies] : size_tallies) {
    SizeBreakdown b;
    b.size = size;
    b.scenes = size_success[size].size();
    const auto& acc = size_scores[size];
    b.scored = acc.scores.size();
    b.ac = acc.ac();
    b.infinite_count = acc.infinite();
    b.satisfaction = detail::mean_of(acc.satisfaction);
    b.af1 = f1_scores(tallies).af1;
    b.success_rate = *detail::mean_of(size_success[size]);
    report.by_size.push_back(b);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization. Extended reals are written as numbers, "-inf", or null.

inline nlohmann::json ext_real_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return *v < 0 ? "-inf" : "inf";
  return *v;
}

inline std::optional<double> ext_real_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw Error(ErrorCategory::invalid_input, "invalid extended real '" + s + "'");
  }
  return j.get<double>();
}

inline nlohmann::json transcript_to_json(const Transcript& t) {
  nlohmann::json j = {{"stage", t.stage},
                      {"attempt", t.attempt},
                      {"request", t.request},
                      {"response", t.response},
                      {"latency_seconds", t.latency_seconds}};
  if (t.usage) {
    j["usage"] = {{"prompt_tokens", t.usage->prompt_tokens}, {"completion_tokens", t.usage->completion_tokens}};
  }
  return j;
}

inline Transcript transcript_from_json(const nlohmann::json& j) {
  Transcript t;
  t.stage = j.at("stage").get<std::string>();
  t.attempt = j.at("attempt").get<int>();
  t.request = j.at("request");
  t.response = j.at("response").get<std::string>();
  t.latency_seconds = j.at("latency_seconds").get<double>();
  if (j.contains("usage")) {
    t.usage = TokenUsage{j.at("usage").at("prompt_tokens").get<std::int64_t>(),
                         j.at("usage").at("completion_tokens").get<std::int64_t>()};
  }
  return t;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [cls, m] : r.detection.per_class) {
    per_class[cls] = {{"tp", m.tally.tp},     {"fp", m.tally.fp},         {"fn", m.tally.fn},
                      {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  }
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [a, c] : r.attempts_histogram) hist[std::to_string(a)] = c;
  nlohmann::json sizes = nlohmann::json::array();
  for (const auto& b : r.by_size) {
    sizes.push_back({{"size", b.size},
                     {"scenes", b.scenes},
                     {"scored", b.scored},
                     {"ac", ext_real_to_json(b.ac)},
                     {"infinite_count", b.infinite_count},
                     {"satisfaction_rate", ext_real_to_json(b.satisfaction)},
                     {"af1", b.af1},
                     {"success_rate", b.success_rate}});
  }
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : r.scenes) {
    nlohmann::json transcripts = nlohmann::json::array();
    for (const auto& t : s.result.transcripts) transcripts.push_back(transcript_to_json(t));
    scenes.push_back({{"id", s.id},
                      {"size", s.size},
                      {"ground_truth", s.ground_truth},
                      {"status", to_string(s.result.status)},
                      {"error", s.result.error},
                      {"detected", s.result.detected},
                      {"planned", s.result.planned ? nlohmann::json(*s.result.planned) : nlohmann::json(nullptr)},
                      {"attempts", s.result.attempts},
                      {"last_response", s.result.last_response},
                      {"scored_sequence", s.scored_sequence},
                      {"unmatched_planned", s.unmatched_planned},
                      {"score", ext_real_to_json(s.score)},
                      {"satisfaction_rate", ext_real_to_json(s.satisfaction)},
                      {"success", s.success},
                      {"time_seconds", s.time_seconds},
                      {"transcripts", std::move(transcripts)}});
  }
  return {{"mode", r.mode},
          {"detection", {{"ap", r.detection.ap}, {"ar", r.detection.ar}, {"af1", r.detection.af1},
                         {"classes_evaluated", r.detection.classes_evaluated}, {"per_class", std::move(per_class)}}},
          {"planning", {{"ac", ext_real_to_json(r.ac)},
                        {"scored_scenes", r.scored_scenes},
                        {"infinite_count", r.infinite_count},
                        {"satisfaction_rate", ext_real_to_json(r.satisfaction)},
                        {"success_rate", r.success_rate},
                        {"run_success_rate", r.run_success_rate},
                        {"mean_time_seconds", r.mean_time_seconds},
                        {"attempts_histogram", std::move(hist)}}},
          {"by_size", std::move(sizes)},
          {"scenes", std::move(scenes)},
          {"provenance", r.provenance}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.mode = j.at("mode").get<std::string>();
    const auto& d = j.at("detection");
    r.detection.ap = d.at("ap").get<double>();
    r.detection.ar = d.at("ar").get<double>();
    r.detection.af1 = d.at("af1").get<double>();
    r.detection.classes_evaluated = d.at("classes_evaluated").get<std::size_t>();
    for (const auto& [cls, m] : d.at("per_class").items()) {
      ClassMetrics cm;
      cm.tally = {m.at("tp").get<std::size_t>(), m.at("fp").get<std::size_t>(), m.at("fn").get<std::size_t>()};
      cm.precision = m.at("precision").get<double>();
      cm.recall = m.at("recall").get<double>();
      cm.f1 = m.at("f1").get<double>();
      r.detection.per_class.emplace(cls, cm);
    }
    const auto& p = j.at("planning");
    r.ac = ext_real_from_json(p.at("ac"));
    r.scored_scenes = p.at("scored_scenes").get<std::size_t>();
    r.infinite_count = p.at("infinite_count").get<std::size_t>();
    r.satisfaction = ext_real_from_json(p.at("satisfaction_rate"));
    r.success_rate = p.at("success_rate").get<double>();
    r.run_success_rate = p.at("run_success_rate").get<double>();
    r.mean_time_seconds = p.at("mean_time_seconds").get<double>();
    for (const auto& [a, c] : p.at("attempts_histogram").items()) {
      r.attempts_histogram[std::stoi(a)] = c.get<std::size_t>();
    }
    for (const auto& b : j.at("by_size")) {
      r.by_size.push_back({b.at("size").get<std::size_t>(), b.at("scenes").get<std::size_t>(),
                           b.at("scored").get<std::size_t>(), ext_real_from_json(b.at("ac")),
                           b.at("infinite_count").get<std::size_t>(),
                           ext_real_from_json(b.at("satisfaction_rate")), b.at("af1").get<double>(),
                           b.at("success_rate").get<double>()});
    }
    for (const auto& s : j.at("scenes")) {
      SceneReport sr;
      sr.id = s.at("id").get<std::string>();
      sr.size = s.at("size").get<std::size_t>();
      sr.ground_truth = s.at("ground_truth").get<std::vector<std::string>>();
      sr.result.status = parse_pipeline_status(s.at("status").get<std::string>());
      sr.result.error = s.at("error").get<std::string>();
      sr.result.detected = s.at("detected").get<std::vector<std::string>>();
      if (!s.at("planned").is_null()) sr.result.planned = s.at("planned").get<std::vector<std::string>>();
      sr.result.attempts = s.at("attempts").get<int>();
      sr.result.last_response = s.at("last_response").get<std::string>();
      for (const auto& t : s.at("transcripts")) sr.result.transcripts.push_back(transcript_from_json(t));
      sr.scored_sequence = s.at("scored_sequence").get<std::vector<std::string>>();
      sr.unmatched_planned = s.at("unmatched_planned").get<std::size_t>();
      sr.score = ext_real_from_json(s.at("score"));
      sr.satisfaction = ext_real_from_json(s.at("satisfaction_rate"));
      sr.success = s.at("success").get<double>();
      sr.time_seconds = s.at("time_seconds").get<double>();
      r.scenes.push_back(std::move(sr));
    }
    r.provenance = j.at("provenance");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::invalid_input, std::string("malformed report: ") + e.what());
  }
}

inline std::string format_ext(const std::optional<double>& v, int precision = 4) {
  if (!v) return "n/a";
  if (std::isinf(*v)) return *v < 0 ? "-inf" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
  return buf;
}

// Aligned plain-text summary.
inline std::string format_report_table(const EvalReport& r) {
  std::ostringstream out;
  char line[256];
  out << "mode: " << r.mode << "\n";
  std::snprintf(line, sizeof line, "AP %.4f  AR %.4f  AF1 %.4f  (%zu classes)\n", r.detection.ap, r.detection.ar,
                r.detection.af1, r.detection.classes_evaluated);
  out << line;
  out << "aC " << format_ext(r.ac) << " over " << r.scored_scenes << " scenes (" << r.infinite_count
      << " at -inf)  satisfaction " << format_ext(r.satisfaction) << "\n";
  std::snprintf(line, sizeof line, "SR %.4f  run SR %.4f  t_frame %.3fs\n", r.success_rate, r.run_success_rate,
                r.mean_time_seconds);
  out << line;
  std::snprintf(line, sizeof line, "%6s %7s %10s %12s %8s %8s\n", "size", "scenes", "aC", "satisfaction", "AF1", "SR");
  out << line;
  for (const auto& b : r.by_size) {
    std::snprintf(line, sizeof line, "%6zu %7zu %10s %12s %8.4f %8.4f\n", b.size, b.scenes, format_ext(b.ac).c_str(),
                  format_ext(b.satisfaction).c_str(), b.af1, b.success_rate);
    out << line;
  }
  return out.str();
}

// scene_size, aC, satisfaction_rate series for plotting.
inline std::string format_report_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "scene_size,ac,satisfaction_rate\n";
  for (const auto& b : r.by_size) {
    out << b.size << "," << format_ext(b.ac, 6) << "," << format_ext(b.satisfaction, 6) << "\n";
  }
  return out.str();
}

}  // namespace packorder

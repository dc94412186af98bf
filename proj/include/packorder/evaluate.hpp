#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "packorder/dataset.hpp"
#include "packorder/metrics.hpp"
#include "packorder/planner.hpp"
#include "packorder/provider.hpp"
#include "packorder/scoring.hpp"
#include "packorder/text_pipeline.hpp"

namespace packorder {

enum class EvalMode { full, planning };

inline std::string_view to_string(EvalMode m) { return m == EvalMode::full ? "full" : "planning"; }

inline EvalMode parse_eval_mode(std::string_view s) {
  if (s == "full") return EvalMode::full;
  if (s == "planning") return EvalMode::planning;
  throw Error(ErrorCategory::invalid_input, "unknown evaluation mode '" + std::string(s) + "'");
}

inline std::string media_type_for(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

inline ImagePayload load_image_payload(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::invalid_input, "cannot open image " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) throw Error(ErrorCategory::invalid_input, "image " + path + " is empty");
  return {media_type_for(path), std::move(bytes)};
}

struct EvaluationInputs {
  const SceneSet& scenes;
  const PreferenceMatrix& matrix;
  const PromptTemplates& templates;
  const ReferenceLexicon& lexicon;
  const ValidationPolicy& policy;
  AliasTable aliases;
};

struct EvaluateOptions {
  EvalMode mode = EvalMode::full;
  std::size_t jobs = 1;
};

inline PipelineResult run_scene(const SceneRecord& scene, const EvaluationInputs& in, ChatProvider& provider,
                                EvalMode mode) {
  try {
    if (mode == EvalMode::planning) {
      return run_planning(scene.ground_truth, provider, in.templates, in.policy);
    }
    SceneInput input;
    if (scene.image) input.image = load_image_payload(*scene.image);
    return run_pipeline(input, provider, in.templates, in.lexicon, in.policy);
  } catch (const PipelineError& e) {
    // Configuration failures abort the whole evaluation.
    if (e.category() == ErrorCategory::authentication || e.category() == ErrorCategory::fixture_exhausted ||
        e.category() == ErrorCategory::invalid_input || e.category() == ErrorCategory::template_error) {
      throw;
    }
    return e.partial();
  }
}

// Runs every scene through the provider. Providers whose response
// assignment depends on call order are driven sequentially.
inline std::vector<SceneOutcome> run_scenes(const EvaluationInputs& in, ChatProvider& provider,
                                            const EvaluateOptions& opts) {
  const auto& scenes = in.scenes.scenes;
  std::vector<SceneOutcome> out(scenes.size());
  const std::size_t jobs =
      provider.order_sensitive() ? 1 : std::clamp<std::size_t>(opts.jobs, 1, std::max<std::size_t>(scenes.size(), 1));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < scenes.size(); i = next++) {
      try {
        out[i] = {scenes[i].id, run_scene(scenes[i], in, provider, opts.mode)};
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = scenes.size();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline nlohmann::json evaluation_provenance(const EvaluationInputs& in, const ProviderConfig& provider,
                                            EvalMode mode) {
  return {{"mode", to_string(mode)},
          {"provider", provider.provenance()},
          {"templates", {{"perception", in.templates.perception.hash()}, {"planning", in.templates.planning.hash()}}},
          {"matrix_sha256", sha256_hex(to_json(in.matrix).dump())},
          {"policy", in.policy.to_json()},
          {"lexicon_sigma", in.lexicon.sigma()},
          {"lexicon_entries", in.lexicon.entries().size()}};
}

inline EvalReport evaluate(const EvaluationInputs& in, ChatProvider& provider, const ProviderConfig& provider_config,
                           const EvaluateOptions& opts = {}) {
  const auto outcomes = run_scenes(in, provider, opts);
  return assemble_report(in.scenes, outcomes, in.matrix, in.aliases, std::string(to_string(opts.mode)),
                         evaluation_provenance(in, provider_config, opts.mode));
}

// ---------------------------------------------------------------------------
// Planner benchmark on ground-truth item sets.

struct BenchOptions {
  std::vector<PlanMethod> methods{PlanMethod::exact, PlanMethod::greedy, PlanMethod::local_search,
                                  PlanMethod::random};
  std::uint64_t seed = 0;
  std::size_t random_draws = 50;
  PlanLimits limits;
};

struct BenchSceneResult {
  std::string id;
  std::size_t size = 0;
  std::map<std::string, std::optional<double>> score;  // absent value: method skipped
};

struct BenchReport {
  std::vector<BenchSceneResult> scenes;
  // size -> method -> mean score over scenes where the method ran
  std::map<std::size_t, std::map<std::string, std::optional<double>>> by_size;
  std::map<std::string, std::optional<double>> overall;
  nlohmann::json provenance = nlohmann::json::object();
};

namespace detail {

inline double mean_extended(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    if (std::isinf(x)) return -std::numeric_limits<double>::infinity();
    s += x;
  }
  return s / static_cast<double>(v.size());
}

}  // namespace detail

inline BenchReport bench(const SceneSet& scenes, const PreferenceMatrix& matrix, const AliasTable& aliases,
                         const BenchOptions& opts) {
  ClassCatalog catalog = matrix.catalog();
  for (const auto& [from, to] : aliases) catalog.add_alias(from, to);

  BenchReport report;
  std::map<std::size_t, std::map<std::string, std::vector<double>>> size_acc;
  std::map<std::string, std::vector<double>> overall_acc;
  for (const auto& scene : scenes.scenes) {
    const auto items = resolve_sequence(scene.ground_truth, catalog);
    BenchSceneResult r{scene.id, scene.size, {}};
    for (auto method : opts.methods) {
      const std::string name(to_string(method));
      std::optional<double> value;
      switch (method) {
        case PlanMethod::exact:
          if (items.size() <= opts.limits.exact_max_items) {
            value = score_indices(plan_exact(items, matrix, opts.limits), matrix).value;
          }
          break;
        case PlanMethod::greedy: value = score_indices(plan_greedy(items, matrix), matrix).value; break;
        case PlanMethod::local_search:
          value = score_indices(plan_local_search(items, matrix, opts.seed, opts.limits.local_search_restarts), matrix)
                      .value;
          break;
        case PlanMethod::random: {
          std::vector<double> draws;
          for (std::size_t d = 0; d < std::max<std::size_t>(opts.random_draws, 1); ++d) {
            draws.push_back(score_indices(plan_random(items, opts.seed + d), matrix).value);
          }
          value = detail::mean_extended(draws);
          break;
        }
        case PlanMethod::llm:
          throw Error(ErrorCategory::invalid_input, "bench does not drive the llm method; use evaluate --mode planning");
      }
      if (value) {
        size_acc[scene.size][name].push_back(*value);
        overall_acc[name].push_back(*value);
      }
      r.score[name] = value;
    }
    report.scenes.push_back(std::move(r));
  }
  for (auto method : opts.methods) {
    const std::string name(to_string(method));
    for (const auto& [size, acc] : size_acc) {
      auto it = acc.find(name);
      report.by_size[size][name] =
          it == acc.end() ? std::nullopt : std::optional<double>(detail::mean_extended(it->second));
    }
    auto it = overall_acc.find(name);
    report.overall[name] = it == overall_acc.end() ? std::nullopt : std::optional<double>(detail::mean_extended(it->second));
  }
  nlohmann::json methods = nlohmann::json::array();
  for (auto m : opts.methods) methods.push_back(to_string(m));
  report.provenance = {{"seed", opts.seed},
                       {"random_draws", opts.random_draws},
                       {"methods", std::move(methods)},
                       {"exact_max_items", opts.limits.exact_max_items},
                       {"local_search_restarts", opts.limits.local_search_restarts},
                       {"matrix_sha256", sha256_hex(to_json(matrix).dump())}};
  return report;
}

inline nlohmann::json to_json(const BenchReport& r) {
  auto scores = [](const std::map<std::string, std::optional<double>>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m) j[k] = ext_real_to_json(v);
    return j;
  };
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : r.scenes) scenes.push_back({{"id", s.id}, {"size", s.size}, {"score", scores(s.score)}});
  nlohmann::json sizes = nlohmann::json::array();
  for (const auto& [size, m] : r.by_size) sizes.push_back({{"size", size}, {"ac", scores(m)}});
  return {{"scenes", std::move(scenes)},
          {"by_size", std::move(sizes)},
          {"overall", scores(r.overall)},
          {"provenance", r.provenance}};
}

inline std::string format_bench_table(const BenchReport& r) {
  std::ostringstream out;
  std::vector<std::string> methods;
  for (const auto& [name, _] : r.overall) methods.push_back(name);
  char cell[64];
  std::snprintf(cell, sizeof cell, "%6s", "size");
  out << cell;
  for (const auto& m : methods) {
    std::snprintf(cell, sizeof cell, " %13s", m.c_str());
    out << cell;
  }
  out << "\n";
  auto row = [&](const std::string& label, const std::map<std::string, std::optional<double>>& vals) {
    std::snprintf(cell, sizeof cell, "%6s", label.c_str());
    out << cell;
    for (const auto& m : methods) {
      auto it = vals.find(m);
      std::snprintf(cell, sizeof cell, " %13s", format_ext(it == vals.end() ? std::nullopt : it->second).c_str());
      out << cell;
    }
    out << "\n";
  };
  for (const auto& [size, vals] : r.by_size) row(std::to_string(size), vals);
  row("all", r.overall);
  return out.str();
}

}  // namespace packorder

// packorder: build preference models, score and plan packing sequences, and
// evaluate perception/planning runs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "packorder/packorder.hpp"

namespace {

using namespace packorder;
using nlohmann::json;

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "   0  success\n"
    "   1  internal error\n"
    "   2  usage error (bad or missing flags)\n"
    "   3  invalid_input: malformed file, label or argument\n"
    "   4  model_build: empty corpus or degenerate survey sequence\n"
    "   5  scoring: label not in the matrix catalog\n"
    "   6  aggregation: empty score list or undefined rate\n"
    "   7  capacity: too many items for exact planning\n"
    "   8  template: unbound prompt placeholder\n"
    "   9  empty_detection: no items parsed from a perception response\n"
    "  10  validation_exhausted: every planning attempt failed validation\n"
    "  11  transport: endpoint unreachable or timed out after retries\n"
    "  12  authentication: endpoint rejected the request (4xx) or key unset\n"
    "  13  fixture_exhausted: mock provider ran out of responses\n"
    "  14  evaluation: no ground-truth classes or mismatched scene sets\n"
    "Errors are reported on stderr as {\"error\": {\"category\": ..., \"message\": ...}}.";

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::invalid_input, "cannot write " + path);
  out << text;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::invalid_input, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::invalid_input, path + ": " + e.what());
  }
}

PreferenceMatrix load_matrix(const std::string& path, const std::string& aliases_path) {
  PreferenceMatrix m = [&] {
    try {
      return matrix_from_json(read_json(path));
    } catch (const Error& e) {
      throw Error(e.category(), path + ": " + e.what());
    }
  }();
  if (aliases_path.empty()) return m;
  ClassCatalog catalog = m.catalog();
  for (const auto& [from, to] : load_aliases(aliases_path)) catalog.add_alias(from, to);
  std::vector<double> prob;
  std::vector<std::uint64_t> count;
  std::vector<std::uint8_t> observed;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      prob.push_back(m.prob(i, k));
      count.push_back(m.count(i, k));
      observed.push_back(m.observed(i, k) ? 1 : 0);
    }
  }
  return PreferenceMatrix(std::move(catalog), m.alpha(), std::move(prob), std::move(count), std::move(observed));
}

// Flags shared by subcommands that talk to a chat provider.
struct ProviderFlags {
  std::string kind = "mock";
  std::string fixtures;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  double temperature = 0.0;
  int timeout_ms = 60000;
  std::string api_key_env = "PACK_ORDER_API_KEY";
  int max_in_flight = 4;
  bool live_ack = false;
  std::string templates;
  double match_threshold = 0.30;
  int max_attempts = 3;
  double outlier_multiplier = 6.0;
  std::string lexicon;

  void add_to(CLI::App* app) {
    app->add_option("--provider", kind, "Chat provider: mock or live")
        ->check(CLI::IsMember({"mock", "live"}))
        ->capture_default_str();
    app->add_option("--fixtures", fixtures, "Mock provider fixture file");
    app->add_option("--endpoint", endpoint, "Chat-completions endpoint URL (live)")->capture_default_str();
    app->add_option("--model", model, "Model name (live)")->capture_default_str();
    app->add_option("--temperature", temperature, "Sampling temperature")->check(CLI::NonNegativeNumber)->capture_default_str();
    app->add_option("--timeout-ms", timeout_ms, "Request timeout in milliseconds")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--api-key-env", api_key_env, "Environment variable holding the bearer token")->capture_default_str();
    app->add_option("--max-in-flight", max_in_flight, "Concurrent live requests")->check(CLI::Range(1, 64))->capture_default_str();
    app->add_flag("--live", live_ack, "Acknowledge that --provider live issues paid API calls");
    app->add_option("--templates", templates, "Prompt template file (JSON)");
    app->add_option("--match-threshold", match_threshold, "Plan validation threshold (strictly greater passes)")->capture_default_str();
    app->add_option("--max-attempts", max_attempts, "Planning attempts before giving up")->capture_default_str();
    app->add_option("--outlier-multiplier", outlier_multiplier, "Detection length cutoff in lexicon sigmas")->capture_default_str();
    app->add_option("--lexicon", lexicon, "Reference lexicon file, one label per line (default: built-in)");
  }

  // Config-file values apply only where the flag was not given.
  void apply_config(const json& cfg, CLI::App* app) {
    auto set = [&](const json& section, const char* key, const char* flag, auto& target) {
      if (section.contains(key) && app->get_option(flag)->count() == 0) {
        target = section.at(key).get<std::decay_t<decltype(target)>>();
      }
    };
    if (cfg.contains("provider")) {
      const auto& p = cfg.at("provider");
      set(p, "kind", "--provider", kind);
      set(p, "fixtures", "--fixtures", fixtures);
      set(p, "endpoint", "--endpoint", endpoint);
      set(p, "model", "--model", model);
      set(p, "temperature", "--temperature", temperature);
      set(p, "timeout_ms", "--timeout-ms", timeout_ms);
      set(p, "api_key_env", "--api-key-env", api_key_env);
      set(p, "max_in_flight", "--max-in-flight", max_in_flight);
    }
    if (cfg.contains("policy")) {
      const auto& p = cfg.at("policy");
      set(p, "match_threshold", "--match-threshold", match_threshold);
      set(p, "max_attempts", "--max-attempts", max_attempts);
      set(p, "outlier_multiplier", "--outlier-multiplier", outlier_multiplier);
    }
    if (cfg.contains("templates")) set(cfg, "templates", "--templates", templates);
    if (cfg.contains("lexicon")) set(cfg, "lexicon", "--lexicon", lexicon);
  }

  ProviderConfig config() const {
    ProviderConfig c;
    c.kind = kind == "live" ? ProviderKind::live : ProviderKind::mock;
    if (c.kind == ProviderKind::live && !live_ack) {
      throw Error(ErrorCategory::invalid_input, "--provider live requires the --live acknowledgment flag");
    }
    c.fixtures_path = fixtures;
    c.endpoint = endpoint;
    c.model = model;
    c.temperature = temperature;
    c.timeout = std::chrono::milliseconds(timeout_ms);
    c.api_key_env = api_key_env;
    c.max_in_flight = max_in_flight;
    c.validate();
    return c;
  }

  ValidationPolicy policy() const {
    ValidationPolicy p{match_threshold, max_attempts, outlier_multiplier};
    p.validate();
    return p;
  }

  PromptTemplates prompt_templates() const { return templates.empty() ? PromptTemplates{} : load_templates(templates); }
  ReferenceLexicon reference_lexicon() const { return lexicon.empty() ? default_lexicon() : load_lexicon(lexicon); }
};

std::vector<std::string> parse_list(const std::string& csv, bool top_first) {
  auto items = split_labels(csv);
  if (top_first) std::reverse(items.begin(), items.end());
  return items;
}

std::vector<std::string> read_sequence_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::invalid_input, "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ',';
  }
  return split_labels(text);
}

json score_json(const std::vector<std::string>& seq, const PreferenceMatrix& m) {
  const auto idx = resolve_sequence(seq, m.catalog());
  const ConsistencyScore s = score_indices(idx, m);
  json terms = json::array();
  for (const auto& t : s.pair_terms) {
    terms.push_back({{"lower", m.catalog().name(idx[t.lower])},
                     {"upper", m.catalog().name(idx[t.upper])},
                     {"log_prob", ext_real_to_json(t.log_prob)}});
  }
  json out = {{"sequence", seq}, {"score", ext_real_to_json(s.value)}, {"pair_terms", std::move(terms)}};
  std::set<std::size_t> distinct(idx.begin(), idx.end());
  out["satisfaction_rate"] = distinct.size() >= 2 ? json(constraint_satisfaction_indices(idx, m)) : json(nullptr);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"packorder: human-preference packing order models, planners and evaluation"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file overriding defaults")->check(CLI::ExistingFile);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print progress to stderr");

  // build-model
  auto* build = app.add_subcommand("build-model", "Build a preference matrix from a survey file");
  build->footer(kExitCodes);
  std::string survey_path, build_out;
  double alpha = 0.0;
  build->add_option("--survey", survey_path, "Survey file (JSON)")->required()->check(CLI::ExistingFile);
  build->add_option("--alpha", alpha, "Smoothing pseudo-count (0 reproduces raw frequencies)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  build->add_option("--out", build_out, "Matrix output file (default: stdout)");

  // score
  auto* score_cmd = app.add_subcommand("score", "Packing Consistency Score of a sequence");
  score_cmd->footer(kExitCodes);
  std::string matrix_path, aliases_path, sequence, sequence_file, score_out;
  bool top_first = false;
  score_cmd->add_option("--matrix", matrix_path, "Preference matrix file")->required()->check(CLI::ExistingFile);
  auto* seq_opt = score_cmd->add_option("--sequence", sequence, "Comma-separated sequence, bottom-first");
  auto* seq_file_opt = score_cmd->add_option("--sequence-file", sequence_file, "Sequence file (one label per line or comma-separated)")
                           ->check(CLI::ExistingFile);
  seq_opt->excludes(seq_file_opt);
  score_cmd->add_flag("--top-first", top_first, "Input sequence lists the top item first");
  score_cmd->add_option("--aliases", aliases_path, "Alias file (JSON map of label -> class)")->check(CLI::ExistingFile);
  score_cmd->add_option("--out", score_out, "Write the structured result to this file");

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "Plan a packing sequence for a set of items");
  plan_cmd->footer(kExitCodes);
  std::string plan_matrix, plan_items, plan_method = "local_search", plan_aliases, plan_out;
  std::uint64_t seed = 0;
  PlanLimits limits;
  ProviderFlags plan_provider;
  plan_cmd->add_option("--matrix", plan_matrix, "Preference matrix file")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--items", plan_items, "Comma-separated items")->required();
  plan_cmd->add_option("--method", plan_method, "exact, greedy, local_search, random or llm")
      ->check(CLI::IsMember({"exact", "greedy", "local_search", "random", "llm"}))
      ->capture_default_str();
  plan_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  plan_cmd->add_option("--exact-max-items", limits.exact_max_items, "Item cap for exact search")->capture_default_str();
  plan_cmd->add_option("--restarts", limits.local_search_restarts, "Local search restarts")->capture_default_str();
  plan_cmd->add_option("--aliases", plan_aliases, "Alias file")->check(CLI::ExistingFile);
  plan_cmd->add_option("--out", plan_out, "Write the structured result to this file");
  plan_provider.add_to(plan_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Run perception and planning over a scene set and report metrics");
  eval_cmd->footer(kExitCodes);
  std::string scenes_path, eval_matrix, eval_aliases, eval_out, eval_csv, eval_mode = "full";
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  ProviderFlags eval_provider;
  eval_cmd->add_option("--scenes", scenes_path, "Scene set file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--matrix", eval_matrix, "Preference matrix file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--aliases", eval_aliases, "Alias file")->check(CLI::ExistingFile);
  eval_cmd->add_option("--mode", eval_mode, "full (perception + planning) or planning (ground truth as detections)")
      ->check(CLI::IsMember({"full", "planning"}))
      ->capture_default_str();
  eval_cmd->add_option("--jobs", jobs, "Concurrent scenes (mock fixtures without fingerprints run sequentially)")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", eval_out, "Report output file (JSON)");
  eval_cmd->add_option("--csv", eval_csv, "Scene-size series output (CSV)");
  eval_provider.add_to(eval_cmd);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Compare planners against the random baseline per scene size");
  bench_cmd->footer(kExitCodes);
  std::string bench_scenes, bench_matrix, bench_aliases, bench_out;
  std::vector<std::string> methods{"exact", "greedy", "local_search", "random"};
  BenchOptions bench_opts;
  bench_cmd->add_option("--scenes", bench_scenes, "Scene set file")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--matrix", bench_matrix, "Preference matrix file")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--methods", methods, "Planners to compare")
      ->check(CLI::IsMember({"exact", "greedy", "local_search", "random"}))
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_opts.seed, "Random seed")->capture_default_str();
  bench_cmd->add_option("--draws", bench_opts.random_draws, "Random-baseline draws per scene")->capture_default_str();
  bench_cmd->add_option("--exact-max-items", bench_opts.limits.exact_max_items, "Item cap for exact search")->capture_default_str();
  bench_cmd->add_option("--restarts", bench_opts.limits.local_search_restarts, "Local search restarts")->capture_default_str();
  bench_cmd->add_option("--aliases", bench_aliases, "Alias file")->check(CLI::ExistingFile);
  bench_cmd->add_option("--out", bench_out, "Report output file (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  json config = json::object();
  if (!config_path.empty()) config = read_json(config_path);

  if (*build) {
    const auto corpus = load_survey(survey_path);
    const auto m = build_matrix(corpus, alpha);
    const std::string doc = to_json(m).dump(2) + "\n";
    if (build_out.empty()) {
      std::cout << doc;
    } else {
      write_text(build_out, doc);
      std::cout << "wrote " << m.size() << "-class matrix from " << corpus.sequences.size() << " sequences to "
                << build_out << "\n";
    }
    return 0;
  }

  if (*score_cmd) {
    if (seq_opt->count() == 0 && seq_file_opt->count() == 0) {
      throw Error(ErrorCategory::invalid_input, "score needs --sequence or --sequence-file");
    }
    const auto m = load_matrix(matrix_path, aliases_path);
    auto seq = seq_opt->count() ? parse_list(sequence, top_first) : read_sequence_file(sequence_file);
    if (seq_file_opt->count() && top_first) std::reverse(seq.begin(), seq.end());
    if (seq.empty()) throw Error(ErrorCategory::invalid_input, "sequence is empty");
    const json result = score_json(seq, m);
    std::cout << "C = " << format_ext(ext_real_from_json(result.at("score")), 6) << "\n";
    for (const auto& t : result.at("pair_terms")) {
      std::cout << "  " << t.at("lower").get<std::string>() << " below " << t.at("upper").get<std::string>() << ": "
                << format_ext(ext_real_from_json(t.at("log_prob")), 6) << "\n";
    }
    if (!score_out.empty()) write_text(score_out, result.dump(2) + "\n");
    return 0;
  }

  if (*plan_cmd) {
    if (plan_cmd->get_option("--exact-max-items")->count() == 0 && config.contains("planner")) {
      limits.exact_max_items = config.at("planner").value("exact_max_items", limits.exact_max_items);
    }
    if (plan_cmd->get_option("--restarts")->count() == 0 && config.contains("planner")) {
      limits.local_search_restarts = config.at("planner").value("local_search_restarts", limits.local_search_restarts);
    }
    const auto m = load_matrix(plan_matrix, plan_aliases);
    const auto items = parse_list(plan_items, false);
    const PlanMethod method = parse_plan_method(plan_method);
    std::vector<std::string> planned;
    json provenance = {{"method", plan_method}, {"seed", seed}};
    json transcripts = json::array();
    if (method == PlanMethod::llm) {
      plan_provider.apply_config(config, plan_cmd);
      const auto pc = plan_provider.config();
      auto provider = make_provider(pc);
      const auto result = run_planning(items, *provider, plan_provider.prompt_templates(), plan_provider.policy());
      for (const auto& t : result.transcripts) transcripts.push_back(transcript_to_json(t));
      provenance["provider"] = pc.provenance();
      provenance["attempts"] = result.attempts;
      // Unresolvable (hallucinated) labels are reported but not scored.
      for (const auto& label : *result.planned) {
        if (m.catalog().resolve(label)) planned.push_back(label);
      }
      if (planned.empty()) throw Error(ErrorCategory::scoring, "no planned label resolves to the matrix catalog");
    } else {
      PlanRequest req{items, method, seed, limits};
      planned = plan(req, m);
    }
    json result = score_json(planned, m);
    result["provenance"] = std::move(provenance);
    if (!transcripts.empty()) result["transcripts"] = std::move(transcripts);
    std::cout << join_labels(planned) << "\n";
    std::cout << "C = " << format_ext(ext_real_from_json(result.at("score")), 6)
              << "  satisfaction = " << format_ext(result.at("satisfaction_rate").is_null()
                                                       ? std::nullopt
                                                       : std::optional<double>(result.at("satisfaction_rate").get<double>()))
              << "  seed = " << seed << "\n";
    if (!plan_out.empty()) write_text(plan_out, result.dump(2) + "\n");
    return 0;
  }

  if (*eval_cmd) {
    eval_provider.apply_config(config, eval_cmd);
    const auto scene_set = load_scene_set(scenes_path);
    const auto m = load_matrix(eval_matrix, {});
    const auto pc = eval_provider.config();
    const auto templates = eval_provider.prompt_templates();
    const auto lexicon = eval_provider.reference_lexicon();
    const auto policy = eval_provider.policy();
    AliasTable aliases = eval_aliases.empty() ? AliasTable{} : load_aliases(eval_aliases);
    auto provider = make_provider(pc);
    EvaluationInputs in{scene_set, m, templates, lexicon, policy, std::move(aliases)};
    if (verbose) std::cerr << "evaluating " << scene_set.scenes.size() << " scenes\n";
    const EvalReport report = evaluate(in, *provider, pc, {parse_eval_mode(eval_mode), jobs});
    std::cout << format_report_table(report);
    if (!eval_out.empty()) write_text(eval_out, to_json(report).dump(2) + "\n");
    if (!eval_csv.empty()) write_text(eval_csv, format_report_csv(report));
    return 0;
  }

  if (*bench_cmd) {
    const auto scene_set = load_scene_set(bench_scenes);
    const auto m = load_matrix(bench_matrix, {});
    AliasTable aliases = bench_aliases.empty() ? AliasTable{} : load_aliases(bench_aliases);
    bench_opts.methods.clear();
    for (const auto& name : methods) bench_opts.methods.push_back(parse_plan_method(name));
    const BenchReport report = bench(scene_set, m, aliases, bench_opts);
    std::cout << format_bench_table(report);
    if (!bench_out.empty()) write_text(bench_out, to_json(report).dump(2) + "\n");
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const packorder::Error& e) {
    const nlohmann::json err = {
        {"error", {{"category", packorder::category_name(e.category())}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return packorder::exit_code(e.category());
  } catch (const std::exception& e) {
    const nlohmann::json err = {{"error", {{"category", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}

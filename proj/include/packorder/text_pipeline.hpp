#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "packorder/error.hpp"
#include "packorder/label.hpp"
#include "packorder/lexicon_data.hpp"
#include "packorder/provider.hpp"

namespace packorder {

struct TemplateMessage {
  std::string role;
  std::string text;

  friend bool operator==(const TemplateMessage&, const TemplateMessage&) = default;
};

// Chat messages with `{name}` placeholders.
struct PromptTemplate {
  std::vector<TemplateMessage> messages;

  std::vector<ChatMessage> render(const std::map<std::string, std::string>& bindings) const {
    std::vector<ChatMessage> out;
    for (const auto& m : messages) {
      std::string text;
      std::size_t pos = 0;
      while (pos < m.text.size()) {
        const auto open = m.text.find('{', pos);
        if (open == std::string::npos) {
          text.append(m.text, pos);
          break;
        }
        const auto close = m.text.find('}', open);
        const std::string name =
            close == std::string::npos ? std::string{} : m.text.substr(open + 1, close - open - 1);
        if (!is_placeholder_name(name)) {
          text.append(m.text, pos, open - pos + 1);
          pos = open + 1;
          continue;
        }
        auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw Error(ErrorCategory::template_error, "unbound placeholder {" + name + "}");
        }
        text.append(m.text, pos, open - pos);
        text += it->second;
        pos = close + 1;
      }
      if (text.empty()) {
        throw Error(ErrorCategory::template_error, "rendered " + m.role + " message is empty");
      }
      out.push_back({m.role, std::move(text), std::nullopt});
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : messages) arr.push_back({{"role", m.role}, {"text", m.text}});
    return arr;
  }

  std::string hash() const { return sha256_hex(to_json().dump()); }

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;

 private:
  static bool is_placeholder_name(const std::string& name) {
    if (name.empty()) return false;
    for (char c : name) {
      if (!((c >= 'a' && c <= 'z') || c == '_')) return false;
    }
    return true;
  }
};

inline constexpr std::string_view kDefaultPerceptionSystem =
    "You are an intelligent AI, assisting a robot in packing a bag of groceries. As a first step, "
    "you need to identify the items in the image. Answer in a comma separated string. For example, "
    "if the image contains apples and bananas, you should answer \"apples, bananas\".";
inline constexpr std::string_view kDefaultPerceptionUser = "Which grocery items are on the image?";
inline constexpr std::string_view kDefaultPlanningSystem =
    "You are an intelligent AI, assisting a robot in packing a bag of groceries. You are provided "
    "with a list of grocery items. The bag should be packed so that no item is damaged. Answer in a "
    "comma separated string. The first item on the list is loaded first and is thus the lowest in "
    "the bag. For example, if the list contains bricks and eggs, you should answer 'bricks, eggs'.";
inline constexpr std::string_view kDefaultPlanningUser =
    "How should the following items be loaded? {item_list}";

struct PromptTemplates {
  PromptTemplate perception{{{"system", std::string(kDefaultPerceptionSystem)},
                             {"user", std::string(kDefaultPerceptionUser)}}};
  PromptTemplate planning{{{"system", std::string(kDefaultPlanningSystem)},
                           {"user", std::string(kDefaultPlanningUser)}}};
};

// Config document: {"perception": [{role, text}...], "planning": [...]}.
// Missing sections keep their defaults.
inline PromptTemplates templates_from_json(const nlohmann::json& doc) {
  PromptTemplates t;
  auto read = [&](const char* key, PromptTemplate& target) {
    if (!doc.contains(key)) return;
    const auto& arr = doc.at(key);
    if (!arr.is_array() || arr.empty()) {
      throw Error(ErrorCategory::invalid_input, std::string("/") + key + ": expected a non-empty list");
    }
    target.messages.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& m = arr[i];
      if (!m.is_object() || !m.contains("role") || !m.contains("text") || !m.at("role").is_string() ||
          !m.at("text").is_string()) {
        throw Error(ErrorCategory::invalid_input,
                    std::string("/") + key + "/" + std::to_string(i) + ": expected {role, text}");
      }
      target.messages.push_back({m.at("role").get<std::string>(), m.at("text").get<std::string>()});
    }
  };
  if (!doc.is_object()) throw Error(ErrorCategory::invalid_input, "template config must be an object");
  read("perception", t.perception);
  read("planning", t.planning);
  return t;
}

inline PromptTemplates load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::invalid_input, "cannot open template file " + path);
  try {
    return templates_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCategory::invalid_input, path + ": " + e.what());
  }
}

// Reference list of common grocery labels; its length spread sets the
// outlier threshold for parsed detections.
class ReferenceLexicon {
 public:
  static constexpr std::size_t kMinEntries = 100;

  explicit ReferenceLexicon(std::vector<std::string> entries) {
    for (const auto& e : entries) {
      std::string label = normalize_label(e);
      if (!label.empty()) entries_.push_back(std::move(label));
    }
    if (entries_.size() < kMinEntries) {
      throw Error(ErrorCategory::invalid_input,
                  "reference lexicon needs at least " + std::to_string(kMinEntries) + " entries, got " +
                      std::to_string(entries_.size()));
    }
    double mean = 0.0;
    for (const auto& e : entries_) mean += static_cast<double>(char_length(e));
    mean /= static_cast<double>(entries_.size());
    double var = 0.0;
    for (const auto& e : entries_) {
      const double d = static_cast<double>(char_length(e)) - mean;
      var += d * d;
    }
    // Population standard deviation.
    sigma_ = std::sqrt(var / static_cast<double>(entries_.size()));
    if (!(sigma_ > 0.0)) {
      throw Error(ErrorCategory::invalid_input, "reference lexicon entries all have the same length");
    }
  }

  const std::vector<std::string>& entries() const noexcept { return entries_; }
  double sigma() const noexcept { return sigma_; }

 private:
  std::vector<std::string> entries_;
  double sigma_ = 0.0;
};

inline ReferenceLexicon default_lexicon() {
  return ReferenceLexicon(std::vector<std::string>(kDefaultGroceryLexicon.begin(), kDefaultGroceryLexicon.end()));
}

inline ReferenceLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::invalid_input, "cannot open lexicon file " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return ReferenceLexicon(std::move(lines));
}

struct ValidationPolicy {
  double match_threshold = 0.30;
  int max_attempts = 3;
  double outlier_multiplier = 6.0;

  void validate() const {
    if (!(match_threshold > 0.0 && match_threshold <= 1.0)) {
      throw Error(ErrorCategory::invalid_input, "match_threshold must be within (0, 1]");
    }
    if (max_attempts < 1) throw Error(ErrorCategory::invalid_input, "max_attempts must be >= 1");
    if (!(outlier_multiplier > 0.0)) {
      throw Error(ErrorCategory::invalid_input, "outlier_multiplier must be > 0");
    }
  }

  nlohmann::json to_json() const {
    return {{"match_threshold", match_threshold},
            {"max_attempts", max_attempts},
            {"outlier_multiplier", outlier_multiplier}};
  }
};

// Splits at commas, normalizes, and drops empty fragments.
inline std::vector<std::string> split_labels(std::string_view raw) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = raw.find(',', pos);
    std::string label = normalize_label(raw.substr(pos, comma == std::string_view::npos ? raw.npos : comma - pos));
    if (!label.empty()) out.push_back(std::move(label));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::string join_labels(std::span<const std::string> labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += ", ";
    out += labels[i];
  }
  return out;
}

// Fragments longer than multiplier * sigma characters are rejected. The
// comparison is strict, so a fragment exactly at the threshold is kept.
inline std::vector<std::string> parse_detection(std::string_view raw, const ReferenceLexicon& lex,
                                                const ValidationPolicy& policy) {
  const double limit = policy.outlier_multiplier * lex.sigma();
  std::vector<std::string> out;
  for (auto& label : split_labels(raw)) {
    if (static_cast<double>(char_length(label)) > limit) continue;
    out.push_back(std::move(label));
  }
  if (out.empty()) throw Error(ErrorCategory::empty_detection, "no grocery items in detection response");
  return out;
}

inline std::vector<ChatMessage> render_planning_prompt(std::span<const std::string> items,
                                                       const PromptTemplate& t) {
  if (items.empty()) throw Error(ErrorCategory::invalid_input, "planning prompt needs at least one item");
  return t.render({{"item_list", join_labels(items)}});
}

// Bidirectional substring containment on normalized labels.
inline bool label_appears(const std::string& detected, std::span<const std::string> candidates) {
  for (const auto& c : candidates) {
    if (c.find(detected) != std::string::npos || detected.find(c) != std::string::npos) return true;
  }
  return false;
}

struct PlanValidation {
  bool accepted = false;  // false is the retry signal
  std::vector<std::string> sequence;
  std::size_t matched = 0;
  std::size_t detected = 0;

  double ratio() const { return detected == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(detected); }
};

inline PlanValidation validate_plan(std::span<const std::string> detected, std::string_view response,
                                    const ValidationPolicy& policy) {
  if (detected.empty()) throw Error(ErrorCategory::invalid_input, "no detected items to validate against");
  PlanValidation v;
  v.sequence = split_labels(response);
  v.detected = detected.size();
  for (const auto& d : detected) {
    if (label_appears(normalize_label(d), v.sequence)) ++v.matched;
  }
  v.accepted = v.ratio() > policy.match_threshold;
  if (!v.accepted) v.sequence.clear();
  return v;
}

inline std::vector<std::string> dedup_preserving_order(std::span<const std::string> labels) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& l : labels) {
    if (seen.insert(l).second) out.push_back(l);
  }
  return out;
}

enum class PipelineStatus { ok, empty_detection, validation_exhausted, provider_error };

inline std::string_view to_string(PipelineStatus s) {
  switch (s) {
    case PipelineStatus::ok: return "ok";
    case PipelineStatus::empty_detection: return "empty_detection";
    case PipelineStatus::validation_exhausted: return "validation_exhausted";
    case PipelineStatus::provider_error: return "provider_error";
  }
  return "unknown";
}

inline PipelineStatus parse_pipeline_status(std::string_view s) {
  for (auto st : {PipelineStatus::ok, PipelineStatus::empty_detection,
                  PipelineStatus::validation_exhausted, PipelineStatus::provider_error}) {
    if (s == to_string(st)) return st;
  }
  throw Error(ErrorCategory::invalid_input, "unknown pipeline status '" + std::string(s) + "'");
}

struct Transcript {
  std::string stage;  // "perception" or "planning"
  int attempt = 1;
  nlohmann::json request;  // canonical_messages() form
  std::string response;
  double latency_seconds = 0.0;
  std::optional<TokenUsage> usage;
};

struct PipelineResult {
  PipelineStatus status = PipelineStatus::ok;
  std::vector<std::string> detected;
  std::optional<std::vector<std::string>> planned;
  int attempts = 0;  // planning calls issued
  std::vector<Transcript> transcripts;
  std::string error;
  std::string last_response;
};

// Carries the partial result so callers can keep transcripts of failed runs.
class PipelineError : public Error {
 public:
  PipelineError(ErrorCategory category, const std::string& what, PipelineResult partial)
      : Error(category, what), partial_(std::move(partial)) {}

  const PipelineResult& partial() const noexcept { return partial_; }

 private:
  PipelineResult partial_;
};

struct SceneInput {
  std::optional<ImagePayload> image;
};

namespace detail {

inline ChatExchange call_provider(ChatProvider& provider, const std::vector<ChatMessage>& messages,
                                  const char* stage, int attempt, PipelineResult& result) {
  try {
    ChatExchange ex = provider.complete(messages);
    result.transcripts.push_back({stage, attempt, canonical_messages(messages), ex.response,
                                  ex.latency.count(), ex.usage});
    return ex;
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    result.status = PipelineStatus::provider_error;
    result.error = std::string(stage) + " attempt " + std::to_string(attempt) + ": " + e.what();
    throw PipelineError(e.category(), result.error, result);
  }
}

}  // namespace detail

// Planning step with the validation/retry loop. `detected` is used as given.
inline PipelineResult run_planning(std::span<const std::string> detected, ChatProvider& provider,
                                   const PromptTemplates& templates, const ValidationPolicy& policy,
                                   PipelineResult result = {}) {
  policy.validate();
  result.detected.assign(detected.begin(), detected.end());
  const auto messages = render_planning_prompt(detected, templates.planning);
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    result.attempts = attempt;
    const ChatExchange ex = detail::call_provider(provider, messages, "planning", attempt, result);
    result.last_response = ex.response;
    PlanValidation v = validate_plan(detected, ex.response, policy);
    if (v.accepted) {
      result.planned = std::move(v.sequence);
      result.status = PipelineStatus::ok;
      return result;
    }
  }
  result.status = PipelineStatus::validation_exhausted;
  result.error = "plan validation failed " + std::to_string(policy.max_attempts) +
                 " times; last response: " + result.last_response;
  throw PipelineError(ErrorCategory::validation_exhausted, result.error, result);
}

// Perception call, detection parsing and dedup, then the planning loop.
inline PipelineResult run_pipeline(const SceneInput& scene, ChatProvider& provider,
                                   const PromptTemplates& templates, const ReferenceLexicon& lex,
                                   const ValidationPolicy& policy) {
  policy.validate();
  PipelineResult result;
  auto messages = templates.perception.render({});
  if (scene.image) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
      if (it->role == "user") {
        it->image = scene.image;
        break;
      }
    }
  }
  const ChatExchange ex = detail::call_provider(provider, messages, "perception", 1, result);
  try {
    result.detected = dedup_preserving_order(parse_detection(ex.response, lex, policy));
  } catch (const Error& e) {
    result.status = PipelineStatus::empty_detection;
    result.error = e.what();
    result.last_response = ex.response;
    throw PipelineError(e.category(), result.error, result);
  }
  const auto detected = result.detected;
  return run_planning(detected, provider, templates, policy, std::move(result));
}

// Fingerprinted fixtures that replay the given transcripts exactly.
inline std::vector<FixtureRecord> fixtures_from_transcripts(std::span<const Transcript> transcripts) {
  std::vector<FixtureRecord> out;
  for (const auto& t : transcripts) out.push_back({sha256_hex(t.request.dump()), t.response});
  return out;
}

}  // namespace packorder

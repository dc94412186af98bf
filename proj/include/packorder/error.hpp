#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace packorder {

// Each category maps to one CLI exit code (see exit_code()).
enum class ErrorCategory {
  invalid_input,      // malformed label, schema violation, bad argument
  model_build,        // empty corpus, degenerate sequence
  scoring,            // unresolvable label
  aggregation,        // empty score list, undefined rate
  capacity,           // exact planner item cap exceeded
  template_error,     // unbound placeholder
  empty_detection,
  validation_exhausted,
  transport,          // timeout, connection failure, 5xx after retries
  authentication,     // 4xx from the endpoint
  fixture_exhausted,
  evaluation,         // no ground-truth classes, mismatched scene sets
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_input: return "invalid_input";
    case ErrorCategory::model_build: return "model_build";
    case ErrorCategory::scoring: return "scoring";
    case ErrorCategory::aggregation: return "aggregation";
    case ErrorCategory::capacity: return "capacity";
    case ErrorCategory::template_error: return "template";
    case ErrorCategory::empty_detection: return "empty_detection";
    case ErrorCategory::validation_exhausted: return "validation_exhausted";
    case ErrorCategory::transport: return "transport";
    case ErrorCategory::authentication: return "authentication";
    case ErrorCategory::fixture_exhausted: return "fixture_exhausted";
    case ErrorCategory::evaluation: return "evaluation";
  }
  return "unknown";
}

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_input: return 3;
    case ErrorCategory::model_build: return 4;
    case ErrorCategory::scoring: return 5;
    case ErrorCategory::aggregation: return 6;
    case ErrorCategory::capacity: return 7;
    case ErrorCategory::template_error: return 8;
    case ErrorCategory::empty_detection: return 9;
    case ErrorCategory::validation_exhausted: return 10;
    case ErrorCategory::transport: return 11;
    case ErrorCategory::authentication: return 12;
    case ErrorCategory::fixture_exhausted: return 13;
    case ErrorCategory::evaluation: return 14;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace packorder

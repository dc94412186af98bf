#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "packorder/error.hpp"

namespace packorder {

// Opaque image bytes forwarded to a remote model; never decoded locally.
struct ImagePayload {
  std::string media_type;
  std::string bytes;

  friend bool operator==(const ImagePayload&, const ImagePayload&) = default;
};

struct ChatMessage {
  std::string role;
  std::string text;
  std::optional<ImagePayload> image;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatExchange {
  std::vector<ChatMessage> request;
  std::string response;
  std::chrono::duration<double> latency{0.0};
  std::optional<TokenUsage> usage;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0x0F]);
  }
  return out;
}

inline std::string base64_encode(std::string_view data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(data.data()),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

// Canonical description of a message list; images are represented by their
// media type and content hash.
inline nlohmann::json canonical_messages(const std::vector<ChatMessage>& messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) {
    nlohmann::json j = {{"role", m.role}, {"text", m.text}};
    if (m.image) {
      j["image"] = {{"media_type", m.image->media_type}, {"sha256", sha256_hex(m.image->bytes)}};
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::string fingerprint(const std::vector<ChatMessage>& messages) {
  return sha256_hex(canonical_messages(messages).dump());
}

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatExchange complete(const std::vector<ChatMessage>& messages) = 0;
  // Whether concurrent callers observe a deterministic response assignment.
  virtual bool order_sensitive() const { return false; }
};

struct FixtureRecord {
  std::optional<std::string> fingerprint;
  std::string response;
};

inline std::vector<FixtureRecord> fixtures_from_json(const nlohmann::json& doc) {
  const nlohmann::json& arr = doc.is_object() && doc.contains("responses") ? doc.at("responses") : doc;
  if (!arr.is_array()) {
    throw Error(ErrorCategory::invalid_input, "fixture document must be a list of records");
  }
  std::vector<FixtureRecord> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& r = arr[i];
    const std::string path = "/" + std::to_string(i);
    if (!r.is_object() || !r.contains("response") || !r.at("response").is_string()) {
      throw Error(ErrorCategory::invalid_input, "fixture " + path + ": missing string 'response'");
    }
    FixtureRecord rec{std::nullopt, r.at("response").get<std::string>()};
    if (r.contains("fingerprint") && !r.at("fingerprint").is_null()) {
      if (!r.at("fingerprint").is_string()) {
        throw Error(ErrorCategory::invalid_input, "fixture " + path + ": 'fingerprint' must be a string");
      }
      rec.fingerprint = r.at("fingerprint").get<std::string>();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline nlohmann::json fixtures_to_json(const std::vector<FixtureRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json j = {{"response", r.response}};
    if (r.fingerprint) j["fingerprint"] = *r.fingerprint;
    arr.push_back(std::move(j));
  }
  return arr;
}

// Replays fixture responses. A request consumes the first unused record
// whose fingerprint matches; otherwise the first unused record without a
// fingerprint.
class MockProvider final : public ChatProvider {
 public:
  explicit MockProvider(std::vector<FixtureRecord> records)
      : records_(std::move(records)), used_(records_.size(), false) {}

  ChatExchange complete(const std::vector<ChatMessage>& messages) override {
    const std::string fp = fingerprint(messages);
    std::lock_guard lock(mu_);
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < records_.size() && !pick; ++i) {
      if (!used_[i] && records_[i].fingerprint == fp) pick = i;
    }
    for (std::size_t i = 0; i < records_.size() && !pick; ++i) {
      if (!used_[i] && !records_[i].fingerprint) pick = i;
    }
    if (!pick) {
      throw Error(ErrorCategory::fixture_exhausted,
                  "no unused fixture response for request " + fp.substr(0, 12));
    }
    used_[*pick] = true;
    return ChatExchange{messages, records_[*pick].response, std::chrono::duration<double>(0.0),
                        std::nullopt};
  }

  // Positional records, or two records for the same request, make the
  // assignment depend on call order.
  bool order_sensitive() const override {
    std::set<std::string> seen;
    for (const auto& r : records_) {
      if (!r.fingerprint || !seen.insert(*r.fingerprint).second) return true;
    }
    return false;
  }

  std::size_t remaining() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (bool u : used_) n += u ? 0 : 1;
    return n;
  }

 private:
  std::vector<FixtureRecord> records_;
  std::vector<bool> used_;
  mutable std::mutex mu_;
};

enum class ProviderKind { live, mock };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::mock;
  std::string endpoint;  // e.g. https://api.openai.com/v1/chat/completions
  std::string model;
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  std::string api_key_env = "PACK_ORDER_API_KEY";
  std::string fixtures_path;
  int transport_retries = 2;
  std::chrono::milliseconds backoff{500};
  int max_in_flight = 4;

  void validate() const {
    if (kind == ProviderKind::live) {
      if (endpoint.empty()) throw Error(ErrorCategory::invalid_input, "live provider requires an endpoint");
      if (api_key_env.empty()) {
        throw Error(ErrorCategory::invalid_input, "live provider requires an API key variable name");
      }
      if (model.empty()) throw Error(ErrorCategory::invalid_input, "live provider requires a model name");
    } else if (fixtures_path.empty()) {
      throw Error(ErrorCategory::invalid_input, "mock provider requires a fixtures path");
    }
    if (!(temperature >= 0.0)) throw Error(ErrorCategory::invalid_input, "temperature must be >= 0");
    if (max_in_flight < 1 || max_in_flight > 64) {
      throw Error(ErrorCategory::invalid_input, "max_in_flight must be within [1, 64]");
    }
  }

  nlohmann::json provenance() const {
    nlohmann::json j = {{"kind", kind == ProviderKind::live ? "live" : "mock"},
                        {"temperature", temperature}};
    if (kind == ProviderKind::live) {
      j["endpoint"] = endpoint;
      j["model"] = model;
      j["api_key_env"] = api_key_env;
    } else {
      j["fixtures"] = fixtures_path;
    }
    return j;
  }
};

// OpenAI-compatible chat completions request body.
inline nlohmann::json chat_request_body(const std::vector<ChatMessage>& messages,
                                        const std::string& model, double temperature) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    if (!m.image) {
      msgs.push_back({{"role", m.role}, {"content", m.text}});
      continue;
    }
    if (m.image->bytes.empty()) {
      throw Error(ErrorCategory::invalid_input, "image payload is empty");
    }
    const std::string url = "data:" + m.image->media_type + ";base64," + base64_encode(m.image->bytes);
    msgs.push_back({{"role", m.role},
                    {"content",
                     nlohmann::json::array({{{"type", "text"}, {"text", m.text}},
                                            {{"type", "image_url"}, {"image_url", {{"url", url}}}}})}});
  }
  return {{"model", model}, {"messages", std::move(msgs)}, {"temperature", temperature}};
}

class LiveProvider final : public ChatProvider {
 public:
  explicit LiveProvider(ProviderConfig config)
      : config_(std::move(config)), in_flight_(config_.max_in_flight) {
    config_.validate();
    parse_endpoint();
  }

  ChatExchange complete(const std::vector<ChatMessage>& messages) override {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCategory::authentication,
                  "environment variable " + config_.api_key_env + " is not set");
    }
    const std::string body = chat_request_body(messages, config_.model, config_.temperature).dump();

    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<64>& s;
      ~Release() { s.release(); }
    } release{in_flight_};

    std::string last_error;
    for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
      httplib::Client client(base_url_);
      const auto secs = config_.timeout.count() / 1000;
      const auto usecs = (config_.timeout.count() % 1000) * 1000;
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      client.set_bearer_token_auth(key);

      const auto start = std::chrono::steady_clock::now();
      auto res = client.Post(path_, body, "application/json");
      const std::chrono::duration<double> latency = std::chrono::steady_clock::now() - start;
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
        continue;
      }
      if (res->status >= 400) {
        throw Error(ErrorCategory::authentication,
                    "HTTP " + std::to_string(res->status) + " from endpoint: " + res->body);
      }
      return parse_response(messages, res->body, latency);
    }
    throw Error(ErrorCategory::transport,
                last_error + " (after " + std::to_string(config_.transport_retries + 1) + " attempts)");
  }

 private:
  void parse_endpoint() {
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(ErrorCategory::invalid_input, "endpoint must be an absolute URL");
    }
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    base_url_ = config_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  }

  static ChatExchange parse_response(const std::vector<ChatMessage>& messages,
                                     const std::string& body,
                                     std::chrono::duration<double> latency) {
    ChatExchange ex{messages, {}, latency, std::nullopt};
    try {
      const auto doc = nlohmann::json::parse(body);
      const auto& content = doc.at("choices").at(0).at("message").at("content");
      ex.response = content.is_string() ? content.get<std::string>() : std::string{};
      if (doc.contains("usage") && doc.at("usage").is_object()) {
        const auto& u = doc.at("usage");
        ex.usage = TokenUsage{u.value("prompt_tokens", std::int64_t{0}),
                              u.value("completion_tokens", std::int64_t{0})};
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCategory::transport, std::string("malformed completion response: ") + e.what());
    }
    return ex;
  }

  ProviderConfig config_;
  std::string base_url_;
  std::string path_;
  std::counting_semaphore<64> in_flight_;
};

inline std::vector<FixtureRecord> load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::invalid_input, "cannot open fixtures file " + path);
  try {
    return fixtures_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCategory::invalid_input, path + ": " + e.what());
  }
}

inline std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& config) {
  config.validate();
  if (config.kind == ProviderKind::mock) {
    return std::make_unique<MockProvider>(load_fixtures(config.fixtures_path));
  }
  return std::make_unique<LiveProvider>(config);
}

}  // namespace packorder

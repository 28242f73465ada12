#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "skillmind/errors.hpp"

namespace skillmind {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct BackendConfig {
  std::string endpoint_url;  // e.g. "http://localhost:8080/v1"
  std::string model_name;
  double temperature = 0.7;
  int max_output_tokens = 1024;
  double request_timeout_s = 60.0;
  int max_retries = 3;
  int max_concurrency = 4;
  std::string api_key_env = "SKILLMIND_API_KEY";
  int retry_backoff_ms = 1000;  // doubles per attempt
};

struct AuthError : Error {
  explicit AuthError(const std::string& message) : Error("auth", message) {}
};

struct RateLimitedError : Error {
  explicit RateLimitedError(const std::string& message) : Error("rate_limited", message) {}
};

struct TransportError : Error {
  explicit TransportError(const std::string& message) : Error("transport", message) {}
};

struct MalformedResponseError : Error {
  explicit MalformedResponseError(const std::string& message)
      : Error("malformed_response", message) {}
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

namespace detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path_prefix;
};

inline SplitUrl split_endpoint_url(const std::string& url) {
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw TransportError("endpoint_url missing scheme: " + url);
  }
  std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return SplitUrl{url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return SplitUrl{url.substr(0, path_start), prefix};
}

}  // namespace detail

/// OpenAI-compatible chat-completions client. Retries timeouts, HTTP 429 and
/// 5xx with exponential backoff; 401/403 fail immediately as AuthError.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config) : config_(std::move(config)) {}

  const BackendConfig& config() const { return config_; }

  std::string complete(const std::vector<ChatMessage>& messages) override {
    detail::SplitUrl url = detail::split_endpoint_url(config_.endpoint_url);
    httplib::Client client(url.base);
    auto timeout = std::chrono::milliseconds(
        static_cast<long long>(config_.request_timeout_s * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }

    nlohmann::json body;
    body["model"] = config_.model_name;
    nlohmann::json msgs = nlohmann::json::array();
    for (const ChatMessage& m : messages) {
      msgs.push_back({{"role", m.role}, {"content", m.content}});
    }
    body["messages"] = std::move(msgs);
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_output_tokens;
    const std::string payload = body.dump();
    const std::string path = url.path_prefix + "/chat/completions";

    int backoff_ms = config_.retry_backoff_ms;
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
      }
      httplib::Result res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_failure = "connection failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403) {
        throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) +
                        "); expected key in $" + config_.api_key_env);
      }
      if (res->status == 429) {
        last_failure = "HTTP 429";
        if (attempt == config_.max_retries) {
          throw RateLimitedError("rate limited after " + std::to_string(attempt + 1) +
                                 " attempts");
        }
        continue;
      }
      if (res->status >= 500) {
        last_failure = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
      }
      return extract_content(res->body);
    }
    throw TransportError(last_failure + " after " + std::to_string(config_.max_retries + 1) +
                         " attempts");
  }

 private:
  static std::string extract_content(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponseError(std::string("response is not JSON: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
      throw MalformedResponseError("response has no choices");
    }
    const auto& first = j["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
      throw MalformedResponseError("choices[0].message.content missing");
    }
    return first["message"]["content"].get<std::string>();
  }

  BackendConfig config_;
};

/// Test/offline backend: completions come from a caller-provided handler.
class MockChatBackend : public ChatBackend {
 public:
  using Handler = std::function<std::string(const std::vector<ChatMessage>&)>;

  explicit MockChatBackend(Handler handler) : handler_(std::move(handler)) {}
  explicit MockChatBackend(std::string canned)
      : handler_([text = std::move(canned)](const std::vector<ChatMessage>&) { return text; }) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    return handler_(messages);
  }

 private:
  Handler handler_;
};

inline std::string complete(const BackendConfig& backend,
                            const std::vector<ChatMessage>& messages) {
  HttpChatBackend client(backend);
  return client.complete(messages);
}

inline nlohmann::json backend_config_to_json(const BackendConfig& c) {
  nlohmann::json j;
  j["endpoint_url"] = c.endpoint_url;
  j["model_name"] = c.model_name;
  j["temperature"] = c.temperature;
  j["max_output_tokens"] = c.max_output_tokens;
  j["request_timeout_s"] = c.request_timeout_s;
  j["max_retries"] = c.max_retries;
  j["max_concurrency"] = c.max_concurrency;
  j["api_key_env"] = c.api_key_env;
  j["retry_backoff_ms"] = c.retry_backoff_ms;
  return j;
}

inline BackendConfig backend_config_from_json(const nlohmann::json& j) {
  BackendConfig c;
  if (!j.is_object()) throw ParseError("backend config must be an object");
  if (j.contains("endpoint_url")) c.endpoint_url = j["endpoint_url"].get<std::string>();
  if (j.contains("model_name")) c.model_name = j["model_name"].get<std::string>();
  if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
  if (j.contains("max_output_tokens")) c.max_output_tokens = j["max_output_tokens"].get<int>();
  if (j.contains("request_timeout_s")) c.request_timeout_s = j["request_timeout_s"].get<double>();
  if (j.contains("max_retries")) c.max_retries = j["max_retries"].get<int>();
  if (j.contains("max_concurrency")) c.max_concurrency = j["max_concurrency"].get<int>();
  if (j.contains("api_key_env")) c.api_key_env = j["api_key_env"].get<std::string>();
  if (j.contains("retry_backoff_ms")) c.retry_backoff_ms = j["retry_backoff_ms"].get<int>();
  if (c.max_concurrency < 1) throw ParseError("max_concurrency must be >= 1");
  if (c.max_retries < 0) throw ParseError("max_retries must be >= 0");
  if (c.temperature < 0.0) throw ParseError("temperature must be >= 0");
  if (c.max_output_tokens < 1) throw ParseError("max_output_tokens must be >= 1");
  return c;
}

}  // namespace skillmind

// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// Remote reasoner speaking a chat-completions-style request/response over
// HTTP. Endpoint, key, and model come from config or the CONAN_REASONER_*
// environment variables.

#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "conan/errors.hpp"
#include "conan/labels.hpp"
#include "conan/reasoner.hpp"
#include "conan/util.hpp"

namespace conan::tracer {

struct HttpReasonerConfig {
  std::string url;  // full endpoint, e.g. http://host:8000/v1/chat/completions
  std::string api_key;
  std::string model = "default";
  int max_retries = 3;   // attempts = max_retries + 1
  int backoff_ms = 500;  // doubled after each failure
  int timeout_s = 60;

  void validate() const {
    if (url.empty()) throw ConfigError("reasoner url is empty");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (backoff_ms < 0) throw ConfigError("backoff_ms must be >= 0");
  }

  /// Reads CONAN_REASONER_URL / CONAN_REASONER_KEY / CONAN_REASONER_MODEL.
  /// Empty when no URL is configured.
  static std::optional<HttpReasonerConfig> from_env() {
    const auto url = env_var("CONAN_REASONER_URL");
    if (!url) return std::nullopt;
    HttpReasonerConfig cfg;
    cfg.url = *url;
    cfg.api_key = env_var("CONAN_REASONER_KEY").value_or("");
    cfg.model = env_var("CONAN_REASONER_MODEL").value_or(cfg.model);
    return cfg;
  }
};

namespace detail {

struct SplitUrl {
  std::string host_port;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos)
    throw ConfigError("reasoner url needs a scheme: " + url);
  const auto path = url.find('/', scheme + 3);
  if (path == std::string::npos) return SplitUrl{url, "/"};
  return SplitUrl{url.substr(0, path), url.substr(path)};
}

inline std::string build_prompt(const ReasonerRequest& req) {
  std::string prompt =
      "You are writing one round of a grounded video reasoning trace.\n"
      "Question: " + req.question + "\nRound: " +
      std::to_string(req.round_index) + "\nVisible frames:\n";
  for (const auto& f : req.frames) {
    prompt += "- [" + std::to_string(f.index) + "] t=" +
              fmt_sig9(f.timestamp) + "s (" + std::string(label_name(f.label)) +
              "): " + f.description + "\n";
  }
  prompt +=
      "Chosen action: " + req.action_summary +
      "\nWrite a short reasoning paragraph that analyzes the question and the "
      "visible frames, then arrives at exactly this action. Plain text only, "
      "no angle brackets.";
  return prompt;
}

}  // namespace detail

class HttpReasoner final : public ReasonerClient {
 public:
  explicit HttpReasoner(HttpReasonerConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    endpoint_ = detail::split_url(cfg_.url);
  }

  std::string reason(const ReasonerRequest& request) override {
    const nlohmann::json body{
        {"model", cfg_.model},
        {"messages",
         {{{"role", "user"}, {"content", detail::build_prompt(request)}}}},
        {"temperature", 0.7}};

    std::string last_error = "no attempt made";
    int backoff = cfg_.backoff_ms;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0 && backoff > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
      httplib::Client client(endpoint_.host_port);
      client.set_connection_timeout(cfg_.timeout_s);
      client.set_read_timeout(cfg_.timeout_s);
      httplib::Headers headers;
      if (!cfg_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + cfg_.api_key);
      const auto res =
          client.Post(endpoint_.path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) {
        last_error = "response is not valid JSON";
        continue;
      }
      try {
        return parsed.at("choices").at(0).at("message").at("content")
            .get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("unexpected response shape: ") + e.what();
      }
    }
    throw ReasonerError("reasoner failed after " +
                        std::to_string(cfg_.max_retries + 1) + " attempts (" +
                        last_error + ")");
  }

 private:
  HttpReasonerConfig cfg_;
  detail::SplitUrl endpoint_;
};

}  // namespace conan::tracer

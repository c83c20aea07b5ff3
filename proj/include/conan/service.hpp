// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// HTTP wiring for the reward-verifier service. Stateless by design: the
// trainer resolves retrieval actions to frame labels, so the service never
// holds a corpus and scales horizontally. No auth or TLS; deploy behind a
// proxy.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "conan/errors.hpp"
#include "conan/score_api.hpp"
#include "conan/util.hpp"

namespace conan::service {

struct ServiceConfig {
  int port = 8080;
  std::size_t max_batch = api::kDefaultMaxBatch;
  int workers = 1;  // scoring threads per batch

  void validate() const {
    if (port < 1 || port > 65535) throw ConfigError("port must be in 1..65535");
    if (max_batch < 1) throw ConfigError("max_batch must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }

  /// Environment defaults; flags and config files override these.
  static ServiceConfig from_env() {
    ServiceConfig cfg;
    if (const auto port = env_var("CONAN_PORT")) {
      try {
        cfg.port = std::stoi(*port);
      } catch (const std::exception&) {
        throw ConfigError("CONAN_PORT is not a number: " + *port);
      }
    }
    if (const auto batch = env_var("CONAN_MAX_BATCH")) {
      try {
        cfg.max_batch = static_cast<std::size_t>(std::stoul(*batch));
      } catch (const std::exception&) {
        throw ConfigError("CONAN_MAX_BATCH is not a number: " + *batch);
      }
    }
    return cfg;
  }
};

class RewardService {
 public:
  explicit RewardService(ServiceConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    route();
  }

  /// Blocking listen on all interfaces at the configured port.
  bool listen() { return server_.listen("0.0.0.0", cfg_.port); }

  /// Binds 127.0.0.1 on an ephemeral port and returns it; callers then run
  /// listen_after_bind() on their own thread. Test + local use.
  int bind_local() {
    const int port = server_.bind_to_any_port("127.0.0.1");
    if (port <= 0) throw ConfigError("could not bind a local port");
    return port;
  }

  void listen_after_bind() { server_.listen_after_bind(); }

  void stop() { server_.stop(); }

  std::uint64_t requests_served() const { return requests_.load(); }

 private:
  static void reply(httplib::Response& res, int status,
                    const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  void json_post(const std::string& path, Fn handler) {
    server_.Post(path, [this, handler](const httplib::Request& req,
                                       httplib::Response& res) {
      requests_.fetch_add(1);
      nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        reply(res, 400,
              nlohmann::json{{"error",
                              {{"code", "bad_json"},
                               {"message", "request body is not valid JSON"}}}});
        return;
      }
      try {
        reply(res, 200, handler(body));
      } catch (const api::ApiError& e) {
        reply(res, e.status, e.body());
      } catch (const std::exception& e) {
        reply(res, 500,
              nlohmann::json{{"error", {{"code", "internal"},
                                        {"message", e.what()}}}});
      }
    });
  }

  void route() {
    start_ = std::chrono::steady_clock::now();
    json_post("/v1/score", [this](const nlohmann::json& body) {
      return api::handle_score(body, cfg_.max_batch, cfg_.workers);
    });
    json_post("/v1/advantages",
              [](const nlohmann::json& body) { return api::handle_advantages(body); });
    server_.Get("/v1/health", [this](const httplib::Request&,
                                     httplib::Response& res) {
      requests_.fetch_add(1);
      const double uptime =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start_)
              .count();
      reply(res, 200, api::handle_health(uptime));
    });
  }

  ServiceConfig cfg_;
  httplib::Server server_;
  std::chrono::steady_clock::time_point start_;
  std::atomic<std::uint64_t> requests_{0};
};

}  // namespace conan::service

// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// Wire schema and pure request handlers for the reward-verifier service.
// Kept free of any HTTP dependency so golden tests exercise exactly what the
// server serves. Numeric rewards are serialized with at most nine significant
// digits; responses preserve request order and length.

#pragma once

#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "conan/errors.hpp"
#include "conan/grpo.hpp"
#include "conan/labels.hpp"
#include "conan/rewards.hpp"
#include "conan/util.hpp"
#include "conan/version.hpp"

namespace conan::api {

using json = nlohmann::json;

/// Carries an HTTP status plus a machine-readable body.
struct ApiError : Error {
  ApiError(int http_status, std::string error_code, const std::string& message)
      : Error(message), status(http_status), code(std::move(error_code)) {}

  int status;
  std::string code;

  json body() const {
    return json{{"error", {{"code", code}, {"message", what()}}}};
  }
};

inline constexpr std::size_t kDefaultMaxBatch = 512;

namespace detail {

inline rewards::Truth truth_from_json(const json& j) {
  if (!j.is_object()) throw Error("truth must be an object");
  rewards::Truth truth;
  truth.answer = j.at("answer").get<std::string>();
  if (const auto it = j.find("gt_labels"); it != j.end()) {
    if (!it->is_array()) throw Error("gt_labels must be a list of objects");
    for (const auto& round : *it) {
      if (!round.is_object()) throw Error("gt_labels must be a list of objects");
      std::map<int, FrameLabel> labels;
      for (const auto& [key, value] : round.items()) {
        const auto label = parse_label(value.get<std::string>());
        if (!label) throw Error("unknown label \"" +
                                value.get<std::string>() + "\" in gt_labels");
        labels.emplace(std::stoi(key), *label);
      }
      truth.round_labels.push_back(std::move(labels));
    }
  }
  if (const auto it = j.find("retrieved_labels"); it != j.end()) {
    if (!it->is_array())
      throw Error("retrieved_labels must be a list of lists");
    for (const auto& action : *it) {
      if (!action.is_array())
        throw Error("retrieved_labels must be a list of lists");
      std::vector<FrameLabel> labels;
      for (const auto& value : action) {
        const auto label = parse_label(value.get<std::string>());
        if (!label)
          throw Error("unknown label \"" + value.get<std::string>() +
                      "\" in retrieved_labels");
        labels.push_back(*label);
      }
      truth.retrieved_labels.push_back(std::move(labels));
    }
  }
  return truth;
}

}  // namespace detail

/// Scores one {task_type, raw_output, truth} item. Problems with the item
/// come back as an {"error": {code, message}} object, never an exception;
/// the same rows appear in service batches and in the score subcommand's
/// output.
inline json score_item(const json& item) {
  try {
    if (!item.is_object()) throw Error("item must be an object");
    const auto task = parse_qa_type(item.at("task_type").get<std::string>());
    if (!task) throw Error("task_type must be multi_choice or free_form");
    const auto raw = item.at("raw_output").get<std::string>();
    auto truth = detail::truth_from_json(item.at("truth"));
    truth.task_type = *task;

    const auto scored = rewards::score_rollout(raw, truth);
    return json{{"task_type", std::string(qa_type_name(*task))},
                {"well_formed", scored.parsed.well_formed},
                {"violations", scored.parsed.violations},
                {"r_fmt", round_sig9(scored.breakdown.r_fmt)},
                {"r_outcome", round_sig9(scored.breakdown.r_outcome)},
                {"r_ide", round_sig9(scored.breakdown.r_ide)},
                {"r_ret", round_sig9(scored.breakdown.r_ret)},
                {"r_total", round_sig9(scored.breakdown.r_total)}};
  } catch (const ScoringError& e) {
    return json{{"error", {{"code", "scoring_error"}, {"message", e.what()}}}};
  } catch (const json::exception& e) {
    return json{{"error", {{"code", "bad_item"}, {"message", e.what()}}}};
  } catch (const Error& e) {
    return json{{"error", {{"code", "bad_item"}, {"message", e.what()}}}};
  }
}

/// POST /v1/score: body is a list of {task_type, raw_output, truth}. One bad
/// item yields an item-level error object, never a failed batch. Scoring is
/// pure, so fanning out across workers cannot change the output.
inline json handle_score(const json& request,
                         std::size_t max_batch = kDefaultMaxBatch,
                         int workers = 1) {
  if (!request.is_array())
    throw ApiError(400, "bad_request", "request body must be a list");
  if (request.size() > max_batch)
    throw ApiError(413, "batch_too_large",
                   "batch of " + std::to_string(request.size()) +
                       " exceeds the limit of " + std::to_string(max_batch));
  std::vector<json> results(request.size());
  const auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      results[i] = score_item(request[i]);
  };
  if (workers > 1 && request.size() >= 2) {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers),
                                         request.size());
    std::vector<std::thread> pool;
    const std::size_t chunk = (request.size() + n - 1) / n;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(begin + chunk, request.size());
      if (begin < end) pool.emplace_back(score_range, begin, end);
    }
    for (auto& t : pool) t.join();
  } else {
    score_range(0, request.size());
  }
  return json(results);
}

/// POST /v1/advantages: body is a list of reward groups; every group must be
/// non-empty and numeric.
inline json handle_advantages(const json& request) {
  if (!request.is_array())
    throw ApiError(400, "bad_request", "request body must be a list of groups");
  json out = json::array();
  for (std::size_t g = 0; g < request.size(); ++g) {
    const auto& group = request[g];
    if (!group.is_array() || group.empty())
      throw ApiError(400, "bad_request",
                     "group " + std::to_string(g) +
                         " must be a non-empty list of numbers");
    grpo::RewardGroup rewards;
    for (const auto& v : group) {
      if (!v.is_number())
        throw ApiError(400, "bad_request",
                       "group " + std::to_string(g) +
                           " must be a non-empty list of numbers");
      rewards.rewards.push_back(v.get<double>());
    }
    json advantages = json::array();
    try {
      for (const double a : grpo::group_advantages(rewards))
        advantages.push_back(round_sig9(a));
    } catch (const DomainError& e) {
      throw ApiError(400, "bad_request",
                     "group " + std::to_string(g) + ": " + e.what());
    }
    out.push_back(std::move(advantages));
  }
  return out;
}

/// GET /v1/health.
inline json handle_health(double uptime_seconds) {
  return json{{"status", "ok"},
              {"version", std::string(kVersion)},
              {"uptime_seconds", round_sig9(uptime_seconds)}};
}

}  // namespace conan::api

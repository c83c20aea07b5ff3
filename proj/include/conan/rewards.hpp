// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// The AIR reward suite: format reward, multi-choice and free-form (ROUGE)
// outcome rewards, identification and retrieval rewards, and the gated joint
// reward. All functions are pure and reentrant.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conan/errors.hpp"
#include "conan/labels.hpp"
#include "conan/trace_grammar.hpp"
#include "conan/util.hpp"

namespace conan::rewards {

/// Per-rollout scores. The joint total is gated: identification and retrieval
/// bonuses only count when the outcome reward is positive.
struct RewardBreakdown {
  double r_fmt = 0.0;      // {0, 0.5}
  double r_outcome = 0.0;  // [0, 1]
  double r_ide = 0.0;      // [0, 1]
  double r_ret = 0.0;      // [0, 1]
  double r_total = 0.0;    // [0, 3.5]
  QaType task_type = QaType::FreeForm;
};

inline double format_reward(const grammar::ParsedRollout& rollout) {
  return rollout.well_formed ? 0.5 : 0.0;
}

// ---------------------------------------------------------------------------
// Outcome rewards

/// Exact-match normalization: trim, reduce "C) ..."-shaped predictions to the
/// choice letter, strip trailing punctuation, uppercase.
inline std::string normalize_mc_answer(std::string_view raw) {
  std::string_view s = trim(raw);
  const auto is_alpha = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  };
  const auto is_sep = [](char c) {
    return c == ')' || c == '.' || c == ':' || c == ']';
  };
  if (s.size() >= 2 && is_alpha(s[0]) && is_sep(s[1]) &&
      (s.size() == 2 || s[2] == ' ' || s[2] == '\t')) {
    s = s.substr(0, 1);
  }
  while (!s.empty()) {
    const char c = s.back();
    if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':' ||
        c == ')') {
      s.remove_suffix(1);
    } else {
      break;
    }
  }
  s = trim(s);
  std::string out(s);
  for (char& c : out)
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  return out;
}

inline double mc_reward(std::string_view predicted, std::string_view truth) {
  const auto lhs = normalize_mc_answer(predicted);
  return !lhs.empty() && lhs == normalize_mc_answer(truth) ? 1.0 : 0.0;
}

/// Lowercased alphanumeric tokens; punctuation and all other bytes separate.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur += c;
    } else if (c >= 'A' && c <= 'Z') {
      cur += static_cast<char>(c - 'A' + 'a');
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace detail {

inline std::map<std::string, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::string, int> out;
  if (static_cast<int>(tokens.size()) < n) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size();
       ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      if (k > 0) key += '\x1f';
      key += tokens[i + static_cast<std::size_t>(k)];
    }
    ++out[key];
  }
  return out;
}

inline double f1(double overlap, double pred_total, double ref_total) {
  if (pred_total <= 0.0 || ref_total <= 0.0) return 0.0;
  const double precision = overlap / pred_total;
  const double recall = overlap / ref_total;
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace detail

/// ROUGE-N F1 over clipped n-gram multiset overlap. Two empty texts score 1,
/// exactly one empty scores 0; texts shorter than n have no n-gram signal and
/// score 0.
inline double rouge_n(std::string_view predicted, std::string_view reference,
                      int n) {
  if (n != 1 && n != 2) throw DomainError("rouge_n supports n = 1 or 2");
  const auto pred = tokenize(predicted);
  const auto ref = tokenize(reference);
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  const auto pred_counts = detail::ngram_counts(pred, n);
  const auto ref_counts = detail::ngram_counts(ref, n);
  double overlap = 0.0;
  for (const auto& [gram, count] : ref_counts) {
    const auto it = pred_counts.find(gram);
    if (it != pred_counts.end()) overlap += std::min(count, it->second);
  }
  double pred_total = 0.0;
  double ref_total = 0.0;
  for (const auto& [gram, count] : pred_counts) pred_total += count;
  for (const auto& [gram, count] : ref_counts) ref_total += count;
  return detail::f1(overlap, pred_total, ref_total);
}

/// ROUGE-L F1 from the longest common subsequence of token streams.
inline double rouge_l(std::string_view predicted, std::string_view reference) {
  const auto pred = tokenize(predicted);
  const auto ref = tokenize(reference);
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  // Two-row LCS.
  std::vector<int> prev(ref.size() + 1, 0);
  std::vector<int> cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= pred.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      cur[j] = pred[i - 1] == ref[j - 1] ? prev[j - 1] + 1
                                         : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[ref.size()];
  return detail::f1(lcs, static_cast<double>(pred.size()),
                    static_cast<double>(ref.size()));
}

/// Mean of ROUGE-1, ROUGE-2, and ROUGE-L.
inline double free_reward(std::string_view predicted,
                          std::string_view reference) {
  return (rouge_n(predicted, reference, 1) + rouge_n(predicted, reference, 2) +
          rouge_l(predicted, reference)) /
         3.0;
}

// ---------------------------------------------------------------------------
// Identification and retrieval rewards

/// Per-round accuracy of the predicted 3-way labels over all visible frames
/// (the truth's keys); omitted frames count as wrong. Mean over rounds.
/// Malformed rollouts score 0; a round-count mismatch is a caller error.
inline double identification_reward(
    const grammar::ParsedRollout& rollout,
    std::span<const std::map<int, FrameLabel>> gt_rounds) {
  if (!rollout.well_formed) return 0.0;
  if (rollout.rounds.size() != gt_rounds.size())
    throw ScoringError("round count mismatch: rollout has " +
                       std::to_string(rollout.rounds.size()) + ", truth has " +
                       std::to_string(gt_rounds.size()));
  if (gt_rounds.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < gt_rounds.size(); ++r) {
    const auto& truth = gt_rounds[r];
    if (truth.empty()) {
      sum += 1.0;  // vacuous round
      continue;
    }
    const auto& predicted = rollout.rounds[r].identification;
    std::size_t correct = 0;
    for (const auto& [idx, label] : truth) {
      const auto it = predicted.find(idx);
      if (it != predicted.end() && it->second == label) ++correct;
    }
    sum += static_cast<double>(correct) / static_cast<double>(truth.size());
  }
  return sum / static_cast<double>(gt_rounds.size());
}

/// Mean, over retrieval actions, of the share of retrieved frames labeled
/// Evidence or Contextual. The caller resolves each retrieval to concrete
/// frame labels; an action that resolved to nothing scores 0. A rollout with
/// no retrieval action scores 1: answering early is not penalized.
inline double retrieval_reward(
    const grammar::ParsedRollout& rollout,
    std::span<const std::vector<FrameLabel>> retrieved) {
  if (!rollout.well_formed) return 0.0;
  std::size_t retrievals = 0;
  for (const auto& round : rollout.rounds) {
    if (round.action &&
        round.action->type == grammar::ActionType::SpecificFrameRetrieval)
      ++retrievals;
  }
  if (retrieved.size() != retrievals)
    throw ScoringError("retrieval count mismatch: rollout has " +
                       std::to_string(retrievals) + ", truth has " +
                       std::to_string(retrieved.size()));
  if (retrievals == 0) return 1.0;
  double sum = 0.0;
  for (const auto& frames : retrieved) {
    if (frames.empty()) continue;  // ratio 0
    std::size_t relevant = 0;
    for (const auto label : frames)
      if (is_relevant(label)) ++relevant;
    sum += static_cast<double>(relevant) / static_cast<double>(frames.size());
  }
  return sum / static_cast<double>(retrievals);
}

// ---------------------------------------------------------------------------
// Joint reward

inline RewardBreakdown joint_reward(double r_fmt, double r_outcome,
                                    double r_ide, double r_ret,
                                    QaType task_type) {
  if (r_fmt != 0.0 && r_fmt != 0.5)
    throw DomainError("format reward must be 0 or 0.5");
  if (!(r_outcome >= 0.0 && r_outcome <= 1.0))
    throw DomainError("outcome reward must be in [0,1]");
  if (!(r_ide >= 0.0 && r_ide <= 1.0))
    throw DomainError("identification reward must be in [0,1]");
  if (!(r_ret >= 0.0 && r_ret <= 1.0))
    throw DomainError("retrieval reward must be in [0,1]");
  RewardBreakdown b;
  b.r_fmt = r_fmt;
  b.r_outcome = r_outcome;
  b.r_ide = r_ide;
  b.r_ret = r_ret;
  b.task_type = task_type;
  b.r_total = r_outcome > 0.0 ? r_fmt + r_outcome + r_ide + r_ret
                              : r_fmt + r_outcome;
  return b;
}

/// Ground truth needed to score one rollout.
struct Truth {
  QaType task_type = QaType::FreeForm;
  std::string answer;
  std::vector<std::map<int, FrameLabel>> round_labels;      // per round
  std::vector<std::vector<FrameLabel>> retrieved_labels;    // per retrieval
};

struct ScoredRollout {
  RewardBreakdown breakdown;
  grammar::ParsedRollout parsed;
};

/// Full scoring path: parse, then compose the joint reward. Malformed
/// rollouts keep any extractable answer for the outcome term but score zero
/// identification and retrieval.
inline ScoredRollout score_rollout(std::string_view raw_output,
                                   const Truth& truth) {
  auto parsed = grammar::parse(raw_output);
  const double r_fmt = format_reward(parsed);
  double r_outcome = 0.0;
  if (parsed.answer) {
    r_outcome = truth.task_type == QaType::MultiChoice
                    ? mc_reward(*parsed.answer, truth.answer)
                    : free_reward(*parsed.answer, truth.answer);
  }
  double r_ide = 0.0;
  double r_ret = 0.0;
  if (parsed.well_formed) {
    r_ide = identification_reward(parsed, truth.round_labels);
    r_ret = retrieval_reward(parsed, truth.retrieved_labels);
  }
  return ScoredRollout{
      joint_reward(r_fmt, r_outcome, r_ide, r_ret, truth.task_type),
      std::move(parsed)};
}

}  // namespace conan::rewards

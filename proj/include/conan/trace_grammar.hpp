// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// Canonical tagged grammar for rollouts. Each round is
//
//   <identification>IDX:LABEL[,IDX:LABEL...]</identification>
//   <reasoning>TEXT</reasoning>
//   <action>random_frame_sampling
//           | specific_frame_retrieval START-END[,START-END...]
//           | confident_question_answering</action>
//
// and a rollout ending in confident_question_answering closes with
// <answer>TEXT</answer>. Whitespace between blocks is ignored; payloads are
// trimmed; everything else is strict. The format reward is defined against
// this grammar, so it is stable across versions (see docs/trace_grammar.md).

#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conan/errors.hpp"
#include "conan/labels.hpp"
#include "conan/util.hpp"

namespace conan::grammar {

enum class ActionType {
  RandomFrameSampling,
  SpecificFrameRetrieval,
  ConfidentQuestionAnswering,
};

inline constexpr std::string_view action_name(ActionType t) {
  switch (t) {
    case ActionType::RandomFrameSampling:
      return "random_frame_sampling";
    case ActionType::SpecificFrameRetrieval:
      return "specific_frame_retrieval";
    case ActionType::ConfidentQuestionAnswering:
      return "confident_question_answering";
  }
  return "";
}

/// A clip in seconds, rendered as START-END with fixed-notation decimals.
struct ClipSpan {
  double start = 0.0;
  double end = 0.0;

  bool operator==(const ClipSpan&) const = default;
};

struct RolloutAction {
  ActionType type = ActionType::RandomFrameSampling;
  std::vector<ClipSpan> clips;  // SpecificFrameRetrieval only

  bool operator==(const RolloutAction&) const = default;
};

struct RolloutRound {
  std::map<int, FrameLabel> identification;
  std::string reasoning;
  RolloutAction action;

  bool operator==(const RolloutRound&) const = default;
};

struct ParsedRound {
  std::map<int, FrameLabel> identification;
  std::string reasoning;
  std::optional<RolloutAction> action;
};

/// Result of parse(). Malformedness is data: well_formed is false and
/// violations lists what went wrong, with a best-effort partial parse kept.
struct ParsedRollout {
  std::vector<ParsedRound> rounds;
  std::optional<std::string> answer;
  bool well_formed = false;
  std::vector<std::string> violations;

  int round_count() const { return static_cast<int>(rounds.size()); }
};

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string fmt_fixed(double v) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

inline bool payload_ok(std::string_view text) {
  return text.find('<') == std::string_view::npos &&
         trim(text).size() == text.size();
}

}  // namespace detail

inline std::string render_clips(const std::vector<ClipSpan>& clips) {
  std::string out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (i > 0) out += ',';
    out += detail::fmt_fixed(clips[i].start);
    out += '-';
    out += detail::fmt_fixed(clips[i].end);
  }
  return out;
}

inline std::string render_action(const RolloutAction& a) {
  std::string out(action_name(a.type));
  if (a.type == ActionType::SpecificFrameRetrieval) {
    if (a.clips.empty())
      throw DomainError("specific_frame_retrieval requires clips");
    for (const auto& c : a.clips) {
      if (!(c.start >= 0.0 && c.end >= c.start))
        throw DomainError("clip must satisfy 0 <= start <= end");
    }
    out += ' ';
    out += render_clips(a.clips);
  } else if (!a.clips.empty()) {
    throw DomainError("clips are only valid on specific_frame_retrieval");
  }
  return out;
}

inline std::string render_round(const RolloutRound& r) {
  if (!detail::payload_ok(r.reasoning))
    throw DomainError("reasoning must be trimmed and free of '<'");
  std::string out = "<identification>";
  bool first = true;
  for (const auto& [idx, label] : r.identification) {
    if (idx < 0) throw DomainError("negative frame index");
    if (!first) out += ',';
    first = false;
    out += std::to_string(idx);
    out += ':';
    out += label_name(label);
  }
  out += "</identification>\n<reasoning>";
  out += r.reasoning;
  out += "</reasoning>\n<action>";
  out += render_action(r.action);
  out += "</action>";
  return out;
}

/// Renders a complete rollout. The answer must be present exactly when the
/// final action is confident_question_answering, and no earlier round may
/// answer.
inline std::string render(const std::vector<RolloutRound>& rounds,
                          const std::optional<std::string>& answer) {
  if (rounds.empty()) throw DomainError("rollout needs at least one round");
  for (std::size_t i = 0; i + 1 < rounds.size(); ++i) {
    if (rounds[i].action.type == ActionType::ConfidentQuestionAnswering)
      throw DomainError("confident_question_answering before the final round");
  }
  const bool terminal = rounds.back().action.type ==
                        ActionType::ConfidentQuestionAnswering;
  if (terminal != answer.has_value())
    throw DomainError("answer present iff the final action answers");
  std::string out;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (i > 0) out += '\n';
    out += render_round(rounds[i]);
  }
  if (answer) {
    if (!detail::payload_ok(*answer))
      throw DomainError("answer must be trimmed and free of '<'");
    out += "\n<answer>";
    out += *answer;
    out += "</answer>";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Block {
  std::string_view name;
  std::string_view payload;
};

/// Linear tag scanner; always advances, never throws.
inline std::vector<Block> scan_blocks(std::string_view text,
                                      std::vector<std::string>& violations) {
  std::vector<Block> blocks;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('<', pos);
    if (open == std::string_view::npos) {
      if (!trim(text.substr(pos)).empty())
        violations.push_back("stray text outside tags");
      break;
    }
    if (!trim(text.substr(pos, open - pos)).empty())
      violations.push_back("stray text outside tags");
    const auto close = text.find('>', open + 1);
    if (close == std::string_view::npos) {
      violations.push_back("malformed tag");
      break;
    }
    const auto name = text.substr(open + 1, close - open - 1);
    bool name_ok = !name.empty();
    for (const char c : name)
      name_ok = name_ok && ((c >= 'a' && c <= 'z') || c == '_');
    if (!name_ok) {
      violations.push_back("malformed tag");
      pos = close + 1;
      continue;
    }
    const std::string closer = "</" + std::string(name) + ">";
    const auto end = text.find(closer, close + 1);
    if (end == std::string_view::npos) {
      violations.push_back("unclosed tag <" + std::string(name) + ">");
      blocks.push_back(Block{name, trim(text.substr(close + 1))});
      break;
    }
    blocks.push_back(Block{name, trim(text.substr(close + 1, end - close - 1))});
    pos = end + closer.size();
  }
  return blocks;
}

inline std::map<int, FrameLabel> parse_identification(
    std::string_view payload, int round_no,
    std::vector<std::string>& violations) {
  std::map<int, FrameLabel> out;
  if (payload.empty()) return out;
  const std::string at = " in round " + std::to_string(round_no);
  for (const auto raw : split(payload, ',')) {
    const auto item = trim(raw);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos || colon == 0) {
      violations.push_back("bad identification entry \"" + std::string(item) +
                           "\"" + at);
      continue;
    }
    const auto idx_text = item.substr(0, colon);
    int idx = 0;
    const auto [ptr, ec] =
        std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
    if (ec != std::errc{} || ptr != idx_text.data() + idx_text.size() ||
        idx < 0) {
      violations.push_back("frame index out of range \"" +
                           std::string(idx_text) + "\"" + at);
      continue;
    }
    const auto label = parse_label(item.substr(colon + 1));
    if (!label) {
      violations.push_back("unknown label \"" +
                           std::string(item.substr(colon + 1)) + "\"" + at);
      continue;
    }
    if (out.count(idx) != 0) {
      violations.push_back("duplicate frame index " + std::to_string(idx) + at);
      continue;
    }
    out.emplace(idx, *label);
  }
  return out;
}

inline bool parse_fixed_double(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out,
                                         std::chars_format::fixed);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::optional<RolloutAction> parse_action(
    std::string_view payload, int round_no,
    std::vector<std::string>& violations) {
  const std::string at = " in round " + std::to_string(round_no);
  const auto space = payload.find_first_of(" \t\n");
  const auto name = payload.substr(0, space);
  const auto args =
      space == std::string_view::npos ? std::string_view{} : trim(payload.substr(space));

  if (name == action_name(ActionType::RandomFrameSampling) ||
      name == action_name(ActionType::ConfidentQuestionAnswering)) {
    RolloutAction a;
    a.type = name == action_name(ActionType::RandomFrameSampling)
                 ? ActionType::RandomFrameSampling
                 : ActionType::ConfidentQuestionAnswering;
    if (!args.empty())
      violations.push_back(std::string(name) + " takes no arguments" + at);
    return a;
  }
  if (name == action_name(ActionType::SpecificFrameRetrieval)) {
    RolloutAction a;
    a.type = ActionType::SpecificFrameRetrieval;
    if (args.empty()) {
      violations.push_back("specific_frame_retrieval requires clips" + at);
      return a;
    }
    for (const auto raw : split(args, ',')) {
      const auto clip = trim(raw);
      const auto dash = clip.find('-');
      double start = 0.0;
      double end = 0.0;
      if (dash == std::string_view::npos || dash == 0 ||
          !parse_fixed_double(clip.substr(0, dash), start) ||
          !parse_fixed_double(clip.substr(dash + 1), end)) {
        violations.push_back("bad clip \"" + std::string(clip) + "\"" + at);
        continue;
      }
      if (end < start) {
        violations.push_back("clip start exceeds end" + at);
        continue;
      }
      a.clips.push_back(ClipSpan{start, end});
    }
    return a;
  }
  violations.push_back("unknown action \"" + std::string(name) + "\"" + at);
  return std::nullopt;
}

}  // namespace detail

/// Parses arbitrary text against the grammar. Never throws; malformed input
/// yields well_formed == false plus violations.
inline ParsedRollout parse(std::string_view text) {
  ParsedRollout out;
  const auto blocks = detail::scan_blocks(text, out.violations);

  ParsedRound cur;
  bool in_round = false;
  bool have_reasoning = false;
  bool have_action = false;
  bool answer_seen = false;

  const auto flush = [&]() {
    if (!in_round) return;
    const std::string at = " in round " + std::to_string(out.round_count() + 1);
    if (!have_reasoning) out.violations.push_back("missing reasoning" + at);
    if (!have_action) out.violations.push_back("missing action" + at);
    out.rounds.push_back(std::move(cur));
    cur = ParsedRound{};
    in_round = false;
    have_reasoning = false;
    have_action = false;
  };

  for (const auto& block : blocks) {
    const int round_no = out.round_count() + 1;
    const std::string at = " in round " + std::to_string(round_no);
    if (answer_seen) {
      out.violations.push_back("content after answer");
      break;
    }
    if (block.name == "identification") {
      flush();
      in_round = true;
      cur.identification = detail::parse_identification(
          block.payload, out.round_count() + 1, out.violations);
    } else if (block.name == "reasoning") {
      if (!in_round) {
        out.violations.push_back("reasoning before identification" + at);
        in_round = true;
      }
      if (have_reasoning) {
        out.violations.push_back("multiple reasoning blocks" + at);
      } else {
        cur.reasoning = std::string(block.payload);
        have_reasoning = true;
      }
    } else if (block.name == "action") {
      if (!in_round) {
        out.violations.push_back("action before identification" + at);
        in_round = true;
      }
      if (have_action) {
        out.violations.push_back("multiple actions" + at);
      } else {
        cur.action =
            detail::parse_action(block.payload, round_no, out.violations);
        have_action = true;
      }
    } else if (block.name == "answer") {
      const bool terminal =
          in_round && have_action && cur.action &&
          cur.action->type == ActionType::ConfidentQuestionAnswering;
      if (!terminal)
        out.violations.push_back(
            "answer without confident_question_answering");
      out.answer = std::string(block.payload);
      answer_seen = true;
    } else {
      out.violations.push_back("unknown tag <" + std::string(block.name) +
                               ">");
    }
  }
  flush();

  if (out.rounds.empty()) out.violations.push_back("no rounds");
  for (std::size_t i = 0; i + 1 < out.rounds.size(); ++i) {
    if (out.rounds[i].action &&
        out.rounds[i].action->type == ActionType::ConfidentQuestionAnswering)
      out.violations.push_back(
          "confident_question_answering before the final round");
  }
  if (!out.rounds.empty() && !answer_seen) {
    const auto& last = out.rounds.back().action;
    if (last && last->type == ActionType::ConfidentQuestionAnswering)
      out.violations.push_back("missing answer");
  }

  out.well_formed = out.violations.empty();
  return out;
}

/// Converts a fully parsed rollout back to renderable rounds; empty when any
/// round lacks an action.
inline std::optional<std::vector<RolloutRound>> to_rounds(
    const ParsedRollout& rollout) {
  std::vector<RolloutRound> out;
  for (const auto& r : rollout.rounds) {
    if (!r.action) return std::nullopt;
    out.push_back(RolloutRound{r.identification, r.reasoning, *r.action});
  }
  return out;
}

}  // namespace conan::grammar

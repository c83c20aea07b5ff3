// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "conan/rng.hpp"
#include "conan/trace_grammar.hpp"

using namespace conan;
using namespace conan::grammar;

namespace {

RolloutRound simple_round(ActionType type) {
  RolloutRound r;
  r.identification = {{0, FrameLabel::Evidence}, {3, FrameLabel::Irrelevant}};
  r.reasoning = "frame 0 shows the event";
  r.action.type = type;
  if (type == ActionType::SpecificFrameRetrieval)
    r.action.clips = {ClipSpan{10.5, 20.25}};
  return r;
}

/// Random renderable round data; reasoning avoids '<' and edge whitespace.
std::vector<RolloutRound> random_rounds(Rng& rng, bool& terminal) {
  static const char* kWords[] = {"the",  "clip",  "shows", "a",
                                 "red",  "door",  "then",  "nothing",
                                 "else", "moves", "fast",  "slowly"};
  const int n_rounds = 1 + static_cast<int>(rng.below(3));
  terminal = rng.bernoulli(0.5);
  std::vector<RolloutRound> rounds;
  for (int r = 0; r < n_rounds; ++r) {
    RolloutRound round;
    const int n_ids = static_cast<int>(rng.below(6));
    for (int i = 0; i < n_ids; ++i) {
      static constexpr FrameLabel kLabels[] = {FrameLabel::Irrelevant,
                                               FrameLabel::Contextual,
                                               FrameLabel::Evidence};
      round.identification[static_cast<int>(rng.below(64))] =
          kLabels[rng.below(3)];
    }
    std::string text;
    const int n_words = 1 + static_cast<int>(rng.below(8));
    for (int w = 0; w < n_words; ++w) {
      if (w > 0) text += ' ';
      text += kWords[rng.below(12)];
    }
    round.reasoning = text;

    const bool last = r == n_rounds - 1;
    if (last && terminal) {
      round.action.type = ActionType::ConfidentQuestionAnswering;
    } else if (rng.bernoulli(0.5)) {
      round.action.type = ActionType::RandomFrameSampling;
    } else {
      round.action.type = ActionType::SpecificFrameRetrieval;
      const int n_clips = 1 + static_cast<int>(rng.below(3));
      for (int c = 0; c < n_clips; ++c) {
        const double start = rng.uniform(0.0, 120.0);
        round.action.clips.push_back(
            ClipSpan{start, start + rng.uniform(0.0, 30.0)});
      }
    }
    rounds.push_back(std::move(round));
  }
  return rounds;
}

}  // namespace

TEST_CASE("render emits the canonical tags") {
  const auto text = render({simple_round(ActionType::RandomFrameSampling)},
                           std::nullopt);
  CHECK(text.find("<action>random_frame_sampling</action>") !=
        std::string::npos);
  CHECK(text.find("<identification>0:evidence,3:irrelevant</identification>") !=
        std::string::npos);

  const auto terminal =
      render({simple_round(ActionType::ConfidentQuestionAnswering)},
             std::string("C"));
  CHECK(terminal.substr(terminal.size() - 18) == "<answer>C</answer>");

  RolloutRound one;
  one.identification = {{3, FrameLabel::Evidence}};
  one.reasoning = "x";
  one.action.type = ActionType::RandomFrameSampling;
  CHECK(render_round(one).find("<identification>3:evidence</identification>") !=
        std::string::npos);
}

TEST_CASE("render rejects inconsistent round data") {
  CHECK_THROWS_AS(render({}, std::nullopt), DomainError);
  // Answer without an answering action, and vice versa.
  CHECK_THROWS_AS(render({simple_round(ActionType::RandomFrameSampling)},
                         std::string("C")),
                  DomainError);
  CHECK_THROWS_AS(
      render({simple_round(ActionType::ConfidentQuestionAnswering)},
             std::nullopt),
      DomainError);
  // Answering before the final round.
  CHECK_THROWS_AS(render({simple_round(ActionType::ConfidentQuestionAnswering),
                          simple_round(ActionType::RandomFrameSampling)},
                         std::nullopt),
                  DomainError);
  // Retrieval without clips.
  RolloutRound r = simple_round(ActionType::SpecificFrameRetrieval);
  r.action.clips.clear();
  CHECK_THROWS_AS(render({r}, std::nullopt), DomainError);
  // Reasoning with a tag-opening character.
  r = simple_round(ActionType::RandomFrameSampling);
  r.reasoning = "a < b";
  CHECK_THROWS_AS(render({r}, std::nullopt), DomainError);
}

TEST_CASE("canonical text parses as well-formed") {
  const std::string text =
      "<identification>0:evidence,1:contextual</identification>\n"
      "<reasoning>the first frame answers it</reasoning>\n"
      "<action>confident_question_answering</action>\n"
      "<answer>B</answer>";
  const auto parsed = parse(text);
  CHECK(parsed.well_formed);
  CHECK(parsed.violations.empty());
  REQUIRE(parsed.rounds.size() == 1);
  CHECK(parsed.rounds[0].identification.at(0) == FrameLabel::Evidence);
  CHECK(parsed.rounds[0].identification.at(1) == FrameLabel::Contextual);
  CHECK(parsed.answer == "B");
}

TEST_CASE("inter-block whitespace is tolerated") {
  const std::string text =
      "  <identification>2:evidence</identification>  \n\n"
      "\t<reasoning>ok</reasoning>\r\n"
      "<action>random_frame_sampling</action>\n  ";
  const auto parsed = parse(text);
  CHECK(parsed.well_formed);
}

TEST_CASE("two actions in one round are malformed") {
  const std::string text =
      "<identification>0:evidence</identification>\n"
      "<reasoning>hmm</reasoning>\n"
      "<action>random_frame_sampling</action>\n"
      "<action>confident_question_answering</action>\n"
      "<answer>A</answer>";
  const auto parsed = parse(text);
  CHECK(!parsed.well_formed);
  bool found = false;
  for (const auto& v : parsed.violations)
    found = found || v.find("multiple actions") != std::string::npos;
  CHECK(found);
}

TEST_CASE("empty and junk inputs are malformed but never throw") {
  CHECK(!parse("").well_formed);
  CHECK(!parse("    \n\t ").well_formed);
  CHECK(!parse("just some prose about a video").well_formed);
  CHECK(!parse("<answer>42</answer>").well_formed);
  CHECK(!parse("<identification>").well_formed);
  CHECK(!parse("<identification>0:evidence</identification>").well_formed);
}

TEST_CASE("violations are specific") {
  auto parsed = parse("<identification>0:evidence</identification>"
                      "<reasoning>r</reasoning>"
                      "<action>jump_cut</action>");
  CHECK(!parsed.well_formed);
  bool unknown_action = false;
  for (const auto& v : parsed.violations)
    unknown_action = unknown_action || v.find("unknown action") != std::string::npos;
  CHECK(unknown_action);

  parsed = parse("<identification>0:evidence</identification>"
                 "<reasoning>r</reasoning>"
                 "<action>specific_frame_retrieval</action>");
  bool requires_clips = false;
  for (const auto& v : parsed.violations)
    requires_clips =
        requires_clips || v.find("requires clips") != std::string::npos;
  CHECK(requires_clips);

  parsed = parse("<identification>99999999999:evidence</identification>"
                 "<reasoning>r</reasoning>"
                 "<action>random_frame_sampling</action>");
  bool out_of_range = false;
  for (const auto& v : parsed.violations)
    out_of_range =
        out_of_range || v.find("frame index out of range") != std::string::npos;
  CHECK(out_of_range);

  parsed = parse("<identification>0:evidence,0:contextual</identification>"
                 "<reasoning>r</reasoning>"
                 "<action>random_frame_sampling</action>");
  bool duplicate = false;
  for (const auto& v : parsed.violations)
    duplicate = duplicate || v.find("duplicate frame index") != std::string::npos;
  CHECK(duplicate);

  parsed = parse("<identification>0:evidence</identification>"
                 "<reasoning>r</reasoning>"
                 "<action>specific_frame_retrieval 30.0-10.0</action>");
  bool bad_clip = false;
  for (const auto& v : parsed.violations)
    bad_clip = bad_clip || v.find("clip start exceeds end") != std::string::npos;
  CHECK(bad_clip);

  parsed = parse("<identification>0:evidence</identification>"
                 "<reasoning>unclosed");
  bool unclosed = false;
  for (const auto& v : parsed.violations)
    unclosed = unclosed || v.find("unclosed tag") != std::string::npos;
  CHECK(unclosed);
}

TEST_CASE("answer is only valid after an answering action") {
  const std::string text =
      "<identification>0:evidence</identification>\n"
      "<reasoning>r</reasoning>\n"
      "<action>random_frame_sampling</action>\n"
      "<answer>A</answer>";
  const auto parsed = parse(text);
  CHECK(!parsed.well_formed);
}

TEST_CASE("an answering action requires an answer") {
  const std::string text =
      "<identification>0:evidence</identification>\n"
      "<reasoning>r</reasoning>\n"
      "<action>confident_question_answering</action>";
  const auto parsed = parse(text);
  CHECK(!parsed.well_formed);
  bool missing = false;
  for (const auto& v : parsed.violations)
    missing = missing || v.find("missing answer") != std::string::npos;
  CHECK(missing);
}

TEST_CASE("round-trip: parse(render(x)) == x") {
  Rng rng(31337);
  for (int trial = 0; trial < 3000; ++trial) {
    bool terminal = false;
    const auto rounds = random_rounds(rng, terminal);
    const auto answer =
        terminal ? std::optional<std::string>("the red door opens")
                 : std::nullopt;
    const auto text = render(rounds, answer);
    const auto parsed = parse(text);
    REQUIRE(parsed.well_formed);
    CHECK(parsed.answer == answer);
    const auto back = to_rounds(parsed);
    REQUIRE(back.has_value());
    CHECK(*back == rounds);
  }
}

TEST_CASE("every duplicate-action mutation flips well_formed") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    bool terminal = false;
    const auto rounds = random_rounds(rng, terminal);
    const auto answer =
        terminal ? std::optional<std::string>("yes") : std::nullopt;
    auto text = render(rounds, answer);
    REQUIRE(parse(text).well_formed);
    const auto pos = text.find("</action>");
    REQUIRE(pos != std::string::npos);
    text.insert(pos + 9, "<action>random_frame_sampling</action>");
    CHECK(!parse(text).well_formed);
  }
}

TEST_CASE("reasoning with internal newlines round-trips") {
  RolloutRound r;
  r.identification = {{1, FrameLabel::Contextual}};
  r.reasoning = "first observation\nsecond observation\n\tindented note";
  r.action.type = ActionType::RandomFrameSampling;
  const auto parsed = parse(render({r}, std::nullopt));
  REQUIRE(parsed.well_formed);
  CHECK(parsed.rounds[0].reasoning == r.reasoning);
}

TEST_CASE("parser survives a one-megabyte input") {
  Rng rng(1048576);
  std::string bytes(1 << 20, '\0');
  for (auto& c : bytes) c = static_cast<char>(rng.below(256));
  CHECK(!parse(bytes).well_formed);
  // And a megabyte of tag-heavy text.
  std::string tags;
  while (tags.size() < (1 << 20))
    tags += "<identification>0:evidence</identification>";
  parse(tags);  // must terminate without throwing
}

TEST_CASE("parser survives random bytes") {
  Rng rng(0xf0220u);
  for (int trial = 0; trial < 3000; ++trial) {
    const auto len = static_cast<std::size_t>(rng.below(2048));
    std::string bytes(len, '\0');
    for (auto& c : bytes) c = static_cast<char>(rng.below(256));
    const auto parsed = parse(bytes);  // must not throw or hang
    CHECK((parsed.well_formed || !parsed.violations.empty()));
  }
}

TEST_CASE("parser survives tag-soup mutations of valid text") {
  Rng rng(4242);
  static const char* kFragments[] = {"<action>",  "</action>",
                                     "<answer>",  "</answer>",
                                     "<reasoning>", "</identification>",
                                     ":evidence", "0:", ",", "<", ">"};
  for (int trial = 0; trial < 1000; ++trial) {
    bool terminal = false;
    const auto rounds = random_rounds(rng, terminal);
    auto text = render(rounds, terminal ? std::optional<std::string>("a")
                                        : std::nullopt);
    const int n_edits = 1 + static_cast<int>(rng.below(4));
    for (int e = 0; e < n_edits; ++e) {
      const auto at = static_cast<std::size_t>(rng.below(text.size() + 1));
      text.insert(at, kFragments[rng.below(11)]);
    }
    parse(text);  // must not throw
  }
}

// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "conan/corpus.hpp"
#include "conan/rng.hpp"

using namespace conan;
using namespace conan::corpus;

namespace {

std::string valid_line(const std::string& id) {
  return R"({"sample_id":")" + id + R"(","question":"what happens?",)" +
         R"("qa_type":"free_form","answer":"a thing happens",)" +
         R"("frames":[{"timestamp":0.0,"description":"a","relevance_score":0.9},)" +
         R"({"timestamp":2.0,"description":"b","relevance_score":0.1}]})";
}

}  // namespace

TEST_CASE("categorize_frame follows the threshold bands") {
  const LabelThresholds thr{0.7, 0.3};
  CHECK(categorize_frame(0.9, thr) == FrameLabel::Evidence);
  CHECK(categorize_frame(0.0, thr) == FrameLabel::Irrelevant);
  CHECK(categorize_frame(0.3, thr) == FrameLabel::Contextual);  // inclusive
  CHECK(categorize_frame(0.7, thr) == FrameLabel::Evidence);    // inclusive
  CHECK(categorize_frame(1.0, thr) == FrameLabel::Evidence);
  CHECK(categorize_frame(0.29999, thr) == FrameLabel::Irrelevant);
}

TEST_CASE("categorize_frame rejects scores outside [0,1]") {
  CHECK_THROWS_AS(categorize_frame(-0.01), DomainError);
  CHECK_THROWS_AS(categorize_frame(1.01), DomainError);
  CHECK_THROWS_AS(categorize_frame(std::nan("")), DomainError);
}

TEST_CASE("bad thresholds are config errors") {
  CHECK_THROWS_AS(categorize_frame(0.5, LabelThresholds{0.3, 0.7}),
                  ConfigError);
  CHECK_THROWS_AS(categorize_frame(0.5, LabelThresholds{0.0, 0.0}),
                  ConfigError);
}

TEST_CASE("label order is monotone in the score") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double a = rng.uniform01();
    const double b = rng.uniform01();
    const auto la = static_cast<int>(categorize_frame(std::max(a, b)));
    const auto lb = static_cast<int>(categorize_frame(std::min(a, b)));
    CHECK(la >= lb);
  }
}

TEST_CASE("ingest returns every valid line") {
  std::istringstream in(valid_line("s1") + "\n" + valid_line("s2") + "\n");
  const auto samples = ingest(in);
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].sample_id == "s1");
  CHECK(samples[1].sample_id == "s2");
  CHECK(samples[0].frames.size() == 2);
  CHECK(samples[0].frames[0].label == FrameLabel::Evidence);
  CHECK(samples[0].frames[1].label == FrameLabel::Irrelevant);
  CHECK(samples[0].frames[0].index == 0);
  CHECK(samples[0].frames[1].index == 1);
}

TEST_CASE("ingest of an empty stream is an empty corpus") {
  std::istringstream in("");
  CHECK(ingest(in).empty());
}

TEST_CASE("ingest rejects the file at the first malformed line") {
  std::istringstream in(valid_line("s1") + "\nnot json\n" + valid_line("s3") +
                        "\n");
  CHECK_THROWS_WITH_AS(ingest(in), "line 2: invalid record syntax",
                       IngestError);
}

TEST_CASE("ingest rejects a multi-choice answer that is not an option") {
  const std::string line =
      R"({"sample_id":"s1","question":"q","qa_type":"multi_choice",)"
      R"("answer":"E","options":[{"label":"A","text":"a"},{"label":"B","text":"b"},)"
      R"({"label":"C","text":"c"},{"label":"D","text":"d"}],)"
      R"("frames":[{"timestamp":0.0,"description":"x","relevance_score":0.5}]})";
  std::istringstream in(line);
  try {
    ingest(in);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.line == 1);
    CHECK(std::string(e.what()).find("not an option") != std::string::npos);
  }
}

TEST_CASE("ingest rejects non-monotonic timestamps") {
  const std::string line =
      R"({"sample_id":"s1","question":"q","qa_type":"free_form","answer":"a",)"
      R"("frames":[{"timestamp":2.0,"description":"x","relevance_score":0.5},)"
      R"({"timestamp":2.0,"description":"y","relevance_score":0.5}]})";
  std::istringstream in(line);
  try {
    ingest(in);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(std::string(e.what()).find("strictly increasing") !=
          std::string::npos);
  }
}

TEST_CASE("ingest normalizes scores by score_scale") {
  const std::string line =
      R"({"sample_id":"s1","question":"q","qa_type":"free_form","answer":"a",)"
      R"("frames":[{"timestamp":0.0,"description":"x","relevance_score":4.0}]})";
  std::istringstream in(line);
  IngestOptions opts;
  opts.score_scale = 5.0;
  const auto samples = ingest(in, opts);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].frames[0].relevance_score == doctest::Approx(0.8));
  CHECK(samples[0].frames[0].label == FrameLabel::Evidence);

  std::istringstream again(line);
  CHECK_THROWS_AS(ingest(again), IngestError);  // unscaled 4.0 is out of range
}

TEST_CASE("serialize then ingest is the identity") {
  SyntheticSpec spec;
  spec.n_samples = 20;
  spec.n_frames = 12;
  spec.seed = 99;
  const auto samples = gen_synthetic(spec);
  std::ostringstream out;
  write_jsonl(out, samples);
  std::istringstream in(out.str());
  const auto again = ingest(in);
  CHECK(again == samples);
}

TEST_CASE("gen_synthetic is deterministic per seed") {
  SyntheticSpec spec;
  spec.n_samples = 10;
  spec.n_frames = 8;
  spec.seed = 42;
  const auto a = gen_synthetic(spec);
  const auto b = gen_synthetic(spec);
  CHECK(a == b);
  std::ostringstream da;
  std::ostringstream db;
  write_jsonl(da, a);
  write_jsonl(db, b);
  CHECK(da.str() == db.str());

  spec.seed = 43;
  CHECK(gen_synthetic(spec) != a);
}

TEST_CASE("gen_synthetic with a pinned ratio of one is all evidence") {
  SyntheticSpec spec;
  spec.n_samples = 5;
  spec.n_frames = 16;
  spec.evidence_ratio_min = 1.0;
  spec.evidence_ratio_max = 1.0;
  spec.seed = 1;
  for (const auto& sample : gen_synthetic(spec))
    for (const auto& frame : sample.frames)
      CHECK(frame.label == FrameLabel::Evidence);
}

TEST_CASE("gen_synthetic edge cases") {
  SyntheticSpec spec;
  spec.n_samples = 0;
  CHECK(gen_synthetic(spec).empty());

  spec.n_samples = 1;
  spec.evidence_ratio_min = 0.8;
  spec.evidence_ratio_max = 0.2;
  CHECK_THROWS_AS(gen_synthetic(spec), DomainError);

  spec.evidence_ratio_min = -0.1;
  spec.evidence_ratio_max = 0.5;
  CHECK_THROWS_AS(gen_synthetic(spec), DomainError);

  spec.evidence_ratio_min = 0.2;
  spec.n_frames = 0;
  CHECK_THROWS_AS(gen_synthetic(spec), DomainError);
}

TEST_CASE("gen_synthetic keeps corpus invariants") {
  SyntheticSpec spec;
  spec.n_samples = 30;
  spec.n_frames = 10;
  spec.seed = 5;
  for (const auto& sample : gen_synthetic(spec)) {
    REQUIRE(!sample.frames.empty());
    double prev = -1.0;
    for (const auto& f : sample.frames) {
      CHECK(f.timestamp > prev);
      prev = f.timestamp;
      CHECK(f.relevance_score >= 0.0);
      CHECK(f.relevance_score <= 1.0);
      CHECK(categorize_frame(f.relevance_score) == f.label);
    }
    if (sample.qa_type == QaType::MultiChoice) {
      REQUIRE(sample.options.size() == 4);
      bool found = false;
      for (const auto& o : sample.options) found = found || o.label == sample.answer;
      CHECK(found);
    }
  }
}

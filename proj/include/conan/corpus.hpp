// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame-annotated video QA records: ingestion from line-delimited records,
// relevance-score categorization, and synthetic corpus generation.

#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "conan/errors.hpp"
#include "conan/labels.hpp"
#include "conan/rng.hpp"
#include "conan/util.hpp"

namespace conan::corpus {

using json = nlohmann::json;

/// Score bands for the three-way frame categorization. Lower bounds are
/// inclusive so the partition is total: score == t_contextual is Contextual.
struct LabelThresholds {
  double t_evidence = 0.7;
  double t_contextual = 0.3;

  void validate() const {
    if (!(t_evidence > 0.0 && t_evidence <= 1.0))
      throw ConfigError("t_evidence must be in (0,1]");
    if (!(t_contextual >= 0.0 && t_contextual < 1.0))
      throw ConfigError("t_contextual must be in [0,1)");
    if (!(t_evidence > t_contextual))
      throw ConfigError("t_evidence must exceed t_contextual");
  }
};

struct FrameRecord {
  int index = 0;
  double timestamp = 0.0;
  std::string description;
  double relevance_score = 0.0;
  FrameLabel label = FrameLabel::Irrelevant;

  bool operator==(const FrameRecord&) const = default;
};

struct ChoiceOption {
  std::string label;
  std::string text;

  bool operator==(const ChoiceOption&) const = default;
};

struct CorpusSample {
  std::string sample_id;
  std::vector<FrameRecord> frames;
  std::string question;
  QaType qa_type = QaType::FreeForm;
  std::vector<ChoiceOption> options;  // MultiChoice only
  std::string answer;                 // the choice letter for MultiChoice

  bool operator==(const CorpusSample&) const = default;

  int frame_count() const { return static_cast<int>(frames.size()); }

  double duration() const {
    return frames.empty() ? 0.0 : frames.back().timestamp;
  }
};

inline FrameLabel categorize_frame(double score,
                                   const LabelThresholds& thresholds = {}) {
  thresholds.validate();
  if (!(score >= 0.0 && score <= 1.0))
    throw DomainError("relevance score must be in [0,1]");
  if (score >= thresholds.t_evidence) return FrameLabel::Evidence;
  if (score >= thresholds.t_contextual) return FrameLabel::Contextual;
  return FrameLabel::Irrelevant;
}

struct IngestOptions {
  LabelThresholds thresholds{};
  // Divisor applied to incoming relevance scores; source datasets that score
  // on e.g. a 0-5 scale pass 5 here.
  double score_scale = 1.0;
};

namespace detail {

inline const json& require_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(std::string("missing field \"") + key + "\"");
  return *it;
}

inline std::string require_string(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_string())
    throw Error(std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

inline double require_number(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_number())
    throw Error(std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

}  // namespace detail

/// Builds one sample from a wire record, normalizing and categorizing every
/// frame. Throws conan::Error with a message but no line context; ingest()
/// adds the line number.
inline CorpusSample sample_from_wire(const json& j,
                                     const IngestOptions& opts = {}) {
  opts.thresholds.validate();
  if (!(opts.score_scale > 0.0))
    throw ConfigError("score_scale must be positive");
  if (!j.is_object()) throw Error("record must be an object");

  CorpusSample s;
  s.sample_id = detail::require_string(j, "sample_id");
  s.question = detail::require_string(j, "question");
  const auto qa = parse_qa_type(detail::require_string(j, "qa_type"));
  if (!qa) throw Error("qa_type must be \"multi_choice\" or \"free_form\"");
  s.qa_type = *qa;
  s.answer = detail::require_string(j, "answer");

  if (const auto it = j.find("options"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error("field \"options\" must be a list");
    for (const auto& o : *it) {
      s.options.push_back(ChoiceOption{detail::require_string(o, "label"),
                                       detail::require_string(o, "text")});
    }
  }
  if (s.qa_type == QaType::MultiChoice) {
    if (s.options.empty()) throw Error("multi_choice record without options");
    bool found = false;
    for (const auto& o : s.options) found = found || o.label == s.answer;
    if (!found)
      throw Error("answer \"" + s.answer + "\" is not an option label");
  }

  const json& frames = detail::require_field(j, "frames");
  if (!frames.is_array() || frames.empty())
    throw Error("field \"frames\" must be a non-empty list");
  double prev_ts = -1.0;
  int index = 0;
  for (const auto& f : frames) {
    FrameRecord rec;
    rec.index = index++;
    rec.timestamp = detail::require_number(f, "timestamp");
    if (rec.timestamp < 0.0) throw Error("negative timestamp");
    if (!(rec.timestamp > prev_ts))
      throw Error("timestamps must be strictly increasing (frame " +
                  std::to_string(rec.index) + ")");
    prev_ts = rec.timestamp;
    rec.description = detail::require_string(f, "description");
    const double raw = detail::require_number(f, "relevance_score");
    rec.relevance_score = raw / opts.score_scale;
    if (!(rec.relevance_score >= 0.0 && rec.relevance_score <= 1.0))
      throw Error("relevance_score out of range after scaling (frame " +
                  std::to_string(rec.index) + ")");
    rec.label = categorize_frame(rec.relevance_score, opts.thresholds);
    s.frames.push_back(std::move(rec));
  }
  return s;
}

/// Wire form of a sample. Frame indices are positional and labels are derived
/// from scores, so neither appears on the wire.
inline json sample_to_wire(const CorpusSample& s) {
  json frames = json::array();
  for (const auto& f : s.frames) {
    frames.push_back(json{{"timestamp", f.timestamp},
                          {"description", f.description},
                          {"relevance_score", f.relevance_score}});
  }
  json j{{"sample_id", s.sample_id},
         {"question", s.question},
         {"qa_type", std::string(qa_type_name(s.qa_type))},
         {"answer", s.answer},
         {"frames", std::move(frames)}};
  if (!s.options.empty()) {
    json opts = json::array();
    for (const auto& o : s.options)
      opts.push_back(json{{"label", o.label}, {"text", o.text}});
    j["options"] = std::move(opts);
  }
  return j;
}

/// Reads UTF-8 line-delimited records. The whole stream is rejected on the
/// first malformed line; the error names that line.
inline std::vector<CorpusSample> ingest(std::istream& in,
                                        const IngestOptions& opts = {}) {
  std::vector<CorpusSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IngestError(line_no, "invalid record syntax");
    try {
      out.push_back(sample_from_wire(j, opts));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw IngestError(line_no, e.what());
    }
  }
  return out;
}

inline void write_jsonl(std::ostream& out,
                        const std::vector<CorpusSample>& samples) {
  for (const auto& s : samples) out << sample_to_wire(s).dump() << '\n';
}

struct SyntheticSpec {
  std::size_t n_samples = 0;
  int n_frames = 64;
  double evidence_ratio_min = 0.1;
  double evidence_ratio_max = 0.6;
  std::uint64_t seed = 0;
};

namespace detail {

inline FrameRecord synth_frame(int index, FrameLabel label, Rng& rng,
                               const std::string& sample_id) {
  FrameRecord f;
  f.index = index;
  f.timestamp = 2.0 * index + rng.uniform(0.0, 1.0);
  switch (label) {
    case FrameLabel::Evidence:
      f.relevance_score = rng.uniform(0.7, 1.0);
      f.description = "frame " + std::to_string(index) +
                      " clearly shows the event the question asks about "
                      "(evidence, " +
                      sample_id + ")";
      break;
    case FrameLabel::Contextual:
      f.relevance_score = rng.uniform(0.3, 0.7);
      f.description = "frame " + std::to_string(index) +
                      " shows surrounding activity that hints at the event "
                      "(contextual, " +
                      sample_id + ")";
      break;
    case FrameLabel::Irrelevant:
      f.relevance_score = rng.uniform(0.0, 0.3);
      f.description = "frame " + std::to_string(index) +
                      " shows unrelated scenery (irrelevant, " + sample_id +
                      ")";
      break;
  }
  f.label = label;
  return f;
}

}  // namespace detail

/// Deterministic synthetic corpus with known ground-truth labels. Frame
/// descriptions mention the label so a template reasoner can quote them, and
/// relevance scores fall inside the default threshold band for the label, so
/// a serialize/ingest round trip reproduces the same labels.
inline std::vector<CorpusSample> gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n_samples > 0 && spec.n_frames < 1)
    throw DomainError("n_frames must be >= 1");
  if (!(spec.evidence_ratio_min >= 0.0 && spec.evidence_ratio_max <= 1.0))
    throw DomainError("evidence ratio range must be within [0,1]");
  if (spec.evidence_ratio_min > spec.evidence_ratio_max)
    throw DomainError("empty evidence ratio range");

  static const char* kFreeFormAnswers[] = {
      "the key object appears near the marked area",
      "a person places the item on the table",
      "the vehicle stops in front of the building",
      "the screen displays the final score",
  };

  std::vector<CorpusSample> out;
  out.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    Rng rng(derive_seed(spec.seed, i));
    CorpusSample s;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%06zu", i);
    s.sample_id = id;

    const double ratio =
        rng.uniform(spec.evidence_ratio_min, spec.evidence_ratio_max);
    const bool force_all_evidence =
        spec.evidence_ratio_min >= 1.0;  // uniform() never returns 1.0
    for (int f = 0; f < spec.n_frames; ++f) {
      FrameLabel label;
      if (force_all_evidence || rng.uniform01() < ratio) {
        label = FrameLabel::Evidence;
      } else {
        label = rng.bernoulli(0.5) ? FrameLabel::Contextual
                                   : FrameLabel::Irrelevant;
      }
      s.frames.push_back(detail::synth_frame(f, label, rng, s.sample_id));
    }

    if (rng.bernoulli(0.5)) {
      s.qa_type = QaType::MultiChoice;
      s.question = "Which option describes what the highlighted moment shows?";
      std::vector<std::string> texts = {
          "the key event occurs", "an unrelated scene plays",
          "the opening titles roll", "a static background shot"};
      std::vector<int> order = {0, 1, 2, 3};
      rng.shuffle(order);
      const char* letters = "ABCD";
      for (int k = 0; k < 4; ++k) {
        s.options.push_back(
            ChoiceOption{std::string(1, letters[k]), texts[order[k]]});
        if (order[k] == 0) s.answer = std::string(1, letters[k]);
      }
    } else {
      s.qa_type = QaType::FreeForm;
      s.question = "What happens at the highlighted moment in the video?";
      s.answer = kFreeFormAnswers[rng.below(4)];
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace conan::corpus

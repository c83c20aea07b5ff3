// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// Automated trace construction: a threshold-gated loop that starts from a
// uniform sample of frames, decides between random sampling, specific
// retrieval, and answering, and asks a reasoner for per-round text. Final
// answers are teacher-forced from ground truth because traces are training
// data, not predictions.

#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "conan/corpus.hpp"
#include "conan/edas.hpp"
#include "conan/errors.hpp"
#include "conan/labels.hpp"
#include "conan/reasoner.hpp"
#include "conan/rng.hpp"
#include "conan/util.hpp"

namespace conan::tracer {

using corpus::CorpusSample;

struct ClipWindow {
  double start_ts = 0.0;
  double end_ts = 0.0;

  bool operator==(const ClipWindow&) const = default;
};

struct RandomFrameSampling {
  int count = 8;

  bool operator==(const RandomFrameSampling&) const = default;
};

struct SpecificFrameRetrieval {
  std::vector<ClipWindow> clips;
  int count = 8;

  bool operator==(const SpecificFrameRetrieval&) const = default;
};

struct ConfidentQuestionAnswering {
  std::string answer;

  bool operator==(const ConfidentQuestionAnswering&) const = default;
};

using Action = std::variant<RandomFrameSampling, SpecificFrameRetrieval,
                            ConfidentQuestionAnswering>;

inline bool is_answer(const Action& a) {
  return std::holds_alternative<ConfidentQuestionAnswering>(a);
}

inline std::string action_summary(const Action& a) {
  if (const auto* r = std::get_if<RandomFrameSampling>(&a))
    return "random_frame_sampling of " + std::to_string(r->count) + " frames";
  if (const auto* s = std::get_if<SpecificFrameRetrieval>(&a)) {
    std::string out = "specific_frame_retrieval within ";
    for (std::size_t i = 0; i < s->clips.size(); ++i) {
      if (i > 0) out += ", ";
      out += fmt_sig9(s->clips[i].start_ts) + "s-" +
             fmt_sig9(s->clips[i].end_ts) + "s";
    }
    return out;
  }
  return "confident_question_answering";
}

struct TracerConfig {
  int initial_frames = 16;
  int frames_per_retrieval = 8;
  double retrieval_threshold = 0.5;
  int max_rounds = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (initial_frames < 1) throw ConfigError("initial_frames must be >= 1");
    if (frames_per_retrieval < 1)
      throw ConfigError("frames_per_retrieval must be >= 1");
    if (!(retrieval_threshold > 0.0 && retrieval_threshold <= 1.0))
      throw ConfigError("retrieval_threshold must be in (0,1]");
    if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  }
};

struct TraceRound {
  int round_index = 1;
  std::vector<int> visible_frames;
  std::map<int, FrameLabel> gt_labels;
  std::string reasoning_text;
  Action action;
};

struct Trace {
  std::string sample_id;
  std::vector<TraceRound> rounds;
  std::string final_answer;
  double edi_norm = 0.0;

  int round_count() const { return static_cast<int>(rounds.size()); }
};

// ---------------------------------------------------------------------------
// Loop primitives

/// k indices spaced uniformly over 0..n-1: idx_j = round(j*(n-1)/(k-1)),
/// deduplicated. All indices when n <= k. Deterministic.
inline std::vector<int> init_visible(int n_frames, int k) {
  if (n_frames < 1) throw DomainError("need at least one frame");
  if (k < 1) throw DomainError("k must be >= 1");
  std::vector<int> out;
  if (n_frames <= k) {
    out.resize(static_cast<std::size_t>(n_frames));
    for (int i = 0; i < n_frames; ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
  }
  if (k == 1) return {0};
  for (int j = 0; j < k; ++j) {
    const auto idx = static_cast<int>(std::lround(
        static_cast<double>(j) * (n_frames - 1) / (k - 1)));
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

inline std::vector<int> init_visible(const CorpusSample& sample, int k) {
  return init_visible(sample.frame_count(), k);
}

/// Minimal clip windows covering runs of visible Evidence/Contextual frames,
/// padded by one frame on each side and merged when they touch.
inline std::vector<ClipWindow> relevant_clips(
    const CorpusSample& sample, const std::map<int, FrameLabel>& visible) {
  const int n = sample.frame_count();
  std::vector<std::pair<int, int>> runs;
  int prev_visible = -1;
  for (const auto& [idx, label] : visible) {
    if (is_relevant(label)) {
      if (!runs.empty() && runs.back().second == prev_visible) {
        runs.back().second = idx;
      } else {
        runs.emplace_back(idx, idx);
      }
    }
    prev_visible = idx;
  }
  std::vector<std::pair<int, int>> merged;
  for (auto [lo, hi] : runs) {
    lo = std::max(0, lo - 1);
    hi = std::min(n - 1, hi + 1);
    if (!merged.empty() && lo <= merged.back().second + 1) {
      merged.back().second = std::max(merged.back().second, hi);
    } else {
      merged.emplace_back(lo, hi);
    }
  }
  std::vector<ClipWindow> out;
  out.reserve(merged.size());
  for (const auto& [lo, hi] : merged) {
    out.push_back(ClipWindow{sample.frames[static_cast<std::size_t>(lo)].timestamp,
                             sample.frames[static_cast<std::size_t>(hi)].timestamp});
  }
  return out;
}

/// Decision rule for one round. All frames irrelevant -> sample more at
/// random; some relevant but the evidence proportion below the threshold ->
/// retrieve within the relevant clips; otherwise answer. At max_rounds the
/// answer is forced regardless.
inline Action decide_action(const CorpusSample& sample,
                            const std::map<int, FrameLabel>& visible_labels,
                            int round_index, const TracerConfig& config) {
  config.validate();
  if (visible_labels.empty()) throw DomainError("no visible frames");
  if (round_index >= config.max_rounds)
    return ConfidentQuestionAnswering{sample.answer};

  std::size_t evidence = 0;
  std::size_t relevant = 0;
  for (const auto& [idx, label] : visible_labels) {
    if (label == FrameLabel::Evidence) ++evidence;
    if (is_relevant(label)) ++relevant;
  }
  if (relevant == 0) return RandomFrameSampling{config.frames_per_retrieval};
  const double proportion =
      static_cast<double>(evidence) / static_cast<double>(visible_labels.size());
  if (proportion >= config.retrieval_threshold)
    return ConfidentQuestionAnswering{sample.answer};
  return SpecificFrameRetrieval{relevant_clips(sample, visible_labels),
                                config.frames_per_retrieval};
}

struct ApplyResult {
  std::vector<int> visible;
  bool exhausted = false;  // no frame could be added
};

namespace detail {

inline std::vector<int> merge_sorted(const std::vector<int>& visible,
                                     std::vector<int> added) {
  std::vector<int> out = visible;
  out.insert(out.end(), added.begin(), added.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// Applies a non-answer action to the visible set. Random sampling draws
/// seeded uniform picks from the unseen frames; retrieval takes uniformly
/// spaced unseen frames whose timestamps fall inside the clips. The result is
/// the union; visibility never shrinks.
inline ApplyResult apply_action(const CorpusSample& sample,
                                const std::vector<int>& visible,
                                const Action& action, Rng& rng) {
  if (is_answer(action))
    throw DomainError("confident_question_answering cannot be applied");
  const int n = sample.frame_count();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (const int idx : visible) {
    if (idx < 0 || idx >= n) throw DomainError("visible index out of range");
    seen[static_cast<std::size_t>(idx)] = true;
  }

  std::vector<int> candidates;
  int count = 0;
  if (const auto* r = std::get_if<RandomFrameSampling>(&action)) {
    if (r->count < 1) throw DomainError("count must be positive");
    count = r->count;
    for (int i = 0; i < n; ++i)
      if (!seen[static_cast<std::size_t>(i)]) candidates.push_back(i);
  } else {
    const auto& retrieval = std::get<SpecificFrameRetrieval>(action);
    if (retrieval.count < 1) throw DomainError("count must be positive");
    if (retrieval.clips.empty()) throw DomainError("retrieval without clips");
    for (const auto& clip : retrieval.clips) {
      if (!(clip.start_ts >= 0.0 && clip.end_ts >= clip.start_ts) ||
          clip.start_ts > sample.duration())
        throw DomainError("clip outside video duration");
    }
    count = retrieval.count;
    for (int i = 0; i < n; ++i) {
      if (seen[static_cast<std::size_t>(i)]) continue;
      const double ts = sample.frames[static_cast<std::size_t>(i)].timestamp;
      for (const auto& clip : retrieval.clips) {
        if (ts >= clip.start_ts && ts <= clip.end_ts) {
          candidates.push_back(i);
          break;
        }
      }
    }
  }

  if (candidates.empty()) return ApplyResult{visible, true};

  std::vector<int> added;
  if (static_cast<int>(candidates.size()) <= count) {
    added = candidates;
  } else if (std::holds_alternative<RandomFrameSampling>(action)) {
    for (int k = 0; k < count; ++k) {
      const auto pick = static_cast<std::size_t>(rng.below(candidates.size()));
      added.push_back(candidates[pick]);
      candidates[pick] = candidates.back();
      candidates.pop_back();
    }
  } else {
    for (const int pos : init_visible(static_cast<int>(candidates.size()), count))
      added.push_back(candidates[static_cast<std::size_t>(pos)]);
  }
  return ApplyResult{detail::merge_sorted(visible, std::move(added)), false};
}

// ---------------------------------------------------------------------------
// Trace construction

namespace detail {

inline std::uint64_t sample_stream(const std::string& sample_id) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const unsigned char c : sample_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::map<int, FrameLabel> labels_of(const CorpusSample& sample,
                                           const std::vector<int>& visible) {
  std::map<int, FrameLabel> out;
  for (const int idx : visible)
    out.emplace(idx, sample.frames[static_cast<std::size_t>(idx)].label);
  return out;
}

inline ReasonerRequest make_request(const CorpusSample& sample,
                                    const std::vector<int>& visible,
                                    int round_index, const Action& action) {
  ReasonerRequest req;
  req.sample_id = sample.sample_id;
  req.question = sample.question;
  req.round_index = round_index;
  for (const int idx : visible) {
    const auto& f = sample.frames[static_cast<std::size_t>(idx)];
    req.frames.push_back(
        ReasonerFrame{f.index, f.timestamp, f.description, f.label});
  }
  req.action_summary = action_summary(action);
  return req;
}

}  // namespace detail

/// Runs the full loop over one labeled sample. Deterministic for a fixed
/// (sample, config seed, reasoner). Reasoner failures propagate as
/// ReasonerError; batch callers exclude such traces.
inline Trace build_trace(const CorpusSample& sample, ReasonerClient& reasoner,
                         const TracerConfig& config) {
  config.validate();
  if (sample.frames.empty()) throw DomainError("sample without frames");
  Rng rng(derive_seed(config.seed, detail::sample_stream(sample.sample_id)));

  Trace trace;
  trace.sample_id = sample.sample_id;
  std::vector<int> visible = init_visible(sample, config.initial_frames);
  for (int round = 1;; ++round) {
    auto labels = detail::labels_of(sample, visible);
    Action action = decide_action(sample, labels, round, config);
    const auto request = detail::make_request(sample, visible, round, action);
    TraceRound tr;
    tr.round_index = round;
    tr.visible_frames = visible;
    tr.gt_labels = std::move(labels);
    tr.reasoning_text = reasoner.reason(request);
    tr.action = action;
    trace.rounds.push_back(std::move(tr));
    if (is_answer(action)) break;
    visible = apply_action(sample, visible, action, rng).visible;
  }
  trace.final_answer = sample.answer;
  trace.edi_norm = edas::edi(sample).edi_norm;
  return trace;
}

/// Round count the loop would take, without calling any reasoner. Used when a
/// curriculum pool needs round counts but no traces exist yet.
inline int simulate_round_count(const CorpusSample& sample,
                                const TracerConfig& config) {
  config.validate();
  if (sample.frames.empty()) throw DomainError("sample without frames");
  Rng rng(derive_seed(config.seed, detail::sample_stream(sample.sample_id)));
  std::vector<int> visible = init_visible(sample, config.initial_frames);
  for (int round = 1;; ++round) {
    const Action action =
        decide_action(sample, detail::labels_of(sample, visible), round, config);
    if (is_answer(action)) return round;
    visible = apply_action(sample, visible, action, rng).visible;
  }
}

struct TraceFailure {
  std::string sample_id;
  std::string reason;
};

struct BuildReport {
  std::vector<Trace> traces;      // successes, in input order
  std::vector<TraceFailure> failures;
};

/// Builds traces for all samples with at most `parallelism` reasoner calls in
/// flight. Output order equals input order regardless of completion order.
inline BuildReport build_traces(const std::vector<CorpusSample>& samples,
                                ReasonerClient& reasoner,
                                const TracerConfig& config,
                                int parallelism = 1) {
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  std::vector<std::optional<Trace>> slots(samples.size());
  std::vector<std::optional<TraceFailure>> failures(samples.size());
  std::atomic<std::size_t> next{0};

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= samples.size()) return;
      try {
        slots[i] = build_trace(samples[i], reasoner, config);
      } catch (const std::exception& e) {
        failures[i] = TraceFailure{samples[i].sample_id, e.what()};
      }
    }
  };

  const int threads =
      std::min<int>(parallelism, static_cast<int>(samples.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BuildReport report;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (slots[i])
      report.traces.push_back(std::move(*slots[i]));
    else if (failures[i])
      report.failures.push_back(std::move(*failures[i]));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json action_to_json(const Action& a) {
  if (const auto* r = std::get_if<RandomFrameSampling>(&a))
    return {{"type", "random_frame_sampling"}, {"params", {{"count", r->count}}}};
  if (const auto* s = std::get_if<SpecificFrameRetrieval>(&a)) {
    nlohmann::json clips = nlohmann::json::array();
    for (const auto& c : s->clips)
      clips.push_back(nlohmann::json::array({c.start_ts, c.end_ts}));
    return {{"type", "specific_frame_retrieval"},
            {"params", {{"clips", std::move(clips)}, {"count", s->count}}}};
  }
  const auto& q = std::get<ConfidentQuestionAnswering>(a);
  return {{"type", "confident_question_answering"},
          {"params", {{"answer", q.answer}}}};
}

inline Action action_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  const auto& params = j.at("params");
  if (type == "random_frame_sampling")
    return RandomFrameSampling{params.at("count").get<int>()};
  if (type == "specific_frame_retrieval") {
    SpecificFrameRetrieval s;
    for (const auto& c : params.at("clips"))
      s.clips.push_back(ClipWindow{c.at(0).get<double>(), c.at(1).get<double>()});
    s.count = params.at("count").get<int>();
    return s;
  }
  if (type == "confident_question_answering")
    return ConfidentQuestionAnswering{params.at("answer").get<std::string>()};
  throw Error("unknown action type \"" + type + "\"");
}

inline nlohmann::json trace_to_json(const Trace& t) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : t.rounds) {
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [idx, label] : r.gt_labels)
      labels[std::to_string(idx)] = label_name(label);
    rounds.push_back({{"round_index", r.round_index},
                      {"visible_frames", r.visible_frames},
                      {"gt_labels", std::move(labels)},
                      {"reasoning_text", r.reasoning_text},
                      {"action", action_to_json(r.action)}});
  }
  return {{"sample_id", t.sample_id},
          {"round_count", t.round_count()},
          {"rounds", std::move(rounds)},
          {"final_answer", t.final_answer},
          {"edi_norm", t.edi_norm}};
}

inline Trace trace_from_json(const nlohmann::json& j) {
  Trace t;
  t.sample_id = j.at("sample_id").get<std::string>();
  t.final_answer = j.at("final_answer").get<std::string>();
  t.edi_norm = j.value("edi_norm", 0.0);
  for (const auto& r : j.at("rounds")) {
    TraceRound tr;
    tr.round_index = r.at("round_index").get<int>();
    tr.visible_frames = r.at("visible_frames").get<std::vector<int>>();
    for (const auto& [key, value] : r.at("gt_labels").items()) {
      const auto label = parse_label(value.get<std::string>());
      if (!label) throw Error("unknown label in trace");
      tr.gt_labels.emplace(std::stoi(key), *label);
    }
    tr.reasoning_text = r.at("reasoning_text").get<std::string>();
    tr.action = action_from_json(r.at("action"));
    t.rounds.push_back(std::move(tr));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Cold-start stage exports

enum class Stage { Textual, MultimodalAlignment, VisionCentric };

inline constexpr std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Textual:
      return "textual";
    case Stage::MultimodalAlignment:
      return "multimodal_alignment";
    case Stage::VisionCentric:
      return "vision_centric";
  }
  return "";
}

inline std::optional<Stage> parse_stage(std::string_view s) {
  if (s == "textual") return Stage::Textual;
  if (s == "multimodal_alignment") return Stage::MultimodalAlignment;
  if (s == "vision_centric") return Stage::VisionCentric;
  return std::nullopt;
}

/// Renders one trace for a cold-start stage. Textual keeps descriptions and
/// timestamps with no frame references; multimodal alignment pairs every
/// frame reference with its description; vision-centric keeps references and
/// timestamps only. References are (sample_id, frame_index, timestamp)
/// triples, never pixels.
inline nlohmann::json export_stage(const Trace& trace,
                                   const CorpusSample& sample, Stage stage) {
  if (trace.sample_id != sample.sample_id)
    throw DomainError("trace and sample ids differ");
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : trace.rounds) {
    nlohmann::json frames = nlohmann::json::array();
    for (const int idx : r.visible_frames) {
      const auto& f = sample.frames.at(static_cast<std::size_t>(idx));
      nlohmann::json entry{{"timestamp", f.timestamp}};
      if (stage != Stage::VisionCentric) entry["description"] = f.description;
      if (stage != Stage::Textual) {
        entry["frame_ref"] = {{"sample_id", sample.sample_id},
                              {"frame_index", f.index},
                              {"timestamp", f.timestamp}};
      }
      frames.push_back(std::move(entry));
    }
    rounds.push_back({{"round_index", r.round_index},
                      {"frames", std::move(frames)},
                      {"reasoning_text", r.reasoning_text},
                      {"action", action_to_json(r.action)}});
  }
  return {{"sample_id", trace.sample_id},
          {"stage", std::string(stage_name(stage))},
          {"round_count", trace.round_count()},
          {"rounds", std::move(rounds)},
          {"final_answer", trace.final_answer}};
}

}  // namespace conan::tracer

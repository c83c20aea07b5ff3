// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line frontend over the whole pipeline. One binary, nine
// subcommands; all I/O is files or stdin/stdout. Flag values win over config
// file entries, which win over environment variables. Exit codes: 0 success,
// 1 data error, 2 usage or config error.

#pragma once

#include <csignal>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "conan/corpus.hpp"
#include "conan/edas.hpp"
#include "conan/errors.hpp"
#include "conan/http_reasoner.hpp"
#include "conan/reasoner.hpp"
#include "conan/score_api.hpp"
#include "conan/service.hpp"
#include "conan/simenv.hpp"
#include "conan/tracer.hpp"
#include "conan/util.hpp"
#include "conan/version.hpp"

namespace conan::cli {

struct CliState {
  // Global
  std::uint64_t seed = 0;
  std::string out;
  std::string input;

  // Corpus / thresholds
  double t_evidence = 0.7;
  double t_contextual = 0.3;
  double score_scale = 1.0;

  // gen-synthetic
  std::size_t n_samples = 100;
  int n_frames = 64;
  double evidence_min = 0.1;
  double evidence_max = 0.6;

  // edi / sample
  std::string position = "index";
  std::string stage;
  std::size_t size = 0;
  double threshold = 0.5;
  double easy_fraction = 0.7;
  std::string round_quota;
  std::string traces_path;

  // build-traces / simulate loop parameters
  std::string reasoner = "mock";
  int initial_frames = 16;
  int frames_per_retrieval = 8;
  double retrieval_threshold = 0.5;
  int max_rounds = 3;
  int parallelism = 1;

  // export-stage
  std::string corpus_path;

  // simulate
  std::string policy = "oracle";
  int episodes = 100;

  // serve
  int port = 8080;
  std::size_t max_batch = api::kDefaultMaxBatch;
  int workers = 1;
  CLI::Option* opt_port = nullptr;
  CLI::Option* opt_max_batch = nullptr;

  std::function<void()> command;
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  if (path.empty()) throw ConfigError("--input is required");
  std::ifstream in(path);
  if (!in) throw Error("cannot open input file: " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  if (path.empty()) throw ConfigError("--out is required");
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  return out;
}

inline corpus::IngestOptions ingest_options(const CliState& s) {
  corpus::IngestOptions opts;
  opts.thresholds = corpus::LabelThresholds{s.t_evidence, s.t_contextual};
  opts.score_scale = s.score_scale;
  return opts;
}

inline tracer::TracerConfig tracer_config(const CliState& s) {
  tracer::TracerConfig cfg;
  cfg.initial_frames = s.initial_frames;
  cfg.frames_per_retrieval = s.frames_per_retrieval;
  cfg.retrieval_threshold = s.retrieval_threshold;
  cfg.max_rounds = s.max_rounds;
  cfg.seed = s.seed;
  return cfg;
}

inline edas::PositionMode position_mode(const CliState& s) {
  const auto mode = edas::parse_position_mode(s.position);
  if (!mode) throw ConfigError("--position must be \"index\" or \"duration\"");
  return *mode;
}

inline std::map<int, std::size_t> parse_round_quota(const std::string& text,
                                                    std::size_t target) {
  if (text == "default") return edas::default_round_quota(target);
  std::map<int, std::size_t> quota;
  for (const auto part : split(text, ',')) {
    const auto item = trim(part);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("bad --round-quota entry \"" + std::string(item) +
                        "\", expected ROUND=COUNT");
    try {
      quota[std::stoi(std::string(item.substr(0, eq)))] =
          std::stoul(std::string(item.substr(eq + 1)));
    } catch (const std::exception&) {
      throw ConfigError("bad --round-quota entry \"" + std::string(item) +
                        "\"");
    }
  }
  return quota;
}

// -------------------------------------------------------------------------
// Subcommand bodies

inline void run_gen_synthetic(const CliState& s) {
  corpus::SyntheticSpec spec;
  spec.n_samples = s.n_samples;
  spec.n_frames = s.n_frames;
  spec.evidence_ratio_min = s.evidence_min;
  spec.evidence_ratio_max = s.evidence_max;
  spec.seed = s.seed;
  const auto samples = corpus::gen_synthetic(spec);
  auto out = open_output(s.out);
  corpus::write_jsonl(out, samples);
  std::cout << "wrote " << samples.size() << " synthetic samples to " << s.out
            << "\n";
}

inline void run_ingest(const CliState& s) {
  auto in = open_input(s.input);
  const auto samples = corpus::ingest(in, ingest_options(s));
  std::size_t evidence = 0;
  std::size_t contextual = 0;
  std::size_t irrelevant = 0;
  for (const auto& sample : samples) {
    for (const auto& f : sample.frames) {
      if (f.label == FrameLabel::Evidence) ++evidence;
      if (f.label == FrameLabel::Contextual) ++contextual;
      if (f.label == FrameLabel::Irrelevant) ++irrelevant;
    }
  }
  auto out = open_output(s.out);
  corpus::write_jsonl(out, samples);
  std::cout << "ingested " << samples.size() << " samples (" << evidence
            << " evidence / " << contextual << " contextual / " << irrelevant
            << " irrelevant frames)\n";
}

inline void run_edi(const CliState& s) {
  auto in = open_input(s.input);
  const auto samples = corpus::ingest(in, ingest_options(s));
  const auto mode = position_mode(s);
  auto out = open_output(s.out);
  double mean_norm = 0.0;
  for (const auto& sample : samples) {
    const auto score = edas::edi(sample, mode);
    mean_norm += score.edi_norm;
    out << nlohmann::json{{"sample_id", sample.sample_id},
                          {"p", score.p},
                          {"var_raw", score.var_raw},
                          {"edi_paper", score.edi_paper},
                          {"edi_norm", score.edi_norm}}
               .dump()
        << '\n';
  }
  if (!samples.empty()) mean_norm /= static_cast<double>(samples.size());
  std::cout << samples.size() << " samples, mean edi_norm "
            << fmt_sig9(mean_norm) << "\n";
}

inline std::unordered_map<std::string, int> round_counts_from_traces(
    const std::string& path) {
  std::unordered_map<std::string, int> counts;
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IngestError(line_no, "invalid record syntax");
    try {
      counts[j.at("sample_id").get<std::string>()] =
          j.at("round_count").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw IngestError(line_no, e.what());
    }
  }
  return counts;
}

inline void run_sample(const CliState& s) {
  const auto stage = edas::parse_stage(s.stage);
  if (!stage) throw ConfigError("--stage must be \"sft\" or \"rlvr\"");
  auto in = open_input(s.input);
  const auto samples = corpus::ingest(in, ingest_options(s));
  const auto mode = position_mode(s);

  std::unordered_map<std::string, int> traced;
  if (!s.traces_path.empty()) traced = round_counts_from_traces(s.traces_path);

  std::vector<edas::PoolEntry> pool;
  pool.reserve(samples.size());
  for (const auto& sample : samples) {
    edas::PoolEntry entry;
    entry.sample_id = sample.sample_id;
    entry.edi = edas::edi(sample, mode);
    if (const auto it = traced.find(sample.sample_id); it != traced.end()) {
      entry.round_count = it->second;
    } else {
      entry.round_count =
          tracer::simulate_round_count(sample, tracer_config(s));
    }
    pool.push_back(std::move(entry));
  }

  edas::CurriculumSpec spec;
  spec.stage = *stage;
  spec.target_size = s.size;
  spec.easy_fraction = s.easy_fraction;
  spec.edi_threshold = s.threshold;
  spec.seed = s.seed;
  if (!s.round_quota.empty())
    spec.round_quota = parse_round_quota(s.round_quota, s.size);

  const auto ids = edas::sample_curriculum(pool, spec);

  std::unordered_map<std::string, const edas::PoolEntry*> by_id;
  for (const auto& entry : pool) by_id[entry.sample_id] = &entry;
  auto out = open_output(s.out);
  std::size_t easy = 0;
  for (const auto& id : ids) {
    const auto* entry = by_id.at(id);
    const bool is_easy = entry->edi.edi_norm < s.threshold;
    if (is_easy) ++easy;
    out << edas::manifest_row(*entry, is_easy).dump() << '\n';
  }
  std::cout << "selected " << ids.size() << " samples (" << easy << " easy / "
            << ids.size() - easy << " hard)\n";
}

inline void run_build_traces(const CliState& s) {
  auto in = open_input(s.input);
  const auto samples = corpus::ingest(in, ingest_options(s));

  std::unique_ptr<tracer::ReasonerClient> reasoner;
  if (s.reasoner == "mock") {
    reasoner = std::make_unique<tracer::TemplateReasoner>();
  } else if (s.reasoner == "http") {
    auto cfg = tracer::HttpReasonerConfig::from_env();
    if (!cfg) throw ConfigError("CONAN_REASONER_URL is not set");
    reasoner = std::make_unique<tracer::HttpReasoner>(std::move(*cfg));
  } else {
    throw ConfigError("--reasoner must be \"mock\" or \"http\"");
  }

  const auto report = tracer::build_traces(samples, *reasoner,
                                           tracer_config(s), s.parallelism);
  auto out = open_output(s.out);
  std::map<int, std::size_t> histogram;
  for (const auto& trace : report.traces) {
    ++histogram[trace.round_count()];
    out << tracer::trace_to_json(trace).dump() << '\n';
  }
  for (const auto& failure : report.failures)
    std::cerr << "skipped " << failure.sample_id << ": " << failure.reason
              << "\n";
  std::cout << "built " << report.traces.size() << " traces ("
            << report.failures.size() << " failed); rounds:";
  for (const auto& [rounds, count] : histogram)
    std::cout << ' ' << rounds << "x" << count;
  std::cout << "\n";
}

inline void run_export_stage(const CliState& s) {
  const auto stage = tracer::parse_stage(s.stage);
  if (!stage)
    throw ConfigError(
        "--stage must be textual, multimodal_alignment, or vision_centric");
  if (s.corpus_path.empty())
    throw ConfigError("--corpus is required: stage exports need the frame "
                      "descriptions the traces were built from");
  auto corpus_in = open_input(s.corpus_path);
  const auto samples = corpus::ingest(corpus_in, ingest_options(s));
  std::unordered_map<std::string, const corpus::CorpusSample*> by_id;
  for (const auto& sample : samples) by_id[sample.sample_id] = &sample;

  auto in = open_input(s.input);
  auto out = open_output(s.out);
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IngestError(line_no, "invalid record syntax");
    tracer::Trace trace;
    try {
      trace = tracer::trace_from_json(j);
    } catch (const std::exception& e) {
      throw IngestError(line_no, e.what());
    }
    const auto it = by_id.find(trace.sample_id);
    if (it == by_id.end())
      throw IngestError(line_no, "trace references unknown sample_id \"" +
                                     trace.sample_id + "\"");
    out << tracer::export_stage(trace, *it->second, *stage).dump() << '\n';
    ++count;
  }
  std::cout << "exported " << count << " " << tracer::stage_name(*stage)
            << " records\n";
}

inline void run_score(const CliState& s) {
  auto in = open_input(s.input);
  auto out = open_output(s.out);
  std::string line;
  std::size_t line_no = 0;
  std::size_t scored = 0;
  std::size_t errors = 0;
  double total = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto item = nlohmann::json::parse(line, nullptr, false);
    if (item.is_discarded()) throw IngestError(line_no, "invalid record syntax");
    const auto result = api::score_item(item);
    if (result.contains("error")) {
      ++errors;
    } else {
      ++scored;
      total += result.at("r_total").get<double>();
    }
    out << result.dump() << '\n';
  }
  std::cout << "scored " << scored << " rollouts (" << errors
            << " errors), mean r_total "
            << fmt_sig9(scored > 0 ? total / static_cast<double>(scored) : 0.0)
            << "\n";
}

inline void run_advantages(const CliState& s) {
  auto in = open_input(s.input);
  auto out = open_output(s.out);
  std::string line;
  std::size_t line_no = 0;
  std::size_t groups = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto group = nlohmann::json::parse(line, nullptr, false);
    if (group.is_discarded()) throw IngestError(line_no, "invalid record syntax");
    try {
      out << api::handle_advantages(nlohmann::json::array({group}))[0].dump()
          << '\n';
    } catch (const api::ApiError& e) {
      throw IngestError(line_no, e.what());
    }
    ++groups;
  }
  std::cout << "computed advantages for " << groups << " groups\n";
}

inline void run_simulate(const CliState& s) {
  const auto kind = simenv::parse_policy(s.policy);
  if (!kind) throw ConfigError("--policy must be oracle, random, or greedy");
  std::vector<corpus::CorpusSample> samples;
  if (s.corpus_path.empty()) {
    samples = simenv::default_synthetic_corpus(s.seed);
  } else {
    auto in = open_input(s.corpus_path);
    samples = corpus::ingest(in, ingest_options(s));
  }
  const auto report = simenv::run_policy(samples, *kind, s.episodes,
                                         tracer_config(s), s.seed);
  auto out = open_output(s.out);
  out << report.to_csv();
  std::cout << "policy=" << s.policy << " " << report.summary() << "\n";
}

inline service::RewardService*& active_service() {
  static service::RewardService* instance = nullptr;
  return instance;
}

inline void handle_stop_signal(int) {
  if (auto* svc = active_service()) svc->stop();
}

inline void run_serve(const CliState& s) {
  service::ServiceConfig cfg = service::ServiceConfig::from_env();
  if (s.opt_port != nullptr && s.opt_port->count() > 0) cfg.port = s.port;
  if (s.opt_max_batch != nullptr && s.opt_max_batch->count() > 0)
    cfg.max_batch = s.max_batch;
  cfg.workers = s.workers;
  service::RewardService server(cfg);
  active_service() = &server;
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  std::cout << "serving on port " << cfg.port << " (max batch "
            << cfg.max_batch << ")\n";
  server.listen();
  active_service() = nullptr;
}

}  // namespace detail

/// Builds the full CLI. The state must outlive the returned app.
inline std::unique_ptr<CLI::App> build_app(CliState& s) {
  auto app = std::make_unique<CLI::App>(
      "conan: trace construction, curriculum sampling, and reward "
      "verification for evidence-grounded video QA",
      "conan");
  app->set_version_flag("--version", std::string(kVersion));
  app->set_config("--config", "", "Config file (key=value, [subcommand] sections)");
  app->add_option("--seed", s.seed, "Seed for every stochastic step")
      ->capture_default_str();
  app->add_option("--out", s.out, "Output file path");
  app->require_subcommand(1);

  const auto add_threshold_flags = [&](CLI::App* sub) {
    sub->add_option("--t-evidence", s.t_evidence,
                    "Relevance score at or above which a frame is evidence")
        ->capture_default_str();
    sub->add_option("--t-contextual", s.t_contextual,
                    "Relevance score at or above which a frame is contextual")
        ->capture_default_str();
    sub->add_option("--score-scale", s.score_scale,
                    "Divisor applied to incoming relevance scores")
        ->capture_default_str();
  };
  const auto add_loop_flags = [&](CLI::App* sub) {
    sub->add_option("--initial-frames", s.initial_frames,
                    "Frames sampled uniformly at the start of an episode")
        ->capture_default_str();
    sub->add_option("--frames-per-retrieval", s.frames_per_retrieval,
                    "Frames added per sampling or retrieval action")
        ->capture_default_str();
    sub->add_option("--retrieval-threshold", s.retrieval_threshold,
                    "Evidence proportion at which the loop answers")
        ->capture_default_str();
    sub->add_option("--max-rounds", s.max_rounds, "Round cap per trace")
        ->capture_default_str();
  };

  auto* gen = app->add_subcommand("gen-synthetic",
                                  "Generate a synthetic labeled corpus");
  gen->fallthrough();
  gen->add_option("--samples", s.n_samples, "Number of samples")
      ->capture_default_str();
  gen->add_option("--frames", s.n_frames, "Frames per sample")
      ->capture_default_str();
  gen->add_option("--evidence-min", s.evidence_min,
                  "Lower bound of the per-sample evidence ratio")
      ->capture_default_str();
  gen->add_option("--evidence-max", s.evidence_max,
                  "Upper bound of the per-sample evidence ratio")
      ->capture_default_str();
  gen->callback([&s] { s.command = [&s] { detail::run_gen_synthetic(s); }; });

  auto* ingest = app->add_subcommand(
      "ingest", "Validate, label, and canonicalize a corpus file");
  ingest->fallthrough();
  ingest->add_option("--input", s.input, "Corpus records, one per line");
  add_threshold_flags(ingest);
  ingest->callback([&s] { s.command = [&s] { detail::run_ingest(s); }; });

  auto* edi = app->add_subcommand(
      "edi", "Compute the evidence difficulty index per sample");
  edi->fallthrough();
  edi->add_option("--input", s.input, "Corpus records, one per line");
  edi->add_option("--position", s.position,
                  "Evidence position normalization: index or duration")
      ->capture_default_str();
  add_threshold_flags(edi);
  edi->callback([&s] { s.command = [&s] { detail::run_edi(s); }; });

  auto* sample = app->add_subcommand(
      "sample", "Draw a difficulty-aware curriculum split");
  sample->fallthrough();
  sample->add_option("--input", s.input, "Corpus records, one per line");
  sample->add_option("--stage", s.stage, "Curriculum stage: sft or rlvr");
  sample->add_option("--size", s.size, "Number of samples to select");
  sample->add_option("--threshold", s.threshold,
                     "edi_norm boundary between easy and hard")
      ->capture_default_str();
  sample->add_option("--easy-fraction", s.easy_fraction,
                     "Easy share for sft (inverted for rlvr)")
      ->capture_default_str();
  sample->add_option("--round-quota", s.round_quota,
                     "ROUND=COUNT[,ROUND=COUNT...] or \"default\" (25/25/10 "
                     "proportions)");
  sample->add_option("--traces", s.traces_path,
                     "Trace file supplying round counts (otherwise simulated)");
  sample->add_option("--position", s.position,
                     "Evidence position normalization: index or duration")
      ->capture_default_str();
  add_threshold_flags(sample);
  sample->callback([&s] { s.command = [&s] { detail::run_sample(s); }; });

  auto* build = app->add_subcommand(
      "build-traces", "Construct multi-round reasoning traces");
  build->fallthrough();
  build->add_option("--input", s.input, "Corpus records, one per line");
  build->add_option("--reasoner", s.reasoner,
                    "Reasoning text source: mock or http (CONAN_REASONER_URL)")
      ->capture_default_str();
  build->add_option("--parallelism", s.parallelism,
                    "Maximum in-flight reasoner calls")
      ->capture_default_str();
  add_loop_flags(build);
  add_threshold_flags(build);
  build->callback([&s] { s.command = [&s] { detail::run_build_traces(s); }; });

  auto* exp = app->add_subcommand("export-stage",
                                  "Render traces for a cold-start stage");
  exp->fallthrough();
  exp->add_option("--input", s.input, "Trace records, one per line");
  exp->add_option("--corpus", s.corpus_path,
                  "Corpus records the traces were built from");
  exp->add_option("--stage", s.stage,
                  "textual, multimodal_alignment, or vision_centric");
  add_threshold_flags(exp);
  exp->callback([&s] { s.command = [&s] { detail::run_export_stage(s); }; });

  auto* score = app->add_subcommand(
      "score", "Score rollouts: {task_type, raw_output, truth} per line");
  score->fallthrough();
  score->add_option("--input", s.input, "Rollout records, one per line");
  score->callback([&s] { s.command = [&s] { detail::run_score(s); }; });

  auto* adv = app->add_subcommand(
      "advantages", "Compute group-relative advantages, one group per line");
  adv->fallthrough();
  adv->add_option("--input", s.input,
                  "Reward groups, one JSON list of numbers per line");
  adv->callback([&s] { s.command = [&s] { detail::run_advantages(s); }; });

  auto* sim = app->add_subcommand(
      "simulate", "Run a policy through seeded episodes and emit metrics CSV");
  sim->fallthrough();
  sim->add_option("--policy", s.policy, "oracle, random, or greedy")
      ->capture_default_str();
  sim->add_option("--episodes", s.episodes, "Episode count")
      ->capture_default_str();
  sim->add_option("--corpus", s.corpus_path,
                  "Corpus file (omit for the built-in synthetic corpus)");
  add_loop_flags(sim);
  add_threshold_flags(sim);
  sim->callback([&s] { s.command = [&s] { detail::run_simulate(s); }; });

  auto* serve = app->add_subcommand("serve", "Run the reward-verifier service");
  serve->fallthrough();
  s.opt_port = serve->add_option("--port", s.port,
                                 "Listen port (env CONAN_PORT)");
  s.opt_max_batch = serve->add_option(
      "--max-batch", s.max_batch, "Largest accepted batch (env CONAN_MAX_BATCH)");
  serve->add_option("--workers", s.workers, "Scoring threads per batch")
      ->capture_default_str();
  serve->callback([&s] { s.command = [&s] { detail::run_serve(s); }; });

  return app;
}

inline int run(int argc, const char* const* argv) {
  CliState state;
  auto app = build_app(state);
  try {
    app->parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app->exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (state.command) state.command();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace conan::cli

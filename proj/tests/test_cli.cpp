// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "conan/cli.hpp"

using namespace conan;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("conan");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: ", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t count_lines(const fs::path& path) {
  const auto text = slurp(path);
  std::size_t lines = 0;
  for (const char c : text) lines += c == '\n' ? 1 : 0;
  return lines;
}

struct TempDir {
  TempDir() {
    dir = fs::temp_directory_path() /
          ("conan-cli-test-" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

/// 25 trivially easy samples (all frames evidence) and 25 maximally hard ones
/// (no evidence at all) with both QA types.
void write_split_corpus(const std::string& path) {
  std::vector<corpus::CorpusSample> samples;
  for (int i = 0; i < 50; ++i) {
    corpus::CorpusSample s;
    const bool easy = i < 25;
    s.sample_id = (easy ? "easy-" : "hard-") + std::to_string(i);
    s.question = "what happens?";
    if (i % 2 == 0) {
      s.qa_type = QaType::MultiChoice;
      s.options = {{"A", "the event"}, {"B", "nothing"}};
      s.answer = "A";
    } else {
      s.qa_type = QaType::FreeForm;
      s.answer = "the event happens near the door";
    }
    for (int f = 0; f < 20; ++f) {
      corpus::FrameRecord rec;
      rec.index = f;
      rec.timestamp = static_cast<double>(f);
      rec.description = "frame " + std::to_string(f);
      rec.relevance_score = easy ? 0.9 : 0.1;
      rec.label = easy ? FrameLabel::Evidence : FrameLabel::Irrelevant;
      s.frames.push_back(std::move(rec));
    }
    samples.push_back(std::move(s));
  }
  std::ofstream out(path);
  corpus::write_jsonl(out, samples);
}

}  // namespace

TEST_CASE("top-level help matches the frozen fixture") {
  cli::CliState state;
  const auto app = cli::build_app(state);
  CHECK(app->help() == slurp(fs::path(CONAN_FIXTURES_DIR) / "help_top.txt"));
}

TEST_CASE("every subcommand documents every flag") {
  const std::map<std::string, std::vector<std::string>> expected{
      {"gen-synthetic",
       {"--samples", "--frames", "--evidence-min", "--evidence-max"}},
      {"ingest",
       {"--input", "--t-evidence", "--t-contextual", "--score-scale"}},
      {"edi", {"--input", "--position"}},
      {"sample",
       {"--input", "--stage", "--size", "--threshold", "--easy-fraction",
        "--round-quota", "--traces"}},
      {"build-traces",
       {"--input", "--reasoner", "--parallelism", "--initial-frames",
        "--frames-per-retrieval", "--retrieval-threshold", "--max-rounds"}},
      {"export-stage", {"--input", "--corpus", "--stage"}},
      {"score", {"--input"}},
      {"advantages", {"--input"}},
      {"simulate", {"--policy", "--episodes", "--corpus"}},
      {"serve", {"--port", "--max-batch", "--workers"}},
  };
  cli::CliState state;
  const auto app = cli::build_app(state);
  for (const auto& [name, flags] : expected) {
    const auto* sub = app->get_subcommand(name);
    REQUIRE_MESSAGE(sub != nullptr, "missing subcommand ", name);
    const auto help = sub->help();
    for (const auto& flag : flags) {
      CHECK_MESSAGE(help.find(flag) != std::string::npos, name,
                    " help is missing ", flag);
    }
  }
}

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"simulate", "--help"}) == 0);
  CHECK(run_cli({"no-such-subcommand"}) == 2);
  CHECK(run_cli({"simulate", "--no-such-flag"}) == 2);
  CHECK(run_cli({}) == 2);  // a subcommand is required
  TempDir tmp;
  // Missing --out is a usage problem (config error).
  write_split_corpus(tmp.path("c.jsonl"));
  CHECK(run_cli({"edi", "--input", tmp.path("c.jsonl")}) == 2);
}

TEST_CASE("data errors exit with 1") {
  TempDir tmp;
  CHECK(run_cli({"edi", "--input", tmp.path("missing.jsonl"), "--out",
                 tmp.path("e.jsonl")}) == 1);
  std::ofstream(tmp.path("bad.jsonl")) << "{not json}\n";
  CHECK(run_cli({"edi", "--input", tmp.path("bad.jsonl"), "--out",
                 tmp.path("e.jsonl")}) == 1);
}

TEST_CASE("gen-synthetic is deterministic per seed") {
  TempDir tmp;
  CHECK(run_cli({"gen-synthetic", "--samples", "8", "--frames", "12", "--seed",
                 "5", "--out", tmp.path("a.jsonl")}) == 0);
  CHECK(run_cli({"gen-synthetic", "--samples", "8", "--frames", "12", "--seed",
                 "5", "--out", tmp.path("b.jsonl")}) == 0);
  CHECK(slurp(tmp.path("a.jsonl")) == slurp(tmp.path("b.jsonl")));
  CHECK(count_lines(tmp.path("a.jsonl")) == 8);
}

TEST_CASE("ingest canonicalizes and edi preserves the line count") {
  TempDir tmp;
  write_split_corpus(tmp.path("c.jsonl"));
  CHECK(run_cli({"ingest", "--input", tmp.path("c.jsonl"), "--out",
                 tmp.path("canon.jsonl")}) == 0);
  CHECK(count_lines(tmp.path("canon.jsonl")) == 50);
  CHECK(run_cli({"edi", "--input", tmp.path("canon.jsonl"), "--out",
                 tmp.path("e.jsonl")}) == 0);
  CHECK(count_lines(tmp.path("e.jsonl")) == 50);
  std::istringstream first_line(slurp(tmp.path("e.jsonl")));
  std::string line;
  std::getline(first_line, line);
  const auto j = nlohmann::json::parse(line);
  CHECK(j.at("sample_id") == "easy-0");
  CHECK(j.at("edi_norm").get<double>() == 0.0);
}

TEST_CASE("sample draws the documented sft and rlvr compositions") {
  TempDir tmp;
  write_split_corpus(tmp.path("c.jsonl"));
  CHECK(run_cli({"sample", "--input", tmp.path("c.jsonl"), "--stage", "sft",
                 "--size", "10", "--threshold", "0.5", "--seed", "1", "--out",
                 tmp.path("sft.jsonl")}) == 0);
  std::size_t easy = 0;
  std::size_t hard = 0;
  std::istringstream lines(slurp(tmp.path("sft.jsonl")));
  std::string line;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    (j.at("stratum") == "easy" ? easy : hard) += 1;
    CHECK(j.at("round_count").get<int>() >= 1);
  }
  CHECK(easy == 7);
  CHECK(hard == 3);

  CHECK(run_cli({"sample", "--input", tmp.path("c.jsonl"), "--stage", "rlvr",
                 "--size", "10", "--threshold", "0.5", "--seed", "1", "--out",
                 tmp.path("rlvr.jsonl")}) == 0);
  easy = hard = 0;
  std::istringstream rlvr(slurp(tmp.path("rlvr.jsonl")));
  while (std::getline(rlvr, line)) {
    const auto j = nlohmann::json::parse(line);
    (j.at("stratum") == "easy" ? easy : hard) += 1;
  }
  CHECK(easy == 3);
  CHECK(hard == 7);
}

TEST_CASE("build-traces, export-stage, and score run end to end") {
  TempDir tmp;
  CHECK(run_cli({"gen-synthetic", "--samples", "6", "--frames", "32", "--seed",
                 "3", "--out", tmp.path("c.jsonl")}) == 0);
  CHECK(run_cli({"build-traces", "--input", tmp.path("c.jsonl"), "--seed", "3",
                 "--out", tmp.path("t.jsonl")}) == 0);
  CHECK(count_lines(tmp.path("t.jsonl")) == 6);

  CHECK(run_cli({"export-stage", "--input", tmp.path("t.jsonl"), "--corpus",
                 tmp.path("c.jsonl"), "--stage", "textual", "--out",
                 tmp.path("textual.jsonl")}) == 0);
  CHECK(count_lines(tmp.path("textual.jsonl")) == 6);
  CHECK(slurp(tmp.path("textual.jsonl")).find("frame_ref") ==
        std::string::npos);

  CHECK(run_cli({"export-stage", "--input", tmp.path("t.jsonl"), "--corpus",
                 tmp.path("c.jsonl"), "--stage", "vision_centric", "--out",
                 tmp.path("vision.jsonl")}) == 0);
  CHECK(slurp(tmp.path("vision.jsonl")).find("description") ==
        std::string::npos);

  // Stage exports cannot run without the corpus (usage error).
  CHECK(run_cli({"export-stage", "--input", tmp.path("t.jsonl"), "--stage",
                 "textual", "--out", tmp.path("x.jsonl")}) == 2);

  // Score the fixture batch, one item per line.
  const auto batch = nlohmann::json::parse(
      slurp(fs::path(CONAN_FIXTURES_DIR) / "score_request.json"));
  std::ofstream items(tmp.path("items.jsonl"));
  for (const auto& item : batch) items << item.dump() << '\n';
  items.close();
  CHECK(run_cli({"score", "--input", tmp.path("items.jsonl"), "--out",
                 tmp.path("scores.jsonl")}) == 0);
  CHECK(count_lines(tmp.path("scores.jsonl")) == batch.size());
  const auto scores = slurp(tmp.path("scores.jsonl"));
  CHECK(scores.find("\"r_total\":3.5") != std::string::npos);
}

TEST_CASE("advantages standardizes one group per line") {
  TempDir tmp;
  std::ofstream(tmp.path("groups.jsonl")) << "[1,1]\n[0,1]\n";
  CHECK(run_cli({"advantages", "--input", tmp.path("groups.jsonl"), "--out",
                 tmp.path("adv.jsonl")}) == 0);
  std::istringstream lines(slurp(tmp.path("adv.jsonl")));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "[0.0,0.0]");
  std::getline(lines, line);
  const auto second = nlohmann::json::parse(line);
  CHECK(second[0].get<double>() == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(second[1].get<double>() == doctest::Approx(1.0).epsilon(1e-6));

  // An empty group is a data error naming its line.
  std::ofstream(tmp.path("bad.jsonl")) << "[1,2]\n[]\n";
  CHECK(run_cli({"advantages", "--input", tmp.path("bad.jsonl"), "--out",
                 tmp.path("adv2.jsonl")}) == 1);
}

TEST_CASE("simulate writes identical csv for identical seeds") {
  TempDir tmp;
  CHECK(run_cli({"simulate", "--policy", "oracle", "--episodes", "5", "--seed",
                 "1", "--out", tmp.path("a.csv")}) == 0);
  CHECK(run_cli({"simulate", "--policy", "oracle", "--episodes", "5", "--seed",
                 "1", "--out", tmp.path("b.csv")}) == 0);
  CHECK(slurp(tmp.path("a.csv")) == slurp(tmp.path("b.csv")));
  CHECK(count_lines(tmp.path("a.csv")) == 6);
  CHECK(run_cli({"simulate", "--policy", "nonsense", "--episodes", "5",
                 "--out", tmp.path("x.csv")}) == 2);
}

TEST_CASE("config file values yield to explicit flags") {
  TempDir tmp;
  write_split_corpus(tmp.path("c.jsonl"));
  std::ofstream(tmp.path("conan.ini"))
      << "[sample]\nsize=10\nstage=sft\nthreshold=0.5\n";
  CHECK(run_cli({"--config", tmp.path("conan.ini"), "sample", "--input",
                 tmp.path("c.jsonl"), "--seed", "1", "--out",
                 tmp.path("from_file.jsonl")}) == 0);
  CHECK(count_lines(tmp.path("from_file.jsonl")) == 10);

  // The flag overrides the file's size.
  CHECK(run_cli({"--config", tmp.path("conan.ini"), "sample", "--input",
                 tmp.path("c.jsonl"), "--size", "4", "--seed", "1", "--out",
                 tmp.path("from_flag.jsonl")}) == 0);
  CHECK(count_lines(tmp.path("from_flag.jsonl")) == 4);
}

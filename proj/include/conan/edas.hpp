// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// Evidence Difficulty Index and difficulty-aware curriculum sampling.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conan/corpus.hpp"
#include "conan/errors.hpp"
#include "conan/labels.hpp"
#include "conan/rng.hpp"

namespace conan::edas {

using corpus::CorpusSample;

/// Maximum population variance of points confined to [0,1] (two points at the
/// endpoints). Used both as the EDI normalizer and as the no-evidence
/// sentinel.
inline constexpr double kMaxVariance = 0.25;

/// Difficulty of one sample. edi_paper is the literal (1-P)*Var value, whose
/// reachable maximum is below 0.25 for normalized positions; edi_norm rescales
/// it to [0,1] so that thresholding at 0.5 is meaningful.
struct EdiScore {
  double p = 0.0;          // evidence ratio m/N
  double var_raw = 0.0;    // population variance of normalized positions
  double edi_paper = 0.0;  // (1 - p) * var_raw
  double edi_norm = 0.0;   // edi_paper / 0.25
};

/// How evidence-frame positions are normalized to [0,1] before the variance.
enum class PositionMode { IndexNormalized, DurationNormalized };

inline std::optional<PositionMode> parse_position_mode(std::string_view s) {
  if (s == "index") return PositionMode::IndexNormalized;
  if (s == "duration") return PositionMode::DurationNormalized;
  return std::nullopt;
}

inline double evidence_ratio(std::span<const FrameLabel> labels) {
  if (labels.empty()) throw DomainError("evidence_ratio of an empty list");
  std::size_t m = 0;
  for (const auto l : labels)
    if (l == FrameLabel::Evidence) ++m;
  return static_cast<double>(m) / static_cast<double>(labels.size());
}

/// Population variance of positions in [0,1]. An empty list means "no
/// evidence anywhere" and returns the 0.25 sentinel (maximum difficulty).
inline double temporal_variance(std::span<const double> positions) {
  if (positions.empty()) return kMaxVariance;
  // Shifted by the first position so identical points give exactly zero.
  const double offset = positions.front();
  double mean = 0.0;
  for (const double x : positions) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("position outside [0,1]");
    mean += x - offset;
  }
  mean /= static_cast<double>(positions.size());
  double var = 0.0;
  for (const double x : positions) {
    const double d = (x - offset) - mean;
    var += d * d;
  }
  return var / static_cast<double>(positions.size());
}

/// Normalized positions of the sample's Evidence frames.
inline std::vector<double> evidence_positions(
    const CorpusSample& sample,
    PositionMode mode = PositionMode::IndexNormalized) {
  std::vector<double> out;
  const int n = sample.frame_count();
  const double duration = sample.duration();
  for (const auto& f : sample.frames) {
    if (f.label != FrameLabel::Evidence) continue;
    if (mode == PositionMode::IndexNormalized) {
      out.push_back(n <= 1 ? 0.0 : static_cast<double>(f.index) / (n - 1));
    } else {
      out.push_back(duration <= 0.0 ? 0.0 : f.timestamp / duration);
    }
  }
  return out;
}

inline EdiScore edi(const CorpusSample& sample,
                    PositionMode mode = PositionMode::IndexNormalized) {
  if (sample.frames.empty()) throw DomainError("sample without frames");
  std::vector<FrameLabel> labels;
  labels.reserve(sample.frames.size());
  for (const auto& f : sample.frames) labels.push_back(f.label);

  EdiScore score;
  score.p = evidence_ratio(labels);
  const auto positions = evidence_positions(sample, mode);
  if (positions.empty()) {
    // No evidence frames: the formula is undefined, so this is pinned to the
    // hardest value.
    score.var_raw = kMaxVariance;
    score.edi_paper = kMaxVariance;
    score.edi_norm = 1.0;
    return score;
  }
  score.var_raw = temporal_variance(positions);
  score.edi_paper = (1.0 - score.p) * score.var_raw;
  score.edi_norm = score.edi_paper / kMaxVariance;
  return score;
}

enum class Stage { Sft, Rlvr };

inline std::optional<Stage> parse_stage(std::string_view s) {
  if (s == "sft") return Stage::Sft;
  if (s == "rlvr") return Stage::Rlvr;
  return std::nullopt;
}

struct CurriculumSpec {
  Stage stage = Stage::Sft;
  std::size_t target_size = 0;
  double easy_fraction = 0.7;  // share drawn from edi_norm < edi_threshold
  double edi_threshold = 0.5;
  std::optional<std::map<int, std::size_t>> round_quota;
  std::uint64_t seed = 0;
};

struct PoolEntry {
  std::string sample_id;
  EdiScore edi;
  int round_count = 1;
};

namespace detail {

struct SplitCounts {
  std::size_t easy = 0;
  std::size_t hard = 0;
};

/// Integer rounding rule: floor on the hard stratum, remainder to easy.
inline SplitCounts split_counts(std::size_t target, double easy_fraction) {
  const auto hard = static_cast<std::size_t>(
      std::floor(static_cast<double>(target) * (1.0 - easy_fraction) + 1e-9));
  return SplitCounts{target - hard, hard};
}

/// Spreads easy_total across rounds proportionally to each round's quota
/// (largest-remainder rounding, ties to the lower round), capped per round.
/// Row sums stay equal to the quotas, and the easy column sums to easy_total.
inline std::map<int, std::size_t> allocate_easy(
    const std::map<int, std::size_t>& quota, std::size_t target,
    std::size_t easy_total) {
  std::map<int, std::size_t> alloc;
  std::vector<std::pair<double, int>> remainders;  // (-fraction, round)
  std::size_t assigned = 0;
  const double ratio =
      target == 0 ? 0.0
                  : static_cast<double>(easy_total) / static_cast<double>(target);
  for (const auto& [round, q] : quota) {
    const double ideal = static_cast<double>(q) * ratio;
    const auto base = static_cast<std::size_t>(std::floor(ideal));
    alloc[round] = base;
    assigned += base;
    remainders.emplace_back(-(ideal - static_cast<double>(base)), round);
  }
  std::sort(remainders.begin(), remainders.end());
  std::size_t leftover = easy_total - assigned;
  for (std::size_t i = 0; leftover > 0; i = (i + 1) % remainders.size()) {
    const int round = remainders[i].second;
    if (alloc[round] < quota.at(round)) {
      ++alloc[round];
      --leftover;
    }
  }
  return alloc;
}

inline void take_from(const std::string& stratum_name,
                      std::vector<const PoolEntry*>& stratum, std::size_t want,
                      Rng& rng, std::vector<std::string>& out) {
  if (stratum.size() < want)
    throw QuotaError(stratum_name,
                     "stratum \"" + stratum_name + "\" has " +
                         std::to_string(stratum.size()) + " samples, " +
                         std::to_string(want) + " required");
  rng.shuffle(stratum);
  for (std::size_t i = 0; i < want; ++i) out.push_back(stratum[i]->sample_id);
}

}  // namespace detail

/// Round quota in the 25/25/10 proportions, scaled to target_size. The first
/// two rounds take the floor; the remainder lands on round three.
inline std::map<int, std::size_t> default_round_quota(std::size_t target_size) {
  const std::size_t one = target_size * 25 / 60;
  const std::size_t two = target_size * 25 / 60;
  return {{1, one}, {2, two}, {3, target_size - one - two}};
}

/// Draws target_size sample ids from the pool. The SFT stage draws
/// easy_fraction of them from edi_norm < edi_threshold; the RLVR stage inverts
/// the fractions. When a round quota is present it is satisfied exactly.
/// Deterministic for a fixed (pool, spec).
inline std::vector<std::string> sample_curriculum(
    std::span<const PoolEntry> pool, const CurriculumSpec& spec) {
  if (!(spec.easy_fraction >= 0.0 && spec.easy_fraction <= 1.0))
    throw DomainError("easy_fraction must be in [0,1]");
  const double easy_fraction = spec.stage == Stage::Sft
                                   ? spec.easy_fraction
                                   : 1.0 - spec.easy_fraction;
  const auto counts = detail::split_counts(spec.target_size, easy_fraction);

  Rng rng(spec.seed);
  std::vector<std::string> out;
  out.reserve(spec.target_size);

  const auto is_easy = [&](const PoolEntry& e) {
    return e.edi.edi_norm < spec.edi_threshold;
  };

  if (!spec.round_quota) {
    std::vector<const PoolEntry*> easy;
    std::vector<const PoolEntry*> hard;
    for (const auto& e : pool) (is_easy(e) ? easy : hard).push_back(&e);
    detail::take_from("easy", easy, counts.easy, rng, out);
    detail::take_from("hard", hard, counts.hard, rng, out);
    return out;
  }

  const auto& quota = *spec.round_quota;
  std::size_t quota_sum = 0;
  for (const auto& [round, q] : quota) quota_sum += q;
  if (quota_sum != spec.target_size)
    throw ConfigError("round quota sums to " + std::to_string(quota_sum) +
                      ", target_size is " + std::to_string(spec.target_size));

  const auto easy_per_round =
      detail::allocate_easy(quota, spec.target_size, counts.easy);
  for (const auto& [round, q] : quota) {
    std::vector<const PoolEntry*> easy;
    std::vector<const PoolEntry*> hard;
    for (const auto& e : pool) {
      if (e.round_count != round) continue;
      (is_easy(e) ? easy : hard).push_back(&e);
    }
    const std::size_t want_easy = easy_per_round.at(round);
    const std::string tag = "round " + std::to_string(round);
    detail::take_from(tag + "/easy", easy, want_easy, rng, out);
    detail::take_from(tag + "/hard", hard, q - want_easy, rng, out);
  }
  return out;
}

/// Split-manifest row for one selected sample.
inline nlohmann::json manifest_row(const PoolEntry& entry, bool easy) {
  return nlohmann::json{{"sample_id", entry.sample_id},
                        {"edi_paper", entry.edi.edi_paper},
                        {"edi_norm", entry.edi.edi_norm},
                        {"round_count", entry.round_count},
                        {"stratum", easy ? "easy" : "hard"}};
}

}  // namespace conan::edas

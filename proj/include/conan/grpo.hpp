// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0
//
// Group-relative advantages: rewards standardized within a group of sampled
// responses. This is the quantity an external RLVR trainer consumes; policy
// gradients, KL terms, and clipping live in the trainer.

#pragma once

#include <cmath>
#include <vector>

#include "conan/errors.hpp"

namespace conan::grpo {

struct RewardGroup {
  std::vector<double> rewards;
  double epsilon = 1e-8;
};

/// A_i = (r_i - mean(r)) / (std_pop(r) + epsilon), population standard
/// deviation (divide by G).
inline std::vector<double> group_advantages(const RewardGroup& group) {
  if (group.rewards.empty()) throw DomainError("empty reward group");
  if (!(group.epsilon > 0.0)) throw DomainError("epsilon must be positive");
  for (const double r : group.rewards)
    if (!std::isfinite(r)) throw DomainError("non-finite reward");

  const auto g = static_cast<double>(group.rewards.size());
  double mean = 0.0;
  for (const double r : group.rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (const double r : group.rewards) var += (r - mean) * (r - mean);
  const double std_pop = std::sqrt(var / g);

  std::vector<double> out;
  out.reserve(group.rewards.size());
  for (const double r : group.rewards)
    out.push_back((r - mean) / (std_pop + group.epsilon));
  return out;
}

}  // namespace conan::grpo

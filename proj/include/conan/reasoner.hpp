// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "conan/labels.hpp"
#include "conan/util.hpp"

namespace conan::tracer {

struct ReasonerFrame {
  int index = 0;
  double timestamp = 0.0;
  std::string description;
  FrameLabel label = FrameLabel::Irrelevant;
};

/// Everything the reasoner sees for one round: the QA pair, the currently
/// visible frames with labels, and the action already decided by the loop.
struct ReasonerRequest {
  std::string sample_id;
  std::string question;
  int round_index = 1;
  std::vector<ReasonerFrame> frames;
  std::string action_summary;
};

/// Chat-style text generation behind the trace builder. Implementations must
/// be safe to call from multiple threads.
class ReasonerClient {
 public:
  virtual ~ReasonerClient() = default;
  virtual std::string reason(const ReasonerRequest& request) = 0;
};

/// Deterministic template reasoner for tests and offline trace construction.
/// Quotes the first relevant frame description so the text stays grounded in
/// the sample.
class TemplateReasoner final : public ReasonerClient {
 public:
  std::string reason(const ReasonerRequest& request) override {
    std::string out = "Round " + std::to_string(request.round_index) +
                      ": examined " + std::to_string(request.frames.size()) +
                      " frames for \"" + request.question + "\".";
    const ReasonerFrame* best = nullptr;
    for (const auto& f : request.frames) {
      if (f.label == FrameLabel::Evidence) {
        best = &f;
        break;
      }
      if (f.label == FrameLabel::Contextual && best == nullptr) best = &f;
    }
    if (best != nullptr) {
      out += " Key observation at " + fmt_sig9(best->timestamp) + "s: " +
             best->description + ".";
    } else {
      out += " None of the sampled frames relate to the question.";
    }
    out += " Decision: " + request.action_summary + ".";
    return out;
  }
};

}  // namespace conan::tracer

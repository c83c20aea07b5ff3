// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string_view>

namespace conan {

/// Frame relevance classes. The underlying values give the order used by
/// tests and curriculum logic: Evidence > Contextual > Irrelevant.
enum class FrameLabel : int { Irrelevant = 0, Contextual = 1, Evidence = 2 };

inline constexpr std::string_view label_name(FrameLabel l) {
  switch (l) {
    case FrameLabel::Evidence:
      return "evidence";
    case FrameLabel::Contextual:
      return "contextual";
    case FrameLabel::Irrelevant:
      return "irrelevant";
  }
  return "irrelevant";
}

inline std::optional<FrameLabel> parse_label(std::string_view s) {
  if (s == "evidence") return FrameLabel::Evidence;
  if (s == "contextual") return FrameLabel::Contextual;
  if (s == "irrelevant") return FrameLabel::Irrelevant;
  return std::nullopt;
}

/// Whether a frame counts toward the "relevant" side of retrieval quality.
inline constexpr bool is_relevant(FrameLabel l) {
  return l != FrameLabel::Irrelevant;
}

enum class QaType { MultiChoice, FreeForm };

inline constexpr std::string_view qa_type_name(QaType t) {
  return t == QaType::MultiChoice ? "multi_choice" : "free_form";
}

inline std::optional<QaType> parse_qa_type(std::string_view s) {
  if (s == "multi_choice") return QaType::MultiChoice;
  if (s == "free_form") return QaType::FreeForm;
  return std::nullopt;
}

}  // namespace conan

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "claimcheck/labels.hpp"

namespace claimcheck::prefs {

struct ThinkSplit {
  std::string trace;      // content between <think> and its matching </think>
  std::string remainder;  // text after the closing tag, trimmed
};

// If `raw` (after leading whitespace) starts with <think>, returns the block
// and the remainder; nested <think> tags are balanced. Returns a split with
// an empty trace when there is no leading block, and std::nullopt when the
// opening tag is never closed.
std::optional<ThinkSplit> split_think_block(std::string_view raw);

// Parsed model response to a classification prompt.
struct Completion {
  std::optional<Label> predicted_label;  // empty == unparseable
  std::string justification;
  std::string reasoning_trace;
  std::string raw;

  bool parseable() const { return predicted_label.has_value(); }
};

// Strict contract: an optional leading think block followed by exactly one
// JSON object whose keys are exactly CLASSIFICATION and JUSTIFICATION (both
// strings, no duplicates). CLASSIFICATION is matched case-insensitively
// against GROUNDED / HALLUCINATED. Anything else yields an unparseable
// completion with `raw` retained.
Completion parse_completion(std::string_view raw);

// Canonical text form: "<think>trace</think>\n{json answer}". The think block
// is always emitted, possibly empty.
std::string render_completion(Label label, std::string_view justification,
                              std::string_view reasoning_trace);

// Text used when presenting or exporting a completion: the canonical
// rendering for parseable completions, the raw text otherwise.
std::string completion_content(const Completion& c);

}  // namespace claimcheck::prefs

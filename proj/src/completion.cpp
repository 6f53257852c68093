// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/completion.hpp"

#include <set>

#include "claimcheck/jsonl.hpp"
#include "claimcheck/text.hpp"

namespace claimcheck::prefs {
namespace {

constexpr std::string_view kOpen = "<think>";
constexpr std::string_view kClose = "</think>";

std::string_view ltrim(std::string_view s) {
  while (!s.empty() && text::is_space(s.front())) s.remove_prefix(1);
  return s;
}

}  // namespace

std::optional<ThinkSplit> split_think_block(std::string_view raw) {
  const std::string_view s = ltrim(raw);
  if (s.substr(0, kOpen.size()) != kOpen) return ThinkSplit{"", std::string(text::trim(s))};

  int depth = 1;
  std::size_t pos = kOpen.size();
  while (depth > 0) {
    const auto next_open = s.find(kOpen, pos);
    const auto next_close = s.find(kClose, pos);
    if (next_close == std::string_view::npos) return std::nullopt;
    if (next_open != std::string_view::npos && next_open < next_close) {
      ++depth;
      pos = next_open + kOpen.size();
    } else {
      --depth;
      pos = next_close + kClose.size();
    }
  }
  const std::size_t close_at = pos - kClose.size();
  return ThinkSplit{std::string(s.substr(kOpen.size(), close_at - kOpen.size())),
                    std::string(text::trim(s.substr(pos)))};
}

Completion parse_completion(std::string_view raw) {
  Completion c;
  c.raw = std::string(raw);

  const auto split = split_think_block(raw);
  if (!split) return c;

  std::set<std::string> top_keys;
  bool duplicate_key = false;
  const Json::parser_callback_t on_event = [&](int depth, Json::parse_event_t event, Json& parsed) {
    if (event == Json::parse_event_t::key && depth == 1) {
      if (!top_keys.insert(parsed.get<std::string>()).second) duplicate_key = true;
    }
    return true;
  };
  const Json j = Json::parse(split->remainder, on_event, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object() || duplicate_key || j.size() != 2) return c;

  const auto cls = j.find("CLASSIFICATION");
  const auto just = j.find("JUSTIFICATION");
  if (cls == j.end() || just == j.end() || !cls->is_string() || !just->is_string()) return c;

  const std::string value = text::to_lower_ascii(cls->get<std::string>());
  if (value == "grounded") {
    c.predicted_label = Label::grounded;
  } else if (value == "hallucinated") {
    c.predicted_label = Label::hallucinated;
  } else {
    return c;
  }
  c.justification = just->get<std::string>();
  c.reasoning_trace = split->trace;
  return c;
}

std::string render_completion(Label label, std::string_view justification,
                              std::string_view reasoning_trace) {
  std::string out;
  out += kOpen;
  out += reasoning_trace;
  out += kClose;
  out += "\n{\"CLASSIFICATION\": \"";
  out += label == Label::grounded ? "GROUNDED" : "HALLUCINATED";
  out += "\", \"JUSTIFICATION\": ";
  out += json_quote(justification);
  out += "}";
  return out;
}

std::string completion_content(const Completion& c) {
  if (!c.parseable()) return c.raw;
  return render_completion(*c.predicted_label, c.justification, c.reasoning_trace);
}

}  // namespace claimcheck::prefs

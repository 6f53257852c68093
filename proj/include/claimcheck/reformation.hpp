// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "claimcheck/jsonl.hpp"
#include "claimcheck/llm.hpp"
#include "claimcheck/random.hpp"

namespace claimcheck::reformation {

struct Style {
  std::string id;
  std::string instruction;
};

// The 18 rewriting styles, in a fixed order.
class StyleRegistry {
 public:
  static constexpr std::size_t kStyleCount = 18;

  static const StyleRegistry& builtin();

  // JSON array of {"id", "instruction"} objects. Throws std::invalid_argument
  // unless there are exactly 18 entries with unique ids.
  static StyleRegistry load(const std::filesystem::path& path);
  static StyleRegistry from_json(const Json& j);

  const std::vector<Style>& styles() const { return styles_; }
  const Style& at(std::size_t index) const { return styles_.at(index); }
  // Throws std::out_of_range for unknown ids.
  const Style& find(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::size_t size() const { return styles_.size(); }

  Json to_json() const;

 private:
  explicit StyleRegistry(std::vector<Style> styles);
  std::vector<Style> styles_;
};

inline constexpr double kMinTemperature = 0.2;
inline constexpr double kMaxTemperature = 0.7;

const std::string& pick_style(Rng& rng, const StyleRegistry& registry = StyleRegistry::builtin());
double sample_temperature(Rng& rng);

struct ReformRecord {
  std::string doc_id;
  std::string style_id;
  double temperature = 0.0;
  std::string reformed_text;

  Json to_json() const;
  static ReformRecord from_json(const Json& j);
  // Document at stage reformed carrying the rewritten text.
  corpus::Document to_document() const;
};

// Single user message: "<instruction>\n\n<document text>".
std::string build_reform_prompt(const Style& style, std::string_view document_text);

enum class ReformStatus { ok, client_error, empty_response };
std::string_view to_string(ReformStatus s);

struct ReformOutcome {
  ReformStatus status = ReformStatus::ok;
  std::optional<ReformRecord> record;
  std::string detail;
};

// `base` supplies every sampling parameter except temperature. Throws
// std::invalid_argument when the document is not clean or the draw is out of
// range; client failures are reported through the outcome.
ReformOutcome reform_document(const corpus::Document& doc, const std::string& style_id,
                              double temperature, llm::ChatClient& client,
                              const llm::InferenceParams& base,
                              const StyleRegistry& registry = StyleRegistry::builtin());

struct ReformDraw {
  std::string doc_id;
  std::string style_id;
  double temperature = 0.0;
  ReformStatus status = ReformStatus::ok;
};

struct ReformStageResult {
  std::vector<ReformRecord> records;
  std::vector<ReformDraw> draws;  // one per input document, failures included
  std::size_t skipped_client_error = 0;
  std::size_t skipped_empty = 0;

  Json stats_json() const;
};

// Draws style and temperature for every document up front (in input order),
// then dispatches with at most `max_inflight` concurrent requests. Output
// order follows input order.
ReformStageResult reform_all(const std::vector<corpus::Document>& docs, Rng& rng,
                             llm::ChatClient& client, const llm::InferenceParams& base,
                             std::size_t max_inflight,
                             const StyleRegistry& registry = StyleRegistry::builtin());

void write_reform_records(const std::filesystem::path& path, const std::vector<ReformRecord>& records);
std::vector<ReformRecord> read_reform_records(const std::filesystem::path& path);

}  // namespace claimcheck::reformation

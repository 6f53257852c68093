// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "claimcheck/jsonl.hpp"
#include "claimcheck/labels.hpp"
#include "claimcheck/llm.hpp"

namespace claimcheck::eval {

struct BenchRecord {
  std::string dataset;
  std::string record_id;
  std::string document;
  std::string claim;
  Label gold = Label::grounded;
};

struct BenchmarkSchema {
  std::string id_field = "id";
  std::string document_field = "doc";
  std::string claim_field = "claim";
  std::string label_field = "label";
  // Source label value (stringified) -> binary label.
  std::map<std::string, Label> label_map = {{"1", Label::grounded}, {"0", Label::hallucinated}};

  static BenchmarkSchema from_json(const Json& j);
  Json to_json() const;
};

struct BenchLoadResult {
  std::vector<BenchRecord> records;
  std::size_t skipped_unmapped = 0;
  std::size_t skipped_malformed = 0;
};

// Records in file order; unmapped labels and malformed lines are skipped and
// counted. Throws std::runtime_error when the file is unreadable.
BenchLoadResult load_benchmark(const std::filesystem::path& path, const std::string& dataset_name,
                               const BenchmarkSchema& schema = {});

enum class Prediction { grounded, hallucinated, invalid };
std::string_view to_string(Prediction p);
Prediction parse_prediction(std::string_view s);

struct EvalVerdict {
  std::string dataset;
  std::string record_id;
  Label gold = Label::grounded;
  Prediction predicted = Prediction::invalid;
  std::string justification;
  std::string reasoning_trace;
  std::string raw_response;
  std::string error_note;
  bool correct = false;

  Json to_json() const;
  static EvalVerdict from_json(const Json& j);
};

// Applies the strict output contract to a raw response.
EvalVerdict score_response(const BenchRecord& record, std::string_view raw_response);

// Classification prompt -> client -> strict parse. Client failures yield an
// invalid verdict with an error note.
EvalVerdict classify_record(const BenchRecord& record, llm::ChatClient& client,
                            const llm::InferenceParams& params);

std::vector<EvalVerdict> classify_all(const std::vector<BenchRecord>& records,
                                      llm::ChatClient& client, const llm::InferenceParams& params,
                                      std::size_t max_inflight);

// Positive class is hallucinated.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;

  std::size_t total() const { return tp + fn + tn + fp; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
  Json to_json() const;
};

enum class InvalidPolicy {
  // Invalid predictions land in the wrong cell for the gold class.
  count_as_wrong,
  // Invalid predictions are left out of the matrix entirely.
  exclude,
};
std::string_view to_string(InvalidPolicy p);
InvalidPolicy parse_invalid_policy(std::string_view s);

ConfusionMatrix confusion(const std::vector<EvalVerdict>& verdicts,
                          InvalidPolicy policy = InvalidPolicy::count_as_wrong);
std::size_t count_invalid(const std::vector<EvalVerdict>& verdicts);

class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Throw UndefinedMetric when the relevant class is empty.
double true_positive_rate(const ConfusionMatrix& cm);
double true_negative_rate(const ConfusionMatrix& cm);
double balanced_accuracy(const ConfusionMatrix& cm);

// Unweighted mean over datasets. Throws std::invalid_argument when empty.
double aggregate(const std::map<std::string, double>& per_dataset);

// Averages within each group first (datasets missing from `groups` form
// their own group), then across groups.
double aggregate_grouped(const std::map<std::string, double>& per_dataset,
                         const std::map<std::string, std::string>& groups);

// Recorded predictions: one JSON object per line with "record_id", "gold"
// (grounded / hallucinated) and either "raw_response" (strict-parsed) or
// "predicted" (grounded / hallucinated / invalid).
std::vector<EvalVerdict> read_recorded_predictions(const std::filesystem::path& path,
                                                   const std::string& dataset_name);

void write_verdicts(const std::filesystem::path& path, const std::vector<EvalVerdict>& verdicts);
std::vector<EvalVerdict> read_verdicts(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Justification scoring

enum class GEvalDimension { relevance, coherence, consistency, fluency };
inline constexpr GEvalDimension kGEvalDimensions[] = {
    GEvalDimension::relevance, GEvalDimension::coherence, GEvalDimension::consistency,
    GEvalDimension::fluency};

std::string_view to_string(GEvalDimension d);
// Relevance, coherence, consistency: 1-5. Fluency: 1-3.
double scale_max(GEvalDimension d);

struct GEvalScore {
  double relevance = 1;
  double coherence = 1;
  double consistency = 1;
  double fluency = 1;

  double get(GEvalDimension d) const;
  void set(GEvalDimension d, double v);
  Json to_json() const;
};

// Prompt templates with {{document}}, {{claim}} and {{justification}}
// placeholders, one per dimension.
struct GEvalPrompts {
  std::map<GEvalDimension, std::string> templates;

  static GEvalPrompts defaults();
  // JSON object keyed by dimension name; missing dimensions keep defaults.
  static GEvalPrompts load(const std::filesystem::path& path);
  std::string render(GEvalDimension d, std::string_view document, std::string_view claim,
                     std::string_view justification) const;
};

// First number in the judge's answer (after any think block).
std::optional<double> extract_score(std::string_view raw);

enum class GEvalStatus { ok, judge_unavailable, non_numeric };

struct GEvalOutcome {
  GEvalStatus status = GEvalStatus::ok;
  std::optional<GEvalScore> score;
  std::vector<std::string> warnings;  // clamped values
  std::optional<GEvalDimension> failed_dimension;
};

GEvalOutcome geval_justification(std::string_view document, std::string_view claim,
                                 std::string_view justification, llm::ChatClient& judge,
                                 const llm::InferenceParams& params,
                                 const GEvalPrompts& prompts = GEvalPrompts::defaults());

struct GEvalSummary {
  std::size_t scored = 0;
  std::size_t skipped_unavailable = 0;
  std::size_t dropped_non_numeric = 0;
  std::size_t clamped = 0;
  GEvalScore mean;

  Json to_json() const;
};

GEvalSummary summarize_geval(const std::vector<GEvalOutcome>& outcomes);

// ---------------------------------------------------------------------------
// Reporting

struct DatasetResult {
  std::string name;
  std::size_t records = 0;
  std::size_t invalid = 0;
  ConfusionMatrix matrix;            // invalid counted as wrong
  ConfusionMatrix matrix_excluding;  // invalid excluded
  std::optional<double> tpr;
  std::optional<double> tnr;
  std::optional<double> bacc;
  std::optional<double> bacc_excluding_invalid;

  Json to_json() const;
};

DatasetResult summarize_dataset(const std::string& name, const std::vector<EvalVerdict>& verdicts);

struct EvalReport {
  std::vector<DatasetResult> datasets;
  InvalidPolicy policy = InvalidPolicy::count_as_wrong;
  std::map<std::string, std::string> groups;
  std::optional<double> macro_bacc;
  std::optional<GEvalSummary> geval;

  Json to_json() const;
  std::string render_table() const;
};

EvalReport build_report(const std::vector<DatasetResult>& datasets, InvalidPolicy policy,
                        const std::map<std::string, std::string>& groups = {});

}  // namespace claimcheck::eval

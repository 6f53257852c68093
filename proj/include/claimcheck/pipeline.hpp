// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "claimcheck/claim_gen.hpp"
#include "claimcheck/corpus.hpp"
#include "claimcheck/eval.hpp"
#include "claimcheck/jsonl.hpp"
#include "claimcheck/llm.hpp"

namespace claimcheck::pipeline {

enum class Stage { ingest, curate, reform, claims, prefs, filter, export_, eval, report };

inline constexpr std::array<Stage, 7> kDataStages = {Stage::ingest, Stage::curate, Stage::reform,
                                                     Stage::claims, Stage::prefs,  Stage::filter,
                                                     Stage::export_};
inline constexpr std::array<Stage, 9> kAllStages = {
    Stage::ingest, Stage::curate, Stage::reform, Stage::claims, Stage::prefs,
    Stage::filter, Stage::export_, Stage::eval,  Stage::report};

std::string_view to_string(Stage s);
// Throws std::invalid_argument for unknown names.
Stage parse_stage(std::string_view s);
// Stage whose output this stage consumes, if any.
std::optional<Stage> upstream(Stage s);

struct Thresholds {
  double language = 0.95;
  std::size_t min_words = 50;
  std::size_t min_sentences = 5;
  std::size_t max_token_len = 1000;
  std::size_t min_line_words = 3;
  std::size_t shingle_size = 3;
};

struct Concurrency {
  std::size_t max_inflight = 8;      // per stage
  std::ptrdiff_t global_inflight = 32;  // across every client of a stage
  std::size_t workers = 1;           // curation filter threads
};

struct EvalDataset {
  std::string name;
  std::filesystem::path path;
  eval::BenchmarkSchema schema;
  // The file holds recorded predictions instead of benchmark records.
  bool recorded = false;
};

struct EvalConfig {
  std::vector<EvalDataset> datasets;
  std::string slot = "eval";
  llm::Mode mode = llm::Mode::think;
  eval::InvalidPolicy policy = eval::InvalidPolicy::count_as_wrong;
  std::map<std::string, std::string> groups;  // dataset -> group; unlisted datasets stand alone
  bool geval = false;
  std::string geval_slot = "judge";
  std::filesystem::path geval_prompts;  // optional
  std::size_t geval_max_records = 0;    // 0: every valid verdict
};

// Thrown when a stage refuses to run (ordering or digest checks).
class StageRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::filesystem::path work_dir = "work";
  std::filesystem::path corpus;
  corpus::CorpusSchema corpus_schema;
  std::size_t sample_size = 250000;
  Thresholds thresholds;
  claims::QuotaFractions quotas;
  Concurrency concurrency;
  std::filesystem::path unsafe_wordlist;
  std::filesystem::path styles;          // optional; built-in registry otherwise
  std::filesystem::path judge_examples;  // optional; built-in examples otherwise
  std::map<std::string, std::string> outputs;  // stage output file names under work_dir
  std::map<std::string, llm::EndpointConfig> endpoints;  // keyed by slot
  bool consensus_filter = true;
  EvalConfig eval;

  // Throws std::invalid_argument on invalid or inconsistent fields.
  static PipelineConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  // Reads the file and applies "dotted.key=value" overrides before parsing.
  static PipelineConfig load(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

  void validate() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path output(std::string_view name) const;
  std::filesystem::path manifest_path(Stage s) const;
  // Throws std::invalid_argument when the slot is not configured.
  const llm::EndpointConfig& endpoint(const std::string& slot) const;
};

// "a.b.c=value": value is parsed as JSON when possible, otherwise taken as a
// string. Intermediate objects are created as needed.
void apply_override(Json& config, std::string_view assignment);

struct StageManifest {
  std::string stage;
  std::string input_digest;
  std::string output_digest;
  std::string config_digest;
  Json counts = Json::object();
  std::string timestamp;  // UTC, ISO 8601
  std::vector<std::string> outputs;

  Json to_json() const;
  static StageManifest from_json(const Json& j);
};

std::optional<StageManifest> read_manifest(const PipelineConfig& config, Stage s);

// Output files of a stage, in a fixed order.
std::vector<std::filesystem::path> stage_outputs(const PipelineConfig& config, Stage s);
std::string outputs_digest(const std::vector<std::filesystem::path>& files);
// Digest of the configuration fields that influence a stage's output.
std::string config_digest(const PipelineConfig& config, Stage s);

struct RunOptions {
  bool force = false;
  std::ostream* log = nullptr;
};

struct StageRun {
  StageManifest manifest;
  bool executed = false;
};

// Runs one stage. Refuses (StageRefused) when the upstream manifest is missing
// or its output no longer matches, unless options.force. Returns the existing
// manifest without running when nothing changed.
StageRun run_stage(Stage s, const PipelineConfig& config, const RunOptions& options = {});

struct RunAllResult {
  std::vector<StageRun> runs;
  std::optional<Stage> failed_stage;
  std::string error;

  bool ok() const { return !failed_stage.has_value(); }
};

// Data stages in order, then eval and report when datasets are configured.
// Stops at the first failure; earlier manifests stay in place.
RunAllResult run_all(const PipelineConfig& config, const RunOptions& options = {});

}  // namespace claimcheck::pipeline

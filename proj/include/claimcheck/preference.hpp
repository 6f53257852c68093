// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "claimcheck/claim_gen.hpp"
#include "claimcheck/completion.hpp"
#include "claimcheck/jsonl.hpp"
#include "claimcheck/labels.hpp"
#include "claimcheck/llm.hpp"
#include "claimcheck/random.hpp"

namespace claimcheck::prefs {

const std::vector<std::string>& classification_instructions();

struct ClassificationPrompt {
  std::string document_text;
  std::string claim_text;
  std::string rendered;
};

// Throws std::invalid_argument if either input is blank.
ClassificationPrompt build_classification_prompt(std::string_view document_text,
                                                 std::string_view claim_text);

enum class JudgePick { chosen, rejected, invalid, unavailable };
std::string_view to_string(JudgePick p);
JudgePick parse_judge_pick(std::string_view s);

// Whether the chosen completion was shown as RESPONSE_A.
enum class PresentationOrder { chosen_first, rejected_first };
std::string_view to_string(PresentationOrder o);
PresentationOrder parse_presentation_order(std::string_view s);

struct FilterAudit {
  bool agreement_passed = false;
  std::string agreement_reason;  // empty when passed
  std::optional<PresentationOrder> presentation_order;
  std::optional<JudgePick> judge1_pick;
  std::optional<JudgePick> judge2_pick;
  bool consensus_passed = false;
  bool consensus_skipped = false;  // ablation: filter disabled
  std::string consensus_reason;    // empty when passed
  bool rejected_unparseable = false;
};

struct PreferenceTuple {
  std::string doc_id;
  ClassificationPrompt prompt;
  Completion chosen;
  Completion rejected;
  std::string chosen_source;    // client id of the large generator
  std::string rejected_source;  // client id of the small generator
  Label synthetic_label = Label::grounded;
  FilterAudit audit;

  // Ready for export: agreement passed and consensus passed or skipped.
  bool exportable() const;

  Json to_json() const;
  static PreferenceTuple from_json(const Json& j);
};

enum class PairStatus { ok, large_failed, small_failed };
std::string_view to_string(PairStatus s);

struct PairOutcome {
  PairStatus status = PairStatus::ok;
  std::optional<PreferenceTuple> tuple;
};

// Same prompt to both generators; the large model's completion is always
// chosen and the small model's rejected. Unparseable completions are kept.
PairOutcome generate_pair(const claims::ClaimTriplet& triplet, llm::ChatClient& large,
                          llm::ChatClient& small, const llm::InferenceParams& large_params,
                          const llm::InferenceParams& small_params);

struct FilterDecision {
  bool keep = false;
  std::string reason;  // empty when kept
};

// Keep iff the chosen completion parsed and matches the synthetic label.
FilterDecision agreement_verify(const PreferenceTuple& tuple);

// Few-shot examples embedded in the judge prompt; a JSON array.
Json default_judge_examples();
Json load_judge_examples(const std::filesystem::path& path);

std::string build_judge_prompt(const ClassificationPrompt& prompt, std::string_view response_a,
                               std::string_view response_b, const Json& examples);

enum class JudgeSlot { response_a, response_b };
// Accepts RESPONSE_A / RESPONSE_B (case-insensitive, optionally quoted, after
// an optional think block, or as {"best_response": ...}).
std::optional<JudgeSlot> parse_judge_answer(std::string_view raw);

struct JudgeSetup {
  llm::ChatClient* judge1 = nullptr;
  llm::ChatClient* judge2 = nullptr;
  llm::InferenceParams params1;
  llm::InferenceParams params2;
  Json examples = default_judge_examples();
};

struct ConsensusResult {
  FilterDecision decision;
  PresentationOrder order = PresentationOrder::chosen_first;
  JudgePick judge1 = JudgePick::invalid;
  JudgePick judge2 = JudgePick::invalid;
};

// Both judges see the completions in one rng-drawn order, never labelled.
// Keep iff both pick the chosen completion. Throws std::invalid_argument if
// the judges are not two distinct clients.
ConsensusResult consensus_filter(const PreferenceTuple& tuple, const JudgeSetup& judges, Rng& rng);
ConsensusResult consensus_filter(const PreferenceTuple& tuple, const JudgeSetup& judges,
                                 PresentationOrder order);

struct PairStageResult {
  std::vector<PreferenceTuple> tuples;  // every generated tuple, audit filled
  std::size_t skipped_large = 0;
  std::size_t skipped_small = 0;
  std::size_t agreement_passed = 0;
  std::size_t rejected_unparseable = 0;

  Json stats_json() const;
};

// generate_pair + agreement_verify over all triplets.
PairStageResult build_pairs(const std::vector<claims::ClaimTriplet>& triplets,
                            llm::ChatClient& large, llm::ChatClient& small,
                            const llm::InferenceParams& large_params,
                            const llm::InferenceParams& small_params, std::size_t max_inflight);

struct ConsensusStageStats {
  std::size_t considered = 0;
  std::size_t kept = 0;
  std::size_t judges_disagree = 0;
  std::size_t picked_rejected = 0;
  std::size_t invalid_judge_output = 0;
  std::size_t judge_unavailable = 0;
  bool skipped = false;

  Json to_json() const;
};

// Runs the consensus filter on every tuple that passed agreement and updates
// its audit in place. With `enabled == false` tuples pass through with
// consensus_skipped set.
ConsensusStageStats run_consensus(std::vector<PreferenceTuple>& tuples, const JudgeSetup& judges,
                                  Rng& rng, std::size_t max_inflight, bool enabled = true);

void write_tuples(const std::filesystem::path& path, const std::vector<PreferenceTuple>& tuples);
std::vector<PreferenceTuple> read_tuples(const std::filesystem::path& path);

// One line per tuple: {"prompt", "chosen": [{"role": "assistant", "content"}],
// "rejected": [...]}. Throws std::logic_error if a tuple is not exportable.
// Returns the number of records written.
std::size_t export_preference_dataset(const std::vector<PreferenceTuple>& tuples,
                                      const std::filesystem::path& path);

// Sidecar keyed by doc_id with every filter decision and judge pick.
void write_audit(const std::vector<PreferenceTuple>& tuples, const std::filesystem::path& path);

struct PreferenceRecord {
  std::string prompt;
  llm::ChatMessage chosen;
  llm::ChatMessage rejected;
};

// Strict reader for the export layout; throws std::runtime_error on any
// deviation.
std::vector<PreferenceRecord> read_preference_dataset(const std::filesystem::path& path);

}  // namespace claimcheck::prefs

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "claimcheck/jsonl.hpp"
#include "claimcheck/labels.hpp"
#include "claimcheck/llm.hpp"
#include "claimcheck/random.hpp"

namespace claimcheck::claims {

class Claim {
 public:
  Claim() = default;
  Claim(std::string text, ClaimKind kind);
  // Throws std::invalid_argument when label and subtype disagree.
  Claim(std::string text, Label label, Subtype subtype);

  const std::string& text() const { return text_; }
  Label label() const { return label_; }
  Subtype subtype() const { return subtype_; }

 private:
  std::string text_;
  Label label_ = Label::grounded;
  Subtype subtype_ = Subtype::none;
};

struct ClaimTriplet {
  std::string doc_id;
  std::string document_text;
  Claim claim;
  ClaimKind generation_prompt_kind = ClaimKind::grounded;

  Json to_json() const;
  // Throws std::invalid_argument when kind, label and subtype disagree.
  static ClaimTriplet from_json(const Json& j);
};

struct QuotaFractions {
  double grounded = 0.5;
  double intrinsic = 0.25;
  double extrinsic = 0.25;

  // Throws std::invalid_argument unless all are >= 0 and they sum to 1.
  void validate() const;
};

struct QuotaCounts {
  std::size_t grounded = 0;
  std::size_t intrinsic = 0;
  std::size_t extrinsic = 0;
};

// ceil(n * grounded) grounded; the remainder split between intrinsic and
// extrinsic in proportion, intrinsic taking the odd one.
QuotaCounts quota_counts(std::size_t n, const QuotaFractions& fractions = {});

// Kinds for n documents in a seeded random order.
std::vector<ClaimKind> assign_quota(std::size_t n, Rng& rng, const QuotaFractions& fractions = {});

const std::array<std::string, 3>& claim_instructions(ClaimKind kind);

// Structured JSON prompt with the document as context and an empty answer
// slot. Byte-stable for fixed input.
std::string build_claim_prompt(std::string_view document_text, ClaimKind kind);

// Extracts a single claim from a model response or std::nullopt when the
// response is empty, spans several lines, exceeds `max_sentences`, or echoes
// the instructions.
std::optional<std::string> clean_claim_response(std::string_view raw, std::size_t max_sentences = 3);

enum class ClaimStatus { ok, client_error, invalid_output };
std::string_view to_string(ClaimStatus s);

struct ClaimOutcome {
  ClaimStatus status = ClaimStatus::ok;
  std::optional<ClaimTriplet> triplet;
  int requests = 0;
};

// One retry on invalid output; client failures (after the client's own
// retries) are not retried again.
ClaimOutcome generate_claim(const corpus::Document& doc, ClaimKind kind, llm::ChatClient& client,
                            const llm::InferenceParams& params);

struct ClaimStageResult {
  std::vector<ClaimTriplet> triplets;
  std::array<std::size_t, 3> assigned{};  // by ClaimKind
  std::array<std::size_t, 3> skipped{};   // by ClaimKind
  std::size_t client_errors = 0;
  std::size_t invalid_outputs = 0;

  Json stats_json() const;
};

ClaimStageResult generate_claims(const std::vector<corpus::Document>& docs, Rng& rng,
                                 llm::ChatClient& client, const llm::InferenceParams& params,
                                 std::size_t max_inflight, const QuotaFractions& fractions = {});

void write_triplets(const std::filesystem::path& path, const std::vector<ClaimTriplet>& triplets);
std::vector<ClaimTriplet> read_triplets(const std::filesystem::path& path);

}  // namespace claimcheck::claims

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "claimcheck/corpus.hpp"
#include "claimcheck/digest.hpp"
#include "claimcheck/jsonl.hpp"

namespace claimcheck::curation {

using corpus::Document;

// Case-insensitive whole-word term list. Terms may span several words.
class UnsafeWordlist {
 public:
  // Throws std::invalid_argument if no usable term remains.
  explicit UnsafeWordlist(std::vector<std::string> terms);

  // One term per line; blank lines and '#' comments ignored. Throws
  // std::runtime_error if the file is missing and std::invalid_argument if
  // it holds no terms.
  static UnsafeWordlist load(const std::filesystem::path& path);

  bool matches(std::string_view text) const;
  std::size_t size() const { return terms_.size(); }

 private:
  std::vector<std::string> terms_;  // lowercased
};

bool contains_unsafe(const Document& doc, const UnsafeWordlist& wordlist);

enum class QualityRule : std::uint8_t {
  min_sentences = 0,
  terminal_punctuation = 1,
  boilerplate = 2,
  long_token = 3,
};
inline constexpr std::array<QualityRule, 4> kQualityRules = {
    QualityRule::min_sentences, QualityRule::terminal_punctuation, QualityRule::boilerplate,
    QualityRule::long_token};

std::string_view to_string(QualityRule rule);

std::vector<std::string> default_boilerplate_phrases();

struct QualityConfig {
  std::size_t min_sentences = 5;
  std::size_t max_token_chars = 1000;
  // Lines shorter than this (in words) are exempt from the punctuation rule.
  std::size_t min_line_words = 3;
  std::vector<std::string> boilerplate_phrases = default_boilerplate_phrases();
};

class QualityVerdict {
 public:
  void fail(QualityRule rule) { mask_ |= static_cast<std::uint8_t>(1u << static_cast<int>(rule)); }
  bool passed() const { return mask_ == 0; }
  bool failed(QualityRule rule) const { return (mask_ >> static_cast<int>(rule)) & 1u; }
  // First failing rule in declaration order; used for report attribution.
  std::optional<QualityRule> reason() const;

 private:
  std::uint8_t mask_ = 0;
};

// Every rule is evaluated; the verdict records all failures.
QualityVerdict check_quality(const Document& doc, const QualityConfig& config = {});

bool min_words(const Document& doc, std::size_t k = 50);

struct SplitOptions {
  // Treat "J." style initials as abbreviations.
  bool single_letter_abbreviations = true;
};

// Rule-based sentence splitter. Splits after a run of . ! ? (plus any
// closing quotes/brackets) that is followed by whitespace and then a
// character that is not a lowercase letter, unless the token before the
// period is a known abbreviation. Newlines always end a sentence. Returned
// sentences are trimmed and never empty.
std::vector<std::string> split_sentences(std::string_view text, const SplitOptions& options = {});

// Lowercase, collapse whitespace, drop trailing terminal punctuation.
std::string normalize_sentence(std::string_view sentence);

struct Shingle {
  std::string key;
  std::string origin_doc;
};

// All windows of `size` consecutive normalized sentences. Empty when the
// document has fewer than `size` sentences.
std::vector<Shingle> shingles(const Document& doc, std::size_t size = 3,
                              const SplitOptions& options = {});

// First-wins streaming near-duplicate filter keyed on sentence shingles.
class NearDuplicateIndex {
 public:
  explicit NearDuplicateIndex(std::size_t shingle_size = 3, SplitOptions options = {});

  // Returns true and records the document's shingles if none of them have
  // been seen in a previously admitted document.
  bool admit(const Document& doc);
  std::size_t shingle_count() const { return seen_.size(); }

 private:
  std::size_t shingle_size_;
  SplitOptions options_;
  std::unordered_set<Digest128, Digest128Hash> seen_;
};

std::vector<Document> near_dup_filter(std::vector<Document> docs, std::size_t shingle_size = 3,
                                      std::size_t* dropped = nullptr, const SplitOptions& options = {});

struct CurationReport {
  std::size_t input_count = 0;
  std::size_t dropped_unsafe = 0;
  std::array<std::size_t, kQualityRules.size()> dropped_quality_by_rule{};
  std::size_t dropped_short = 0;
  std::size_t dropped_near_dup = 0;
  std::size_t retained = 0;

  std::size_t dropped_quality() const;
  bool reconciles() const;
  Json to_json() const;
};

struct CurationOptions {
  QualityConfig quality;
  std::size_t min_words = 50;
  std::size_t shingle_size = 3;
  SplitOptions split;
  std::size_t workers = 1;
};

struct CurationResult {
  std::vector<Document> documents;
  CurationReport report;
};

// unsafe -> quality -> length -> near-duplicate; survivors become clean.
CurationResult curate(std::vector<Document> docs, const UnsafeWordlist& wordlist,
                      const CurationOptions& options = {});

}  // namespace claimcheck::curation

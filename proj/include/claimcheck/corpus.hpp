// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "claimcheck/jsonl.hpp"
#include "claimcheck/random.hpp"

namespace claimcheck::corpus {

enum class Stage { raw = 0, agnostic = 1, clean = 2, reformed = 3 };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);

class Document {
 public:
  Document() = default;
  Document(std::string id, std::string text, double language_score = 1.0,
           std::optional<std::string> source_url = std::nullopt);

  const std::string& id() const { return id_; }
  const std::string& text() const { return text_; }
  double language_score() const { return language_score_; }
  const std::optional<std::string>& source_url() const { return source_url_; }
  std::size_t word_count() const { return word_count_; }
  Stage stage() const { return stage_; }

  // Replaces the text and recomputes word_count.
  void set_text(std::string text);

  // Moves the document forward in the pipeline. Throws std::logic_error on a
  // backwards or repeated transition, or when the text is empty.
  void advance(Stage next);

  Json to_json() const;
  static Document from_json(const Json& j);

 private:
  std::string id_;
  std::string text_;
  double language_score_ = 1.0;
  std::optional<std::string> source_url_;
  std::size_t word_count_ = 0;
  Stage stage_ = Stage::raw;
};

// Input field names for line-delimited corpus records.
struct CorpusSchema {
  std::string id_field = "id";
  std::string text_field = "text";
  std::string language_score_field = "language_score";
  std::string url_field = "url";

  static CorpusSchema from_json(const Json& j);
};

struct LoadStats {
  std::size_t read = 0;
  std::size_t skipped = 0;
};

// Streams raw documents in file order. Malformed records are skipped and
// counted. Throws std::runtime_error if the file cannot be read.
LoadStats load_corpus(const std::filesystem::path& path, const CorpusSchema& schema,
                      const std::function<void(Document)>& sink);
std::vector<Document> load_corpus(const std::filesystem::path& path, const CorpusSchema& schema,
                                  LoadStats* stats = nullptr);

bool gate_language(const Document& doc, double threshold = 0.95);

// First occurrence of each trimmed text survives, order preserved.
std::vector<Document> exact_dedup(std::vector<Document> docs, std::size_t* dropped = nullptr);

class SampleSizeError : public std::runtime_error {
 public:
  SampleSizeError(std::size_t requested, std::size_t available);
  std::size_t requested() const { return requested_; }
  std::size_t available() const { return available_; }

 private:
  std::size_t requested_;
  std::size_t available_;
};

// Seeded reservoir sampler; keeps survivors in their input order.
class ReservoirSampler {
 public:
  ReservoirSampler(std::size_t capacity, std::uint64_t seed);

  void offer(Document doc);
  std::size_t seen() const { return seen_; }
  std::vector<Document> take() &&;

 private:
  struct Slot {
    std::size_t position;
    Document doc;
  };
  std::size_t capacity_;
  std::size_t seen_ = 0;
  Rng rng_;
  std::vector<Slot> slots_;
};

// Exactly n documents drawn without replacement, stage set to agnostic.
// Throws SampleSizeError when n exceeds the input size.
std::vector<Document> sample_uniform(std::vector<Document> docs, std::size_t n, std::uint64_t seed);

struct IngestOptions {
  CorpusSchema schema;
  double language_threshold = 0.95;
  std::size_t sample_size = 250000;
  std::uint64_t seed = 0;
};

struct IngestStats {
  std::size_t read = 0;
  std::size_t skipped_malformed = 0;
  std::size_t rejected_language = 0;
  std::size_t dropped_duplicates = 0;
  std::size_t pool = 0;
  std::size_t sampled = 0;

  Json to_json() const;
};

struct IngestResult {
  std::vector<Document> documents;
  IngestStats stats;
};

// load -> language gate -> exact dedup -> uniform sample.
IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options);

void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs);
std::vector<Document> read_documents(const std::filesystem::path& path);

}  // namespace claimcheck::corpus

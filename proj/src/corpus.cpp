// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/corpus.hpp"

#include <algorithm>
#include <unordered_map>

#include "claimcheck/digest.hpp"
#include "claimcheck/text.hpp"

namespace claimcheck::corpus {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::raw: return "raw";
    case Stage::agnostic: return "agnostic";
    case Stage::clean: return "clean";
    case Stage::reformed: return "reformed";
  }
  return "raw";
}

Stage parse_stage(std::string_view s) {
  if (s == "raw") return Stage::raw;
  if (s == "agnostic") return Stage::agnostic;
  if (s == "clean") return Stage::clean;
  if (s == "reformed") return Stage::reformed;
  throw std::invalid_argument("unknown document stage: " + std::string(s));
}

Document::Document(std::string id, std::string text, double language_score,
                   std::optional<std::string> source_url)
    : id_(std::move(id)), language_score_(language_score), source_url_(std::move(source_url)) {
  set_text(std::move(text));
}

void Document::set_text(std::string text) {
  text_ = std::move(text);
  word_count_ = text::word_count(text_);
}

void Document::advance(Stage next) {
  if (static_cast<int>(next) <= static_cast<int>(stage_)) {
    throw std::logic_error("document " + id_ + ": stage cannot move from " +
                           std::string(to_string(stage_)) + " to " + std::string(to_string(next)));
  }
  if (text::trim(text_).empty()) {
    throw std::logic_error("document " + id_ + ": empty text past the raw stage");
  }
  stage_ = next;
}

Json Document::to_json() const {
  Json j;
  j["id"] = id_;
  j["text"] = text_;
  j["language_score"] = language_score_;
  if (source_url_) j["url"] = *source_url_;
  j["word_count"] = word_count_;
  j["stage"] = std::string(to_string(stage_));
  return j;
}

Document Document::from_json(const Json& j) {
  Document d(j.at("id").get<std::string>(), j.at("text").get<std::string>(),
             j.value("language_score", 1.0),
             j.contains("url") ? std::optional<std::string>(j.at("url").get<std::string>())
                               : std::nullopt);
  d.stage_ = parse_stage(j.value("stage", std::string("raw")));
  return d;
}

CorpusSchema CorpusSchema::from_json(const Json& j) {
  CorpusSchema s;
  s.id_field = j.value("id", s.id_field);
  s.text_field = j.value("text", s.text_field);
  s.language_score_field = j.value("language_score", s.language_score_field);
  s.url_field = j.value("url", s.url_field);
  return s;
}

namespace {

std::optional<Document> record_to_document(const Json& rec, const CorpusSchema& schema,
                                           std::size_t line_no) {
  if (!rec.is_object()) return std::nullopt;
  const auto text_it = rec.find(schema.text_field);
  if (text_it == rec.end() || !text_it->is_string()) return std::nullopt;
  std::string body = text_it->get<std::string>();
  if (text::trim(body).empty()) return std::nullopt;

  std::string id = "line-" + std::to_string(line_no);
  if (const auto it = rec.find(schema.id_field); it != rec.end()) {
    if (it->is_string()) {
      id = it->get<std::string>();
    } else if (it->is_number_integer()) {
      id = std::to_string(it->get<long long>());
    } else if (!it->is_null()) {
      return std::nullopt;
    }
  }

  double score = 1.0;
  if (const auto it = rec.find(schema.language_score_field); it != rec.end() && !it->is_null()) {
    if (!it->is_number()) return std::nullopt;
    score = it->get<double>();
  }

  std::optional<std::string> url;
  if (const auto it = rec.find(schema.url_field); it != rec.end() && it->is_string()) {
    url = it->get<std::string>();
  }
  return Document(std::move(id), std::move(body), score, std::move(url));
}

}  // namespace

LoadStats load_corpus(const std::filesystem::path& path, const CorpusSchema& schema,
                      const std::function<void(Document)>& sink) {
  LoadStats stats;
  for_each_jsonl(
      path,
      [&](std::size_t line_no, Json rec) {
        ++stats.read;
        auto doc = record_to_document(rec, schema, line_no);
        if (!doc) {
          ++stats.skipped;
          return;
        }
        sink(std::move(*doc));
      },
      [&](std::size_t, std::string_view) {
        ++stats.read;
        ++stats.skipped;
      });
  return stats;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, const CorpusSchema& schema,
                                  LoadStats* stats) {
  std::vector<Document> docs;
  const LoadStats s = load_corpus(path, schema, [&](Document d) { docs.push_back(std::move(d)); });
  if (stats) *stats = s;
  return docs;
}

bool gate_language(const Document& doc, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("language threshold must lie in [0, 1]");
  }
  return doc.language_score() >= threshold;
}

std::vector<Document> exact_dedup(std::vector<Document> docs, std::size_t* dropped) {
  std::unordered_map<Digest128, std::vector<std::size_t>, Digest128Hash> seen;
  std::vector<Document> kept;
  kept.reserve(docs.size());
  std::size_t drops = 0;
  for (auto& doc : docs) {
    const std::string_view key = text::trim(doc.text());
    auto& bucket = seen[content_hash128(key)];
    const bool duplicate = std::any_of(bucket.begin(), bucket.end(), [&](std::size_t k) {
      return text::trim(kept[k].text()) == key;
    });
    if (duplicate) {
      ++drops;
      continue;
    }
    bucket.push_back(kept.size());
    kept.push_back(std::move(doc));
  }
  if (dropped) *dropped = drops;
  return kept;
}

SampleSizeError::SampleSizeError(std::size_t requested, std::size_t available)
    : std::runtime_error("cannot sample " + std::to_string(requested) + " documents from a pool of " +
                         std::to_string(available)),
      requested_(requested),
      available_(available) {}

ReservoirSampler::ReservoirSampler(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  slots_.reserve(capacity);
}

void ReservoirSampler::offer(Document doc) {
  const std::size_t position = seen_++;
  if (slots_.size() < capacity_) {
    slots_.push_back({position, std::move(doc)});
    return;
  }
  const auto j = rng_.uniform_index(seen_);
  if (j < capacity_) slots_[j] = {position, std::move(doc)};
}

std::vector<Document> ReservoirSampler::take() && {
  std::sort(slots_.begin(), slots_.end(),
            [](const Slot& a, const Slot& b) { return a.position < b.position; });
  std::vector<Document> out;
  out.reserve(slots_.size());
  for (auto& s : slots_) out.push_back(std::move(s.doc));
  return out;
}

std::vector<Document> sample_uniform(std::vector<Document> docs, std::size_t n, std::uint64_t seed) {
  if (n > docs.size()) throw SampleSizeError(n, docs.size());
  ReservoirSampler sampler(n, seed);
  for (auto& d : docs) sampler.offer(std::move(d));
  auto out = std::move(sampler).take();
  for (auto& d : out) {
    if (d.stage() == Stage::raw) d.advance(Stage::agnostic);
  }
  return out;
}

Json IngestStats::to_json() const {
  return Json{{"read", read},
              {"skipped_malformed", skipped_malformed},
              {"rejected_language", rejected_language},
              {"dropped_duplicates", dropped_duplicates},
              {"pool", pool},
              {"sampled", sampled}};
}

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options) {
  IngestResult result;
  std::vector<Document> gated;
  const LoadStats load = load_corpus(path, options.schema, [&](Document d) {
    if (gate_language(d, options.language_threshold)) {
      gated.push_back(std::move(d));
    } else {
      ++result.stats.rejected_language;
    }
  });
  result.stats.read = load.read;
  result.stats.skipped_malformed = load.skipped;

  auto unique = exact_dedup(std::move(gated), &result.stats.dropped_duplicates);
  result.stats.pool = unique.size();
  result.documents = sample_uniform(std::move(unique), options.sample_size, options.seed);
  result.stats.sampled = result.documents.size();
  return result;
}

void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs) {
  AtomicFileWriter w(path);
  for (const auto& d : docs) w.write_line(dump_compact(d.to_json()));
  w.commit();
}

std::vector<Document> read_documents(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_jsonl(
      path, [&](std::size_t, Json rec) { docs.push_back(Document::from_json(rec)); },
      [&](std::size_t line_no, std::string_view err) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " +
                                 std::string(err));
      });
  return docs;
}

}  // namespace claimcheck::corpus

#include <doctest.h>

#include <set>

#include "claimcheck/corpus.hpp"
#include "claimcheck/random.hpp"
#include "claimcheck/text.hpp"
#include "support.hpp"

using namespace claimcheck;
using corpus::Document;
using corpus::Stage;

namespace {

std::vector<Document> docs_from(const std::vector<std::string>& texts) {
  std::vector<Document> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.emplace_back("d" + std::to_string(i), texts[i]);
  return out;
}

std::vector<std::string> ids(const std::vector<Document>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.id());
  return out;
}

// Keep a document iff no earlier kept document has the same trimmed text.
std::vector<std::string> dedup_oracle(const std::vector<Document>& docs) {
  std::vector<const Document*> kept;
  for (const auto& d : docs) {
    bool dup = false;
    for (const auto* k : kept) {
      if (text::trim(k->text()) == text::trim(d.text())) dup = true;
    }
    if (!dup) kept.push_back(&d);
  }
  std::vector<std::string> out;
  for (const auto* k : kept) out.push_back(k->id());
  return out;
}

}  // namespace

TEST_CASE("document word count and stage transitions") {
  Document d("x", "one  two\nthree");
  CHECK(d.word_count() == 3);
  CHECK(d.stage() == Stage::raw);
  d.set_text("a b");
  CHECK(d.word_count() == 2);
  d.advance(Stage::agnostic);
  d.advance(Stage::reformed);
  CHECK(d.stage() == Stage::reformed);
  CHECK_THROWS_AS(d.advance(Stage::clean), std::logic_error);
  CHECK_THROWS_AS(d.advance(Stage::reformed), std::logic_error);
  Document empty("e", "");
  CHECK_THROWS_AS(empty.advance(Stage::agnostic), std::logic_error);
}

TEST_CASE("document json round trip") {
  Document d("id-1", "Some text here.", 0.97, std::string("https://example.org"));
  d.advance(Stage::agnostic);
  const auto back = Document::from_json(d.to_json());
  CHECK(back.id() == "id-1");
  CHECK(back.text() == d.text());
  CHECK(back.language_score() == doctest::Approx(0.97));
  CHECK(back.source_url() == d.source_url());
  CHECK(back.stage() == Stage::agnostic);
  CHECK(back.word_count() == 3);
}

TEST_CASE("load_corpus") {
  cctest::TempDir dir;
  corpus::CorpusSchema schema;

  SUBCASE("three well-formed records") {
    cctest::write_file(dir / "c.jsonl",
                       "{\"id\":\"a\",\"text\":\"x y\",\"language_score\":0.99}\n"
                       "{\"id\":\"b\",\"text\":\"z\",\"language_score\":0.5,\"url\":\"u\"}\n"
                       "{\"id\":\"c\",\"text\":\"w\"}\n");
    corpus::LoadStats stats;
    const auto docs = corpus::load_corpus(dir / "c.jsonl", schema, &stats);
    CHECK(docs.size() == 3);
    CHECK(stats.skipped == 0);
    CHECK(ids(docs) == std::vector<std::string>{"a", "b", "c"});
    CHECK(docs[2].language_score() == 1.0);
    CHECK(docs[1].source_url() == std::optional<std::string>("u"));
    for (const auto& d : docs) CHECK(d.stage() == Stage::raw);
  }
  SUBCASE("record lacking text is skipped") {
    cctest::write_file(dir / "c.jsonl",
                       "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\"}\n{\"id\":\"c\",\"text\":\"y\"}\n");
    corpus::LoadStats stats;
    const auto docs = corpus::load_corpus(dir / "c.jsonl", schema, &stats);
    CHECK(docs.size() == 2);
    CHECK(stats.skipped == 1);
  }
  SUBCASE("malformed json lines are skipped") {
    cctest::write_file(dir / "c.jsonl", "{\"text\":\"x\"}\n{broken\n[1,2]\n");
    corpus::LoadStats stats;
    const auto docs = corpus::load_corpus(dir / "c.jsonl", schema, &stats);
    CHECK(docs.size() == 1);
    CHECK(stats.skipped == 2);
  }
  SUBCASE("empty file") {
    cctest::write_file(dir / "c.jsonl", "");
    corpus::LoadStats stats;
    CHECK(corpus::load_corpus(dir / "c.jsonl", schema, &stats).empty());
    CHECK(stats.skipped == 0);
  }
  SUBCASE("custom field mapping") {
    cctest::write_file(dir / "c.jsonl", "{\"key\":\"k1\",\"body\":\"hello world\",\"lang\":0.9}\n");
    const auto custom = corpus::CorpusSchema::from_json(
        Json{{"id", "key"}, {"text", "body"}, {"language_score", "lang"}});
    const auto docs = corpus::load_corpus(dir / "c.jsonl", custom);
    REQUIRE(docs.size() == 1);
    CHECK(docs[0].id() == "k1");
    CHECK(docs[0].language_score() == doctest::Approx(0.9));
  }
  SUBCASE("unreadable file is fatal") {
    CHECK_THROWS(corpus::load_corpus(dir / "missing.jsonl", schema));
  }
}

TEST_CASE("gate_language") {
  CHECK(corpus::gate_language(Document("a", "t", 0.95), 0.95));
  CHECK_FALSE(corpus::gate_language(Document("a", "t", 0.949), 0.95));
  CHECK(corpus::gate_language(Document("a", "t", 1.0), 0.0));
  CHECK(corpus::gate_language(Document("a", "t", 0.96)));
  CHECK_THROWS_AS(corpus::gate_language(Document("a", "t"), 1.5), std::invalid_argument);
}

TEST_CASE("gate_language is monotone in the threshold") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Document d("x", "t", rng.uniform01());
    const double lo = rng.uniform01();
    const double hi = lo + (1.0 - lo) * rng.uniform01();
    if (corpus::gate_language(d, hi)) CHECK(corpus::gate_language(d, lo));
  }
}

TEST_CASE("exact_dedup examples") {
  auto out = corpus::exact_dedup(docs_from({"A", "B", "A"}));
  CHECK(ids(out) == std::vector<std::string>{"d0", "d1"});
  CHECK(corpus::exact_dedup(docs_from({"A"})).size() == 1);
  std::size_t dropped = 0;
  out = corpus::exact_dedup(docs_from({" A\n", "A", "a"}), &dropped);
  CHECK(ids(out) == std::vector<std::string>{"d0", "d2"});
  CHECK(dropped == 1);
}

TEST_CASE("exact_dedup matches the pairwise oracle with planted duplicates") {
  Rng rng(2024);
  for (int round = 0; round < 20; ++round) {
    std::vector<std::string> texts;
    for (int i = 0; i < 90; ++i) {
      std::string t;
      const auto words = 3 + rng.uniform_index(10);
      for (std::uint64_t w = 0; w < words; ++w) t += "w" + std::to_string(rng.uniform_index(1000000)) + " ";
      texts.push_back(t);
    }
    // Plant 10 byte duplicates of earlier texts, some with extra padding.
    for (int i = 0; i < 10; ++i) {
      const auto src = rng.uniform_index(texts.size());
      texts.insert(texts.begin() + static_cast<long>(src + 1 + rng.uniform_index(texts.size() - src)),
                   (i % 2 ? "  " : "") + texts[src]);
    }
    const auto docs = docs_from(texts);
    std::size_t dropped = 0;
    const auto out = corpus::exact_dedup(docs, &dropped);
    CHECK(ids(out) == dedup_oracle(docs));
    CHECK(out.size() + dropped == docs.size());
    if (round == 0) CHECK(out.size() == 90);
    std::set<std::string> unique;
    for (const auto& d : out) unique.insert(std::string(text::trim(d.text())));
    CHECK(unique.size() == out.size());
  }
}

TEST_CASE("sample_uniform") {
  const auto docs = docs_from({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});

  SUBCASE("full sample keeps input order") {
    const auto out = corpus::sample_uniform(docs, docs.size(), 5);
    CHECK(ids(out) == ids(docs));
    for (const auto& d : out) CHECK(d.stage() == Stage::agnostic);
  }
  SUBCASE("deterministic under a fixed seed") {
    const auto a = corpus::sample_uniform(docs, 4, 99);
    const auto b = corpus::sample_uniform(docs, 4, 99);
    CHECK(ids(a) == ids(b));
    CHECK(a.size() == 4);
    const auto a_ids = ids(a);
    const std::set<std::string> unique(a_ids.begin(), a_ids.end());
    CHECK(unique.size() == 4);
  }
  SUBCASE("oversized request reports counts") {
    try {
      corpus::sample_uniform(docs, 11, 1);
      FAIL("expected SampleSizeError");
    } catch (const corpus::SampleSizeError& e) {
      CHECK(e.requested() == 11);
      CHECK(e.available() == 10);
    }
  }
  SUBCASE("every document is equally likely") {
    std::vector<int> hits(docs.size(), 0);
    for (std::uint64_t seed = 0; seed < 4000; ++seed) {
      for (const auto& d : corpus::sample_uniform(docs, 3, seed)) hits[std::stoi(d.id().substr(1))]++;
    }
    // Expected 1200 each; binomial sd ~29.
    for (int h : hits) CHECK(std::abs(h - 1200) < 150);
  }
}

TEST_CASE("ingest gates, deduplicates, then samples") {
  cctest::TempDir dir;
  cctest::write_file(dir / "c.jsonl",
                     "{\"id\":\"1\",\"text\":\"alpha\",\"language_score\":0.99}\n"
                     "{\"id\":\"2\",\"text\":\"beta\",\"language_score\":0.5}\n"
                     "{\"id\":\"3\",\"text\":\"alpha\",\"language_score\":0.98}\n"
                     "{\"id\":\"4\"}\n"
                     "{\"id\":\"5\",\"text\":\"gamma\",\"language_score\":0.96}\n"
                     "{\"id\":\"6\",\"text\":\"delta\",\"language_score\":0.97}\n");
  corpus::IngestOptions o;
  o.sample_size = 2;
  o.seed = 3;
  const auto r = corpus::ingest(dir / "c.jsonl", o);
  CHECK(r.stats.read == 6);
  CHECK(r.stats.skipped_malformed == 1);
  CHECK(r.stats.rejected_language == 1);
  CHECK(r.stats.dropped_duplicates == 1);
  CHECK(r.stats.pool == 3);
  CHECK(r.stats.sampled == 2);
  CHECK(r.documents.size() == 2);

  corpus::write_documents(dir / "out.jsonl", r.documents);
  const auto back = corpus::read_documents(dir / "out.jsonl");
  CHECK(ids(back) == ids(r.documents));
  for (const auto& d : back) CHECK(d.stage() == Stage::agnostic);
}

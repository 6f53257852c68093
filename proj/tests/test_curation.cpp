#include <doctest.h>

#include <regex>

#include "claimcheck/curation.hpp"
#include "claimcheck/random.hpp"
#include "claimcheck/text.hpp"
#include "support.hpp"

using namespace claimcheck;
using namespace claimcheck::curation;

namespace {

std::string regex_escape(const std::string& s) {
  static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
  return std::regex_replace(s, special, R"(\$&)");
}

// Reference matcher: ECMAScript \b uses the same [A-Za-z0-9_] word class.
bool regex_unsafe(const std::string& text, const std::vector<std::string>& terms) {
  for (const auto& t : terms) {
    const std::regex re("\\b" + regex_escape(t) + "\\b", std::regex::icase);
    if (std::regex_search(text, re)) return true;
  }
  return false;
}

std::string sentences_text(std::size_t n, const std::string& topic) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out += "The " + topic + " report number " + std::to_string(i + 1) + " describes several calm events. ";
  }
  return out;
}

std::vector<std::string> ids(const std::vector<Document>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.id());
  return out;
}

}  // namespace

TEST_CASE("unsafe wordlist matching") {
  const UnsafeWordlist wl({"Scam", "dark web"});
  CHECK(contains_unsafe(Document("a", "what a scam this is"), wl));
  CHECK_FALSE(contains_unsafe(Document("a", "scammers everywhere"), wl));
  CHECK(contains_unsafe(Document("a", "On the DARK WEB."), wl));
  CHECK_THROWS_AS(UnsafeWordlist({}), std::invalid_argument);
  CHECK_THROWS_AS(UnsafeWordlist({"  ", ""}), std::invalid_argument);
}

TEST_CASE("unsafe wordlist file loading") {
  cctest::TempDir dir;
  cctest::write_file(dir / "w.txt", "# comment\n\nfoo\n  Bar Baz  \n");
  const auto wl = UnsafeWordlist::load(dir / "w.txt");
  CHECK(wl.size() == 2);
  CHECK(wl.matches("a bar baz b"));
  cctest::write_file(dir / "empty.txt", "# nothing\n\n");
  CHECK_THROWS_AS(UnsafeWordlist::load(dir / "empty.txt"), std::invalid_argument);
  CHECK_THROWS_AS(UnsafeWordlist::load(dir / "missing.txt"), std::runtime_error);
  CHECK_NOTHROW(UnsafeWordlist::load(std::filesystem::path(CC_SOURCE_DIR) / "data" / "unsafe_terms.txt"));
}

TEST_CASE("unsafe matching agrees with a regex word-boundary oracle on the 50-case fixture") {
  const Json fixture = Json::parse(cctest::read_file(cctest::data_path("unsafe_cases.json")));
  const auto terms = fixture.at("terms").get<std::vector<std::string>>();
  const UnsafeWordlist wl(terms);
  const auto& cases = fixture.at("cases");
  REQUIRE(cases.size() == 50);
  for (const auto& c : cases) {
    const auto text = c.at("text").get<std::string>();
    const bool expected = c.at("unsafe").get<bool>();
    CAPTURE(text);
    CHECK(regex_unsafe(text, terms) == expected);
    CHECK(wl.matches(text) == expected);
  }
}

TEST_CASE("check_quality rules") {
  SUBCASE("fewer than five sentences") {
    const auto v = check_quality(Document("a", "One is here. Two is here. Three is here. Four is here."));
    CHECK(v.failed(QualityRule::min_sentences));
    CHECK(v.reason() == QualityRule::min_sentences);
  }
  SUBCASE("lorem ipsum boilerplate") {
    const auto v = check_quality(Document("a", sentences_text(6, "weather") + "Lorem Ipsum dolor sit amet."));
    CHECK(v.failed(QualityRule::boilerplate));
    CHECK_FALSE(v.failed(QualityRule::min_sentences));
  }
  SUBCASE("cookie notice boilerplate") {
    const auto v = check_quality(Document("a", sentences_text(6, "weather") + "This website uses cookies to improve your experience."));
    CHECK(v.failed(QualityRule::boilerplate));
  }
  SUBCASE("six punctuated sentences pass") {
    const auto v = check_quality(Document("a", "Birds sing. Cats nap. Dogs bark. Fish swim. Cows graze. Bees buzz."));
    CHECK(v.passed());
    CHECK_FALSE(v.reason().has_value());
  }
  SUBCASE("token over the length cap") {
    const auto v = check_quality(Document("a", sentences_text(6, "x") + std::string(1001, 'a') + "."));
    CHECK(v.failed(QualityRule::long_token));
    CHECK(check_quality(Document("a", sentences_text(6, "x") + std::string(999, 'a') + ".")).passed());
  }
  SUBCASE("token length counts code points") {
    std::string wide;
    for (int i = 0; i < 600; ++i) wide += "é";  // 1200 bytes, 600 code points
    CHECK(check_quality(Document("a", sentences_text(6, "x") + wide + ".")).passed());
  }
  SUBCASE("unpunctuated line of three or more words") {
    const auto v = check_quality(Document("a", sentences_text(6, "x") + "\nthis line has no end"));
    CHECK(v.failed(QualityRule::terminal_punctuation));
  }
  SUBCASE("short headings are exempt and closing quotes are accepted") {
    CHECK(check_quality(Document("a", "My Heading\n" + sentences_text(5, "x") + "\nHe said \"it is done.\"")).passed());
    CHECK(check_quality(Document("a", sentences_text(5, "x") + "\n(As noted above.)")).passed());
  }
  SUBCASE("every failing rule is reported") {
    const auto v = check_quality(Document("a", "lorem ipsum dolor sit amet here\n" + std::string(1200, 'z')));
    CHECK(v.failed(QualityRule::min_sentences));
    CHECK(v.failed(QualityRule::terminal_punctuation));
    CHECK(v.failed(QualityRule::boilerplate));
    CHECK(v.failed(QualityRule::long_token));
    CHECK(v.reason() == QualityRule::min_sentences);
  }
}

TEST_CASE("check_quality rule outcomes do not depend on each other") {
  // Each rule alone, then combined: the combined mask is the union.
  const std::string base = sentences_text(6, "x");
  const Document four("a", "One is here. Two is here. Three is here. Four is here.");
  const Document boiler("b", base + "Lorem ipsum text.");
  const Document both("c", "One is here. Two is here. Three is here. Lorem ipsum here.");
  CHECK(check_quality(four).failed(QualityRule::min_sentences));
  CHECK_FALSE(check_quality(four).failed(QualityRule::boilerplate));
  CHECK(check_quality(boiler).failed(QualityRule::boilerplate));
  CHECK_FALSE(check_quality(boiler).failed(QualityRule::min_sentences));
  CHECK(check_quality(both).failed(QualityRule::min_sentences));
  CHECK(check_quality(both).failed(QualityRule::boilerplate));
}

TEST_CASE("min_words") {
  auto words = [](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += "w ";
    return Document("a", s);
  };
  CHECK_FALSE(min_words(words(49)));
  CHECK(min_words(words(50)));
  CHECK(min_words(words(0), 0));
  CHECK(min_words(Document("a", ""), 0));
}

TEST_CASE("split_sentences basics") {
  SplitOptions no_initials;
  no_initials.single_letter_abbreviations = false;
  CHECK(split_sentences("A. B. C.", no_initials) == std::vector<std::string>{"A.", "B.", "C."});
  CHECK(split_sentences("A. B. C.").size() == 1);
  CHECK(split_sentences("no terminal punctuation here") ==
        std::vector<std::string>{"no terminal punctuation here"});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   \n  ").empty());
  CHECK(split_sentences("Hi.\n\nThere") == std::vector<std::string>{"Hi.", "There"});
  CHECK(split_sentences("It is e.g. fine. Next one.") ==
        std::vector<std::string>{"It is e.g. fine.", "Next one."});
}

TEST_CASE("split_sentences matches the hand-labelled golden split") {
  const Json golden = Json::parse(cctest::read_file(cctest::data_path("split_golden.json")));
  const auto expected = golden.at("sentences").get<std::vector<std::string>>();
  REQUIRE(expected.size() == 30);
  const auto got = split_sentences(golden.at("text").get<std::string>());
  CHECK(got == expected);
}

TEST_CASE("normalize_sentence") {
  CHECK(normalize_sentence("  The  Cat\tSat.  ") == "the cat sat");
  CHECK(normalize_sentence("Really?!\"") == "really");
  CHECK(normalize_sentence("THE CAT SAT!") == normalize_sentence("the cat sat."));
}

TEST_CASE("shingles") {
  const Document d("d", "One a. Two b. Three c. Four d.");
  const auto s = shingles(d, 3);
  REQUIRE(s.size() == 2);
  CHECK(s[0].key == "one a\ntwo b\nthree c");
  CHECK(s[1].origin_doc == "d");
  CHECK(shingles(Document("e", "Only one. And two."), 3).empty());
}

TEST_CASE("near_dup_filter examples") {
  const Document a("A", "Alpha one. Beta two. Gamma three. Delta four. Epsilon five.");
  const Document b3("B", "Zeta six. Beta two. Gamma three. Delta four. Eta seven.");
  const Document b2("B", "Zeta six. Beta two. Gamma three. Eta seven. Theta eight.");
  std::size_t dropped = 0;
  CHECK(ids(near_dup_filter({a, b3}, 3, &dropped)) == std::vector<std::string>{"A"});
  CHECK(dropped == 1);
  CHECK(ids(near_dup_filter({a, b2}, 3, &dropped)) == std::vector<std::string>{"A", "B"});
  CHECK(dropped == 0);
  // Formatting differences do not hide a duplicate.
  const Document b_fmt("B", "Omega nine. BETA   TWO! GAMMA three? DELTA  four.");
  CHECK(ids(near_dup_filter({a, b_fmt}, 3)) == std::vector<std::string>{"A"});
  // A document repeating its own window is not a duplicate of itself.
  const Document self("S", "One x. Two x. Three x. One x. Two x. Three x.");
  CHECK(near_dup_filter({self}, 3).size() == 1);
}

TEST_CASE("near_dup_filter equals the pairwise window oracle on random corpora") {
  Rng rng(77);
  const std::vector<std::string> renderings = {"plain", "upper", "spaced", "bang"};
  for (int corpus_no = 0; corpus_no < 60; ++corpus_no) {
    const std::size_t pool = 12 + rng.uniform_index(40);
    const std::size_t n_docs = 1 + rng.uniform_index(200);
    // Each document is a list of base-sentence ids.
    std::vector<std::vector<std::size_t>> bases;
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::vector<std::size_t> seq;
      const std::size_t len = 1 + rng.uniform_index(8);
      for (std::size_t k = 0; k < len; ++k) seq.push_back(rng.uniform_index(pool));
      // Plant overlaps with an earlier document: a 3-window or a 2-window.
      if (d > 0 && rng.uniform01() < 0.4) {
        const auto& src = bases[rng.uniform_index(d)];
        const std::size_t w = rng.coin() ? 3 : 2;
        if (src.size() >= w) {
          const std::size_t off = rng.uniform_index(src.size() - w + 1);
          const std::size_t at = rng.uniform_index(seq.size() + 1);
          seq.insert(seq.begin() + static_cast<long>(at), src.begin() + static_cast<long>(off),
                     src.begin() + static_cast<long>(off + w));
        }
      }
      bases.push_back(seq);
    }
    std::vector<Document> docs;
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::string text;
      for (std::size_t b : bases[d]) {
        std::string s = "Base sentence " + std::to_string(b) + " goes here";
        switch (rng.uniform_index(renderings.size())) {
          case 0: s += "."; break;
          case 1: s = text::to_lower_ascii(s); s[0] = 'B'; s += "."; break;
          case 2: s.insert(4, "   "); s += "."; break;
          default: s += "!"; break;
        }
        text += s + (rng.coin() ? " " : "\n");
      }
      docs.emplace_back("doc" + std::to_string(d), text);
    }

    // Oracle: compare every 3-window of the candidate with every 3-window of
    // each previously retained document, directly on base ids.
    std::vector<std::size_t> kept;
    for (std::size_t d = 0; d < n_docs; ++d) {
      bool dup = false;
      const auto& cand = bases[d];
      for (std::size_t k : kept) {
        const auto& prev = bases[k];
        for (std::size_t i = 0; i + 3 <= cand.size() && !dup; ++i) {
          for (std::size_t j = 0; j + 3 <= prev.size() && !dup; ++j) {
            dup = cand[i] == prev[j] && cand[i + 1] == prev[j + 1] && cand[i + 2] == prev[j + 2];
          }
        }
        if (dup) break;
      }
      if (!dup) kept.push_back(d);
    }
    std::vector<std::string> expected;
    for (std::size_t k : kept) expected.push_back("doc" + std::to_string(k));

    std::size_t dropped = 0;
    const auto got = near_dup_filter(docs, 3, &dropped);
    CAPTURE(corpus_no);
    CHECK(ids(got) == expected);
    CHECK(dropped + got.size() == docs.size());
  }
}

TEST_CASE("curate: the 20-document fixture drops exactly one per filter") {
  std::vector<Document> docs;
  std::map<std::string, std::string> expected;
  for_each_jsonl(
      cctest::data_path("curate_fixture.jsonl"),
      [&](std::size_t, Json j) {
        Document d(j.at("id").get<std::string>(), j.at("text").get<std::string>());
        d.advance(corpus::Stage::agnostic);
        expected[d.id()] = j.at("expected").get<std::string>();
        docs.push_back(std::move(d));
      },
      [](std::size_t, std::string_view e) { FAIL(std::string(e)); });
  REQUIRE(docs.size() == 20);
  const UnsafeWordlist wl({"scam"});

  for (std::size_t workers : {1u, 4u}) {
    CurationOptions o;
    o.workers = workers;
    const auto r = curate(docs, wl, o);
    CHECK(r.report.input_count == 20);
    CHECK(r.report.retained == 16);
    CHECK(r.report.dropped_unsafe == 1);
    CHECK(r.report.dropped_quality() == 1);
    CHECK(r.report.dropped_quality_by_rule[static_cast<std::size_t>(QualityRule::min_sentences)] == 1);
    CHECK(r.report.dropped_short == 1);
    CHECK(r.report.dropped_near_dup == 1);
    CHECK(r.report.reconciles());
    for (const auto& d : r.documents) {
      CHECK(expected.at(d.id()) == "retained");
      CHECK(d.stage() == corpus::Stage::clean);
    }

    // Idempotent on its own output.
    const auto again = curate(r.documents, wl, o);
    CHECK(ids(again.documents) == ids(r.documents));
    CHECK(again.report.retained == again.report.input_count);
  }
}

TEST_CASE("curate: trivial inputs") {
  const UnsafeWordlist wl({"scam"});
  const auto empty = curate({}, wl);
  CHECK(empty.documents.empty());
  CHECK(empty.report.input_count == 0);
  CHECK(empty.report.retained == 0);
  CHECK(empty.report.reconciles());

  std::vector<Document> docs;
  for (const char* topic : {"harbor", "meadow", "quarry"}) {
    Document d(topic, sentences_text(8, topic));
    d.advance(corpus::Stage::agnostic);
    docs.push_back(d);
  }
  const auto all = curate(docs, wl);
  CHECK(all.report.retained == 3);
  CHECK(all.report.to_json().at("retained") == 3);
}

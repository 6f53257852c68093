#include <doctest.h>

#include <cmath>
#include <map>

#include "claimcheck/claim_gen.hpp"
#include "support.hpp"

using namespace claimcheck;
using namespace claimcheck::claims;

namespace {

corpus::Document reformed_doc(const std::string& id, const std::string& text) {
  corpus::Document d(id, text);
  d.advance(corpus::Stage::agnostic);
  d.advance(corpus::Stage::clean);
  d.advance(corpus::Stage::reformed);
  return d;
}

llm::InferenceParams no_retry() {
  auto p = llm::preset(llm::Mode::no_think);
  p.max_retries = 0;
  return p;
}

// Names the requested kind by matching the first instruction line.
llm::MockHandler kind_echo() {
  return [](const llm::MockCall& call) {
    for (ClaimKind k : {ClaimKind::grounded, ClaimKind::intrinsic, ClaimKind::extrinsic}) {
      if (call.prompt.find(claim_instructions(k)[0]) != std::string::npos) {
        return llm::AttemptResult::success("A " + std::string(to_string(k)) + " claim.");
      }
    }
    return llm::AttemptResult::success("");
  };
}

}  // namespace

TEST_CASE("quota counts") {
  struct Case {
    std::size_t n, g, i, e;
  };
  for (const auto& c : {Case{0, 0, 0, 0}, Case{1, 1, 0, 0}, Case{4, 2, 1, 1}, Case{7, 4, 2, 1},
                        Case{8, 4, 2, 2}, Case{1000, 500, 250, 250}}) {
    CAPTURE(c.n);
    const auto q = quota_counts(c.n);
    CHECK(q.grounded == c.g);
    CHECK(q.intrinsic == c.i);
    CHECK(q.extrinsic == c.e);
  }
}

TEST_CASE("quota counts follow the ceiling rule for every n") {
  for (std::size_t n = 0; n < 300; ++n) {
    const auto q = quota_counts(n);
    CHECK(q.grounded + q.intrinsic + q.extrinsic == n);
    CHECK(q.grounded == (n + 1) / 2);
    const std::size_t rest = n / 2;
    CHECK(q.intrinsic == (rest + 1) / 2);
  }
}

TEST_CASE("custom quota fractions") {
  const auto q = quota_counts(10, {0.3, 0.5, 0.2});
  CHECK(q.grounded == 3);
  CHECK(q.intrinsic == 5);
  CHECK(q.extrinsic == 2);
  CHECK_THROWS_AS(quota_counts(10, {0.5, 0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(quota_counts(10, {1.2, -0.1, -0.1}), std::invalid_argument);
}

TEST_CASE("assign_quota is a seeded permutation of the counts") {
  Rng a(7), b(7), c(8);
  const auto ka = assign_quota(101, a);
  CHECK(ka == assign_quota(101, b));
  CHECK(ka != assign_quota(101, c));
  std::map<ClaimKind, std::size_t> counts;
  for (auto k : ka) ++counts[k];
  CHECK(counts[ClaimKind::grounded] == 51);
  CHECK(counts[ClaimKind::intrinsic] == 25);
  CHECK(counts[ClaimKind::extrinsic] == 25);
}

TEST_CASE("claim prompt layout") {
  const std::string doc = "The river \"Aa\" floods\nevery spring.";
  for (ClaimKind k : {ClaimKind::grounded, ClaimKind::intrinsic, ClaimKind::extrinsic}) {
    const auto p = build_claim_prompt(doc, k);
    CHECK(p == build_claim_prompt(doc, k));
    const Json j = Json::parse(p);
    CHECK(j.at("context") == doc);
    CHECK(j.at("answer") == "");
    REQUIRE(j.at("instructions").size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(j.at("instructions")[i] == claim_instructions(k)[i]);
  }
  CHECK(build_claim_prompt(doc, ClaimKind::intrinsic).find("contradicts the provided context") != std::string::npos);
  CHECK(build_claim_prompt(doc, ClaimKind::extrinsic).find("requires external knowledge") != std::string::npos);
  CHECK(build_claim_prompt(doc, ClaimKind::grounded).find("fully grounded in the provided context") !=
        std::string::npos);
  const auto p = build_claim_prompt("x", ClaimKind::grounded);
  CHECK(p.rfind("{\n  \"instructions\": [\n    \"Generate", 0) == 0);
  CHECK(p.substr(p.size() - 14) == "\"answer\": \"\"\n}");
}

TEST_CASE("cleaning claim responses") {
  CHECK(clean_claim_response("  The lake froze in May. ") == std::optional<std::string>("The lake froze in May."));
  CHECK(clean_claim_response("\"Quoted claim.\"") == std::optional<std::string>("Quoted claim."));
  CHECK(clean_claim_response("\xE2\x80\x9C" "Curly." "\xE2\x80\x9D") == std::optional<std::string>("Curly."));
  CHECK(clean_claim_response(R"({"answer": "From JSON."})") == std::optional<std::string>("From JSON."));
  CHECK(clean_claim_response("<think>hmm\nok</think>\nAfter thinking.") ==
        std::optional<std::string>("After thinking."));
  CHECK_FALSE(clean_claim_response(""));
  CHECK_FALSE(clean_claim_response("   "));
  CHECK_FALSE(clean_claim_response("\"\""));
  CHECK_FALSE(clean_claim_response("Line one.\nLine two."));
  CHECK_FALSE(clean_claim_response("One. Two. Three. Four."));
  CHECK(clean_claim_response("One. Two. Three."));
  CHECK_FALSE(clean_claim_response("Generate a claim that contradicts the provided context."));
  CHECK_FALSE(clean_claim_response(R"({"instructions": ["x"], "context": "y"})"));
  CHECK_FALSE(clean_claim_response("<think>never closed"));
}

TEST_CASE("claim and triplet invariants") {
  Claim g("c", ClaimKind::grounded);
  CHECK(g.label() == Label::grounded);
  CHECK(g.subtype() == Subtype::none);
  Claim i("c", ClaimKind::intrinsic);
  CHECK(i.label() == Label::hallucinated);
  CHECK(i.subtype() == Subtype::intrinsic);
  CHECK_THROWS_AS(Claim("c", Label::grounded, Subtype::extrinsic), std::invalid_argument);
  CHECK_THROWS_AS(Claim("c", Label::hallucinated, Subtype::none), std::invalid_argument);

  ClaimTriplet t{"d1", "doc", Claim("x", ClaimKind::extrinsic), ClaimKind::extrinsic};
  const auto back = ClaimTriplet::from_json(t.to_json());
  CHECK(back.to_json() == t.to_json());
  auto bad = t.to_json();
  bad["generation_prompt_kind"] = "grounded";
  CHECK_THROWS_AS(ClaimTriplet::from_json(bad), std::invalid_argument);
}

TEST_CASE("generate_claim") {
  const auto doc = reformed_doc("d", "Some reformed text.");

  SUBCASE("valid reply") {
    llm::MockClient client("cg", kind_echo());
    const auto out = generate_claim(doc, ClaimKind::intrinsic, client, no_retry());
    REQUIRE(out.status == ClaimStatus::ok);
    CHECK(out.requests == 1);
    CHECK(out.triplet->claim.text() == "A intrinsic claim.");
    CHECK(out.triplet->claim.label() == Label::hallucinated);
    CHECK(out.triplet->generation_prompt_kind == ClaimKind::intrinsic);
    CHECK(out.triplet->document_text == doc.text());
  }
  SUBCASE("empty then valid") {
    llm::MockClient client("cg", [](const llm::MockCall& c) {
      return llm::AttemptResult::success(c.call_index == 0 ? "" : "Second try.");
    });
    const auto out = generate_claim(doc, ClaimKind::grounded, client, no_retry());
    CHECK(out.status == ClaimStatus::ok);
    CHECK(out.requests == 2);
  }
  SUBCASE("empty twice is skipped") {
    llm::MockClient client("cg", [](const llm::MockCall&) { return llm::AttemptResult::success(""); });
    const auto out = generate_claim(doc, ClaimKind::grounded, client, no_retry());
    CHECK(out.status == ClaimStatus::invalid_output);
    CHECK_FALSE(out.triplet);
    CHECK(out.requests == 2);
  }
  SUBCASE("client failure is not retried again") {
    llm::MockClient client("cg", [](const llm::MockCall&) {
      return llm::AttemptResult::failure(llm::ErrorKind::http_status, false);
    });
    const auto out = generate_claim(doc, ClaimKind::grounded, client, no_retry());
    CHECK(out.status == ClaimStatus::client_error);
    CHECK(out.requests == 1);
  }
  SUBCASE("unreformed input is rejected") {
    llm::MockClient client("cg", kind_echo());
    corpus::Document raw("r", "text");
    CHECK_THROWS_AS(generate_claim(raw, ClaimKind::grounded, client, no_retry()), std::invalid_argument);
  }
}

TEST_CASE("a thousand documents split exactly by quota") {
  std::vector<corpus::Document> docs;
  for (int i = 0; i < 1000; ++i) docs.push_back(reformed_doc("d" + std::to_string(i), "Doc " + std::to_string(i)));
  llm::MockClient client("cg", kind_echo());
  Rng rng(42);
  const auto res = generate_claims(docs, rng, client, no_retry(), 8);
  REQUIRE(res.triplets.size() == 1000);
  std::map<ClaimKind, std::size_t> counts;
  for (std::size_t i = 0; i < res.triplets.size(); ++i) {
    const auto& t = res.triplets[i];
    ++counts[t.generation_prompt_kind];
    CHECK(t.doc_id == docs[i].id());
    // The reply names the kind that was actually prompted.
    CHECK(t.claim.text() == "A " + std::string(to_string(t.generation_prompt_kind)) + " claim.");
  }
  CHECK(counts[ClaimKind::grounded] == 500);
  CHECK(counts[ClaimKind::intrinsic] == 250);
  CHECK(counts[ClaimKind::extrinsic] == 250);
  CHECK(res.stats_json().at("assigned").at("grounded") == 500);
}

TEST_CASE("skips are counted by kind and output is order-stable") {
  std::vector<corpus::Document> docs;
  for (int i = 0; i < 40; ++i) docs.push_back(reformed_doc("d" + std::to_string(i), "Doc " + std::to_string(i)));
  auto handler = [](const llm::MockCall& c) {
    if (c.prompt.find("Doc 3\"") != std::string::npos) return llm::AttemptResult::success("");
    if (c.prompt.find("Doc 7\"") != std::string::npos) {
      return llm::AttemptResult::failure(llm::ErrorKind::http_status, false);
    }
    return kind_echo()(c);
  };
  llm::MockClient c1("cg", handler), c2("cg", handler);
  Rng r1(3), r2(3);
  const auto a = generate_claims(docs, r1, c1, no_retry(), 1);
  const auto b = generate_claims(docs, r2, c2, no_retry(), 6);
  CHECK(a.triplets.size() == 38);
  CHECK(a.invalid_outputs == 1);
  CHECK(a.client_errors == 1);
  CHECK(a.skipped[0] + a.skipped[1] + a.skipped[2] == 2);
  REQUIRE(a.triplets.size() == b.triplets.size());
  for (std::size_t i = 0; i < a.triplets.size(); ++i) CHECK(a.triplets[i].to_json() == b.triplets[i].to_json());
}

TEST_CASE("triplet file round trip") {
  cctest::TempDir dir;
  std::vector<ClaimTriplet> ts = {
      {"a", "Doc a", Claim("ga", ClaimKind::grounded), ClaimKind::grounded},
      {"b", "Doc \"b\"\nline", Claim("ib", ClaimKind::intrinsic), ClaimKind::intrinsic},
      {"c", "Doc c", Claim("ec", ClaimKind::extrinsic), ClaimKind::extrinsic},
  };
  write_triplets(dir / "t.jsonl", ts);
  const auto back = read_triplets(dir / "t.jsonl");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i].to_json() == ts[i].to_json());
}

// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/claim_gen.hpp"

#include <cmath>
#include <stdexcept>

#include "claimcheck/completion.hpp"
#include "claimcheck/curation.hpp"
#include "claimcheck/parallel.hpp"
#include "claimcheck/text.hpp"

namespace claimcheck::claims {

Claim::Claim(std::string text, ClaimKind kind)
    : text_(std::move(text)), label_(label_of(kind)), subtype_(subtype_of(kind)) {}

Claim::Claim(std::string text, Label label, Subtype subtype)
    : text_(std::move(text)), label_(label), subtype_(subtype) {
  if ((label == Label::grounded) != (subtype == Subtype::none)) {
    throw std::invalid_argument("claim label and subtype disagree");
  }
}

Json ClaimTriplet::to_json() const {
  return Json{{"doc_id", doc_id},
              {"document", document_text},
              {"claim", claim.text()},
              {"label", to_string(claim.label())},
              {"subtype", to_string(claim.subtype())},
              {"generation_prompt_kind", to_string(generation_prompt_kind)}};
}

ClaimTriplet ClaimTriplet::from_json(const Json& j) {
  ClaimTriplet t;
  t.doc_id = j.at("doc_id").get<std::string>();
  t.document_text = j.at("document").get<std::string>();
  t.claim = Claim(j.at("claim").get<std::string>(), parse_label(j.at("label").get<std::string>()),
                  parse_subtype(j.at("subtype").get<std::string>()));
  if (j.contains("generation_prompt_kind")) {
    t.generation_prompt_kind = parse_claim_kind(j.at("generation_prompt_kind").get<std::string>());
  } else {
    t.generation_prompt_kind = t.claim.subtype() == Subtype::intrinsic   ? ClaimKind::intrinsic
                               : t.claim.subtype() == Subtype::extrinsic ? ClaimKind::extrinsic
                                                                         : ClaimKind::grounded;
  }
  if (subtype_of(t.generation_prompt_kind) != t.claim.subtype()) {
    throw std::invalid_argument("triplet " + t.doc_id + ": prompt kind disagrees with subtype");
  }
  return t;
}

void QuotaFractions::validate() const {
  if (grounded < 0 || intrinsic < 0 || extrinsic < 0) {
    throw std::invalid_argument("quota fractions must be non-negative");
  }
  if (std::abs(grounded + intrinsic + extrinsic - 1.0) > 1e-9) {
    throw std::invalid_argument("quota fractions must sum to 1");
  }
}

QuotaCounts quota_counts(std::size_t n, const QuotaFractions& fractions) {
  fractions.validate();
  // Absorbs representation error such as 10 * 0.3 > 3.
  auto ceil_of = [](double x) { return static_cast<std::size_t>(std::ceil(x - 1e-9)); };
  QuotaCounts c;
  c.grounded = std::min(n, ceil_of(static_cast<double>(n) * fractions.grounded));
  const std::size_t rest = n - c.grounded;
  const double hallucinated = fractions.intrinsic + fractions.extrinsic;
  c.intrinsic = hallucinated > 0
                    ? std::min(rest, ceil_of(static_cast<double>(rest) * fractions.intrinsic / hallucinated))
                    : 0;
  c.extrinsic = rest - c.intrinsic;
  return c;
}

std::vector<ClaimKind> assign_quota(std::size_t n, Rng& rng, const QuotaFractions& fractions) {
  const QuotaCounts c = quota_counts(n, fractions);
  std::vector<ClaimKind> kinds;
  kinds.reserve(n);
  kinds.insert(kinds.end(), c.grounded, ClaimKind::grounded);
  kinds.insert(kinds.end(), c.intrinsic, ClaimKind::intrinsic);
  kinds.insert(kinds.end(), c.extrinsic, ClaimKind::extrinsic);
  rng.shuffle(kinds);
  return kinds;
}

const std::array<std::string, 3>& claim_instructions(ClaimKind kind) {
  static const std::array<std::string, 3> kGrounded = {
      "Generate a claim that is factually accurate and fully grounded in the provided context.",
      "Ensure that the claim is explicitly supported by the context - do not introduce information "
      "that is not directly verifiable from the context.",
      "Only return the claim as the answer. Do not include any additional text, explanation, or "
      "formatting."};
  static const std::array<std::string, 3> kIntrinsic = {
      "Generate a claim that contradicts the provided context.",
      "The claim should remain fluent and grammatically correct but should be identifiable as "
      "incorrect upon a quick read.",
      "Only return the claim as the answer. Do not include any additional text, explanation, or "
      "formatting."};
  static const std::array<std::string, 3> kExtrinsic = {
      "Generate a claim that includes information that cannot be verified within the provided "
      "context.",
      "Ensure the claim is plausible but requires external knowledge to verify its accuracy.",
      "Only return the claim as the answer. Do not include any additional text, explanation, or "
      "formatting."};
  switch (kind) {
    case ClaimKind::grounded: return kGrounded;
    case ClaimKind::intrinsic: return kIntrinsic;
    case ClaimKind::extrinsic: return kExtrinsic;
  }
  return kGrounded;
}

std::string build_claim_prompt(std::string_view document_text, ClaimKind kind) {
  const auto& lines = claim_instructions(kind);
  std::string p = "{\n  \"instructions\": [\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    p += "    ";
    p += json_quote(lines[i]);
    p += i + 1 < lines.size() ? ",\n" : "\n";
  }
  p += "  ],\n  \"context\": ";
  p += json_quote(document_text);
  p += ",\n  \"answer\": \"\"\n}";
  return p;
}

namespace {

std::string_view strip_matching_quotes(std::string_view s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    return text::trim(s.substr(1, s.size() - 2));
  }
  constexpr std::string_view kLeft = "\xE2\x80\x9C";
  constexpr std::string_view kRight = "\xE2\x80\x9D";
  if (s.size() >= 6 && s.substr(0, 3) == kLeft && s.substr(s.size() - 3) == kRight) {
    return text::trim(s.substr(3, s.size() - 6));
  }
  return s;
}

bool echoes_instructions(std::string_view claim) {
  if (text::contains_ci(claim, "\"instructions\"") || text::contains_ci(claim, "generate a claim") ||
      text::contains_ci(claim, "only return the claim")) {
    return true;
  }
  for (ClaimKind k : {ClaimKind::grounded, ClaimKind::intrinsic, ClaimKind::extrinsic}) {
    for (const auto& line : claim_instructions(k)) {
      if (text::contains_ci(claim, line)) return true;
    }
  }
  return false;
}

}  // namespace

std::optional<std::string> clean_claim_response(std::string_view raw, std::size_t max_sentences) {
  const auto split = prefs::split_think_block(raw);
  if (!split) return std::nullopt;
  std::string body = split->remainder;

  // Structured replies: {"answer": "..."} or a bare JSON string.
  if (!body.empty() && (body.front() == '{' || body.front() == '"')) {
    const Json j = Json::parse(body, nullptr, false);
    if (!j.is_discarded()) {
      if (j.is_string()) {
        body = j.get<std::string>();
      } else if (j.is_object() && j.contains("answer") && j.at("answer").is_string()) {
        body = j.at("answer").get<std::string>();
      } else if (j.is_object()) {
        return std::nullopt;
      }
    }
  }

  std::string_view claim = strip_matching_quotes(text::trim(body));
  if (claim.empty()) return std::nullopt;
  if (claim.find('\n') != std::string_view::npos) return std::nullopt;
  if (curation::split_sentences(claim).size() > max_sentences) return std::nullopt;
  if (echoes_instructions(claim)) return std::nullopt;
  return std::string(claim);
}

std::string_view to_string(ClaimStatus s) {
  switch (s) {
    case ClaimStatus::ok: return "ok";
    case ClaimStatus::client_error: return "client_error";
    case ClaimStatus::invalid_output: return "invalid_output";
  }
  return "ok";
}

ClaimOutcome generate_claim(const corpus::Document& doc, ClaimKind kind, llm::ChatClient& client,
                            const llm::InferenceParams& params) {
  if (doc.stage() != corpus::Stage::reformed) {
    throw std::invalid_argument("generate_claim: document " + doc.id() + " is not reformed");
  }
  const std::string prompt = build_claim_prompt(doc.text(), kind);
  ClaimOutcome out;
  for (int round = 0; round < 2; ++round) {
    const auto response = client.complete(prompt, params);
    ++out.requests;
    if (!response.ok()) {
      out.status = ClaimStatus::client_error;
      return out;
    }
    if (auto claim = clean_claim_response(response.content)) {
      out.status = ClaimStatus::ok;
      out.triplet = ClaimTriplet{doc.id(), doc.text(), Claim(std::move(*claim), kind), kind};
      return out;
    }
    out.status = ClaimStatus::invalid_output;
  }
  return out;
}

Json ClaimStageResult::stats_json() const {
  auto by_kind = [](const std::array<std::size_t, 3>& a) {
    return Json{{"grounded", a[0]}, {"intrinsic", a[1]}, {"extrinsic", a[2]}};
  };
  return Json{{"generated", triplets.size()},
              {"assigned", by_kind(assigned)},
              {"skipped", by_kind(skipped)},
              {"client_errors", client_errors},
              {"invalid_outputs", invalid_outputs}};
}

ClaimStageResult generate_claims(const std::vector<corpus::Document>& docs, Rng& rng,
                                 llm::ChatClient& client, const llm::InferenceParams& params,
                                 std::size_t max_inflight, const QuotaFractions& fractions) {
  ClaimStageResult result;
  const auto kinds = assign_quota(docs.size(), rng, fractions);
  for (ClaimKind k : kinds) ++result.assigned[static_cast<std::size_t>(k)];

  auto outcomes = ordered_parallel_map(docs.size(), max_inflight, [&](std::size_t i) {
    return generate_claim(docs[i], kinds[i], client, params);
  });
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    if (o.status == ClaimStatus::ok) {
      result.triplets.push_back(std::move(*o.triplet));
      continue;
    }
    ++result.skipped[static_cast<std::size_t>(kinds[i])];
    if (o.status == ClaimStatus::client_error) {
      ++result.client_errors;
    } else {
      ++result.invalid_outputs;
    }
  }
  return result;
}

void write_triplets(const std::filesystem::path& path, const std::vector<ClaimTriplet>& triplets) {
  AtomicFileWriter w(path);
  for (const auto& t : triplets) w.write_line(dump_compact(t.to_json()));
  w.commit();
}

std::vector<ClaimTriplet> read_triplets(const std::filesystem::path& path) {
  std::vector<ClaimTriplet> out;
  for_each_jsonl(
      path, [&](std::size_t, Json j) { out.push_back(ClaimTriplet::from_json(j)); },
      [&](std::size_t line_no, std::string_view err) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + std::string(err));
      });
  return out;
}

}  // namespace claimcheck::claims

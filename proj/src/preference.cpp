// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/preference.hpp"

#include <future>
#include <stdexcept>

#include "claimcheck/parallel.hpp"
#include "claimcheck/text.hpp"

namespace claimcheck::prefs {

const std::vector<std::string>& classification_instructions() {
  static const std::vector<std::string> kLines = {
      "You will be given a document and a claim. Determine whether the claim is 'GROUNDED' or "
      "'HALLUCINATED' based on the document.",
      "A 'GROUNDED' claim is factually accurate and fully supported by the information provided in "
      "the document. It should be directly verifiable from the document.",
      "A 'HALLUCINATED' claim is either:",
      "  - Intrinsically incorrect: It contradicts the information provided in the document, or",
      "  - Extrinsically incorrect: It includes information that cannot be verified within the "
      "document and requires external knowledge to assess its accuracy.",
      "Return the classification as the answer (i.e., GROUNDED or HALLUCINATED). Include "
      "justification."};
  return kLines;
}

namespace {

std::string render_instruction_block(const std::vector<std::string>& lines) {
  std::string out = "  \"instructions\": [\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += "    ";
    out += json_quote(lines[i]);
    out += i + 1 < lines.size() ? ",\n" : "\n";
  }
  out += "  ],\n";
  return out;
}

}  // namespace

ClassificationPrompt build_classification_prompt(std::string_view document_text,
                                                 std::string_view claim_text) {
  if (text::trim(document_text).empty()) throw std::invalid_argument("empty document");
  if (text::trim(claim_text).empty()) throw std::invalid_argument("empty claim");
  ClassificationPrompt p{std::string(document_text), std::string(claim_text), {}};
  std::string& r = p.rendered;
  r = "{\n";
  r += render_instruction_block(classification_instructions());
  r += "  \"document\": " + json_quote(document_text) + ",\n";
  r += "  \"claim\": " + json_quote(claim_text) + ",\n";
  r += "  \"answer\": { \"CLASSIFICATION\": \"\", \"JUSTIFICATION\": \"\" }\n}";
  return p;
}

std::string_view to_string(JudgePick p) {
  switch (p) {
    case JudgePick::chosen: return "chosen";
    case JudgePick::rejected: return "rejected";
    case JudgePick::invalid: return "invalid";
    case JudgePick::unavailable: return "unavailable";
  }
  return "invalid";
}

JudgePick parse_judge_pick(std::string_view s) {
  if (s == "chosen") return JudgePick::chosen;
  if (s == "rejected") return JudgePick::rejected;
  if (s == "invalid") return JudgePick::invalid;
  if (s == "unavailable") return JudgePick::unavailable;
  throw std::invalid_argument("unknown judge pick: " + std::string(s));
}

std::string_view to_string(PresentationOrder o) {
  return o == PresentationOrder::chosen_first ? "chosen_first" : "rejected_first";
}

PresentationOrder parse_presentation_order(std::string_view s) {
  if (s == "chosen_first") return PresentationOrder::chosen_first;
  if (s == "rejected_first") return PresentationOrder::rejected_first;
  throw std::invalid_argument("unknown presentation order: " + std::string(s));
}

bool PreferenceTuple::exportable() const {
  return audit.agreement_passed && (audit.consensus_passed || audit.consensus_skipped);
}

namespace {

Json completion_json(const Completion& c) {
  Json j{{"raw", c.raw}};
  if (c.parseable()) {
    j["predicted_label"] = to_string(*c.predicted_label);
    j["justification"] = c.justification;
    j["reasoning_trace"] = c.reasoning_trace;
  } else {
    j["predicted_label"] = "unparseable";
  }
  return j;
}

Completion completion_from_json(const Json& j) {
  // Re-parsing the raw text keeps the stored fields consistent with it.
  return parse_completion(j.at("raw").get<std::string>());
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(to_string(*v)) : Json(nullptr);
}

}  // namespace

Json PreferenceTuple::to_json() const {
  Json audit_json{{"agreement_passed", audit.agreement_passed},
                  {"agreement_reason", audit.agreement_reason},
                  {"presentation_order", optional_json(audit.presentation_order)},
                  {"judge1_pick", optional_json(audit.judge1_pick)},
                  {"judge2_pick", optional_json(audit.judge2_pick)},
                  {"consensus_passed", audit.consensus_passed},
                  {"consensus_skipped", audit.consensus_skipped},
                  {"consensus_reason", audit.consensus_reason},
                  {"rejected_unparseable", audit.rejected_unparseable}};
  return Json{{"doc_id", doc_id},
              {"document", prompt.document_text},
              {"claim", prompt.claim_text},
              {"synthetic_label", to_string(synthetic_label)},
              {"chosen", completion_json(chosen)},
              {"rejected", completion_json(rejected)},
              {"chosen_source", chosen_source},
              {"rejected_source", rejected_source},
              {"audit", std::move(audit_json)}};
}

PreferenceTuple PreferenceTuple::from_json(const Json& j) {
  PreferenceTuple t;
  t.doc_id = j.at("doc_id").get<std::string>();
  t.prompt = build_classification_prompt(j.at("document").get<std::string>(),
                                         j.at("claim").get<std::string>());
  t.synthetic_label = parse_label(j.at("synthetic_label").get<std::string>());
  t.chosen = completion_from_json(j.at("chosen"));
  t.rejected = completion_from_json(j.at("rejected"));
  t.chosen_source = j.value("chosen_source", std::string());
  t.rejected_source = j.value("rejected_source", std::string());
  const Json& a = j.at("audit");
  t.audit.agreement_passed = a.at("agreement_passed").get<bool>();
  t.audit.agreement_reason = a.value("agreement_reason", std::string());
  if (a.contains("presentation_order") && !a.at("presentation_order").is_null()) {
    t.audit.presentation_order = parse_presentation_order(a.at("presentation_order").get<std::string>());
  }
  if (a.contains("judge1_pick") && !a.at("judge1_pick").is_null()) {
    t.audit.judge1_pick = parse_judge_pick(a.at("judge1_pick").get<std::string>());
  }
  if (a.contains("judge2_pick") && !a.at("judge2_pick").is_null()) {
    t.audit.judge2_pick = parse_judge_pick(a.at("judge2_pick").get<std::string>());
  }
  t.audit.consensus_passed = a.value("consensus_passed", false);
  t.audit.consensus_skipped = a.value("consensus_skipped", false);
  t.audit.consensus_reason = a.value("consensus_reason", std::string());
  t.audit.rejected_unparseable = a.value("rejected_unparseable", false);
  return t;
}

std::string_view to_string(PairStatus s) {
  switch (s) {
    case PairStatus::ok: return "ok";
    case PairStatus::large_failed: return "large_failed";
    case PairStatus::small_failed: return "small_failed";
  }
  return "ok";
}

PairOutcome generate_pair(const claims::ClaimTriplet& triplet, llm::ChatClient& large,
                          llm::ChatClient& small, const llm::InferenceParams& large_params,
                          const llm::InferenceParams& small_params) {
  PreferenceTuple t;
  t.doc_id = triplet.doc_id;
  t.prompt = build_classification_prompt(triplet.document_text, triplet.claim.text());
  t.synthetic_label = triplet.claim.label();
  t.chosen_source = large.id();
  t.rejected_source = small.id();

  auto small_future = std::async(std::launch::async, [&] {
    return small.complete(t.prompt.rendered, small_params);
  });
  const auto large_response = large.complete(t.prompt.rendered, large_params);
  const auto small_response = small_future.get();

  PairOutcome out;
  if (!large_response.ok()) {
    out.status = PairStatus::large_failed;
    return out;
  }
  if (!small_response.ok()) {
    out.status = PairStatus::small_failed;
    return out;
  }
  t.chosen = parse_completion(large_response.content);
  t.rejected = parse_completion(small_response.content);
  t.audit.rejected_unparseable = !t.rejected.parseable();
  out.tuple = std::move(t);
  return out;
}

FilterDecision agreement_verify(const PreferenceTuple& tuple) {
  if (!tuple.chosen.parseable()) return {false, "unparseable"};
  if (*tuple.chosen.predicted_label != tuple.synthetic_label) return {false, "label_mismatch"};
  return {true, ""};
}

Json default_judge_examples() {
  const auto doc =
      "The Riverside library opened in 1998 and holds about 40,000 books. It is open every day "
      "except Monday.";
  const auto claim = "The Riverside library is closed on Mondays.";
  return Json::array(
      {Json{{"document", doc},
            {"claim", claim},
            {"RESPONSE_A",
             render_completion(Label::grounded,
                               "The document states the library is open every day except Monday, "
                               "so it is closed on Mondays.",
                               "The claim concerns opening days. The document says every day "
                               "except Monday, which matches.")},
            {"RESPONSE_B",
             render_completion(Label::hallucinated, "The document does not mention Mondays.",
                               "Not sure.")},
            {"best_response", "RESPONSE_A"}},
       Json{{"document", doc},
            {"claim", "The Riverside library opened in 2005."},
            {"RESPONSE_A",
             render_completion(Label::grounded, "The library is a public building.", "Seems fine.")},
            {"RESPONSE_B",
             render_completion(Label::hallucinated,
                               "The document says the library opened in 1998, which contradicts "
                               "the claimed year 2005.",
                               "The claim gives 2005 as the opening year. The document gives "
                               "1998. These conflict.")},
            {"best_response", "RESPONSE_B"}}});
}

Json load_judge_examples(const std::filesystem::path& path) {
  Json j = Json::parse(read_text_file(path));
  if (!j.is_array()) throw std::invalid_argument("judge examples must be a JSON array");
  return j;
}

std::string build_judge_prompt(const ClassificationPrompt& prompt, std::string_view response_a,
                               std::string_view response_b, const Json& examples) {
  static const std::vector<std::string> kLines = {
      "You will be given a document and a claim, along with two responses (RESPONSE_A and "
      "RESPONSE_B).",
      "Determine which response is better based on classification correctness, thinking coherence "
      "and clarity, and justification quality.",
      "Return your answer as either 'RESPONSE_A' or 'RESPONSE_B', without any justification."};
  std::string r = "{\n";
  r += render_instruction_block(kLines);
  r += "  \"examples\": " + dump_compact(examples) + ",\n";
  r += "  \"document\": " + json_quote(prompt.document_text) + ",\n";
  r += "  \"claim\": " + json_quote(prompt.claim_text) + ",\n";
  r += "  \"RESPONSE_A\": " + json_quote(response_a) + ",\n";
  r += "  \"RESPONSE_B\": " + json_quote(response_b) + ",\n";
  r += "  \"best_response\": \"\"\n}";
  return r;
}

std::optional<JudgeSlot> parse_judge_answer(std::string_view raw) {
  const auto split = split_think_block(raw);
  if (!split) return std::nullopt;
  std::string answer = split->remainder;
  if (!answer.empty() && answer.front() == '{') {
    const Json j = Json::parse(answer, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.size() != 1 || !j.contains("best_response") ||
        !j.at("best_response").is_string()) {
      return std::nullopt;
    }
    answer = j.at("best_response").get<std::string>();
  }
  std::string_view a = text::trim(answer);
  if (a.size() >= 2 && (a.front() == '"' || a.front() == '\'') && a.back() == a.front()) {
    a = text::trim(a.substr(1, a.size() - 2));
  }
  const std::string upper = [&] {
    std::string u(a);
    for (char& c : u) {
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    }
    return u;
  }();
  if (upper == "RESPONSE_A") return JudgeSlot::response_a;
  if (upper == "RESPONSE_B") return JudgeSlot::response_b;
  return std::nullopt;
}

namespace {

JudgePick ask_judge(llm::ChatClient& judge, const llm::InferenceParams& params,
                    const std::string& prompt, PresentationOrder order) {
  const auto response = judge.complete(prompt, params);
  if (!response.ok()) return JudgePick::unavailable;
  const auto slot = parse_judge_answer(response.content);
  if (!slot) return JudgePick::invalid;
  const bool picked_a = *slot == JudgeSlot::response_a;
  const bool chosen_is_a = order == PresentationOrder::chosen_first;
  return picked_a == chosen_is_a ? JudgePick::chosen : JudgePick::rejected;
}

}  // namespace

ConsensusResult consensus_filter(const PreferenceTuple& tuple, const JudgeSetup& judges,
                                 PresentationOrder order) {
  if (!judges.judge1 || !judges.judge2 || judges.judge1 == judges.judge2 ||
      judges.judge1->id() == judges.judge2->id()) {
    throw std::invalid_argument("consensus filtering needs two distinct judges");
  }
  const std::string chosen = completion_content(tuple.chosen);
  const std::string rejected = completion_content(tuple.rejected);
  const bool chosen_first = order == PresentationOrder::chosen_first;
  const std::string prompt =
      build_judge_prompt(tuple.prompt, chosen_first ? chosen : rejected,
                         chosen_first ? rejected : chosen, judges.examples);

  auto second = std::async(std::launch::async, [&] {
    return ask_judge(*judges.judge2, judges.params2, prompt, order);
  });
  ConsensusResult r;
  r.order = order;
  r.judge1 = ask_judge(*judges.judge1, judges.params1, prompt, order);
  r.judge2 = second.get();

  if (r.judge1 == JudgePick::unavailable || r.judge2 == JudgePick::unavailable) {
    r.decision = {false, "judge_unavailable"};
  } else if (r.judge1 == JudgePick::invalid || r.judge2 == JudgePick::invalid) {
    r.decision = {false, "invalid_judge_output"};
  } else if (r.judge1 != r.judge2) {
    r.decision = {false, "judges_disagree"};
  } else if (r.judge1 == JudgePick::rejected) {
    r.decision = {false, "picked_rejected"};
  } else {
    r.decision = {true, ""};
  }
  return r;
}

ConsensusResult consensus_filter(const PreferenceTuple& tuple, const JudgeSetup& judges, Rng& rng) {
  const PresentationOrder order =
      rng.coin() ? PresentationOrder::chosen_first : PresentationOrder::rejected_first;
  return consensus_filter(tuple, judges, order);
}

Json PairStageResult::stats_json() const {
  return Json{{"generated", tuples.size()},
              {"skipped_large", skipped_large},
              {"skipped_small", skipped_small},
              {"agreement_passed", agreement_passed},
              {"agreement_dropped", tuples.size() - agreement_passed},
              {"rejected_unparseable", rejected_unparseable}};
}

PairStageResult build_pairs(const std::vector<claims::ClaimTriplet>& triplets,
                            llm::ChatClient& large, llm::ChatClient& small,
                            const llm::InferenceParams& large_params,
                            const llm::InferenceParams& small_params, std::size_t max_inflight) {
  PairStageResult result;
  auto outcomes = ordered_parallel_map(triplets.size(), max_inflight, [&](std::size_t i) {
    return generate_pair(triplets[i], large, small, large_params, small_params);
  });
  for (auto& o : outcomes) {
    if (o.status == PairStatus::large_failed) {
      ++result.skipped_large;
      continue;
    }
    if (o.status == PairStatus::small_failed) {
      ++result.skipped_small;
      continue;
    }
    PreferenceTuple& t = *o.tuple;
    const FilterDecision d = agreement_verify(t);
    t.audit.agreement_passed = d.keep;
    t.audit.agreement_reason = d.reason;
    if (d.keep) ++result.agreement_passed;
    if (t.audit.rejected_unparseable) ++result.rejected_unparseable;
    result.tuples.push_back(std::move(t));
  }
  return result;
}

Json ConsensusStageStats::to_json() const {
  return Json{{"considered", considered},
              {"kept", kept},
              {"judges_disagree", judges_disagree},
              {"picked_rejected", picked_rejected},
              {"invalid_judge_output", invalid_judge_output},
              {"judge_unavailable", judge_unavailable},
              {"skipped", skipped}};
}

ConsensusStageStats run_consensus(std::vector<PreferenceTuple>& tuples, const JudgeSetup& judges,
                                  Rng& rng, std::size_t max_inflight, bool enabled) {
  ConsensusStageStats stats;
  stats.skipped = !enabled;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    if (tuples[i].audit.agreement_passed) eligible.push_back(i);
  }
  stats.considered = eligible.size();

  if (!enabled) {
    for (std::size_t i : eligible) {
      tuples[i].audit.consensus_skipped = true;
      tuples[i].audit.consensus_passed = false;
      tuples[i].audit.consensus_reason = "filter_disabled";
    }
    stats.kept = eligible.size();
    return stats;
  }

  std::vector<PresentationOrder> orders;
  orders.reserve(eligible.size());
  for (std::size_t k = 0; k < eligible.size(); ++k) {
    orders.push_back(rng.coin() ? PresentationOrder::chosen_first : PresentationOrder::rejected_first);
  }
  const auto results = ordered_parallel_map(eligible.size(), max_inflight, [&](std::size_t k) {
    return consensus_filter(tuples[eligible[k]], judges, orders[k]);
  });

  for (std::size_t k = 0; k < eligible.size(); ++k) {
    FilterAudit& a = tuples[eligible[k]].audit;
    const ConsensusResult& r = results[k];
    a.presentation_order = r.order;
    a.judge1_pick = r.judge1;
    a.judge2_pick = r.judge2;
    a.consensus_skipped = false;
    a.consensus_passed = r.decision.keep;
    a.consensus_reason = r.decision.reason;
    if (r.decision.keep) {
      ++stats.kept;
    } else if (r.decision.reason == "judge_unavailable") {
      ++stats.judge_unavailable;
    } else if (r.decision.reason == "invalid_judge_output") {
      ++stats.invalid_judge_output;
    } else if (r.decision.reason == "judges_disagree") {
      ++stats.judges_disagree;
    } else {
      ++stats.picked_rejected;
    }
  }
  return stats;
}

void write_tuples(const std::filesystem::path& path, const std::vector<PreferenceTuple>& tuples) {
  AtomicFileWriter w(path);
  for (const auto& t : tuples) w.write_line(dump_compact(t.to_json()));
  w.commit();
}

std::vector<PreferenceTuple> read_tuples(const std::filesystem::path& path) {
  std::vector<PreferenceTuple> out;
  for_each_jsonl(
      path, [&](std::size_t, Json j) { out.push_back(PreferenceTuple::from_json(j)); },
      [&](std::size_t line_no, std::string_view err) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + std::string(err));
      });
  return out;
}

std::size_t export_preference_dataset(const std::vector<PreferenceTuple>& tuples,
                                      const std::filesystem::path& path) {
  for (const auto& t : tuples) {
    if (!t.exportable()) {
      throw std::logic_error("tuple " + t.doc_id + " reached export without passing both filters");
    }
  }
  AtomicFileWriter w(path);
  for (const auto& t : tuples) {
    OrderedJson rec;
    rec["prompt"] = t.prompt.rendered;
    rec["chosen"] = OrderedJson::array(
        {OrderedJson{{"role", "assistant"}, {"content", completion_content(t.chosen)}}});
    rec["rejected"] = OrderedJson::array(
        {OrderedJson{{"role", "assistant"}, {"content", completion_content(t.rejected)}}});
    w.write_line(dump_compact(rec));
  }
  w.commit();
  return tuples.size();
}

void write_audit(const std::vector<PreferenceTuple>& tuples, const std::filesystem::path& path) {
  AtomicFileWriter w(path);
  for (const auto& t : tuples) {
    Json j = t.to_json();
    OrderedJson rec;
    rec["doc_id"] = t.doc_id;
    rec["synthetic_label"] = to_string(t.synthetic_label);
    rec["chosen_label"] = j.at("chosen").at("predicted_label").get<std::string>();
    rec["rejected_label"] = j.at("rejected").at("predicted_label").get<std::string>();
    rec["audit"] = OrderedJson::parse(j.at("audit").dump());
    w.write_line(dump_compact(rec));
  }
  w.commit();
}

namespace {

llm::ChatMessage read_single_message(const Json& j, const char* field, std::size_t line_no) {
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("preference record " + std::to_string(line_no) + ": " + field + " " + what);
  };
  if (!j.is_array() || j.size() != 1) fail("must hold exactly one message");
  const Json& m = j[0];
  if (!m.is_object() || m.size() != 2 || !m.contains("role") || !m.contains("content") ||
      !m.at("role").is_string() || !m.at("content").is_string()) {
    fail("message must have exactly role and content");
  }
  if (m.at("role").get<std::string>() != "assistant") fail("role must be assistant");
  return {m.at("role").get<std::string>(), m.at("content").get<std::string>()};
}

}  // namespace

std::vector<PreferenceRecord> read_preference_dataset(const std::filesystem::path& path) {
  std::vector<PreferenceRecord> out;
  for_each_jsonl(
      path,
      [&](std::size_t line_no, Json j) {
        if (!j.is_object() || j.size() != 3 || !j.contains("prompt") || !j.at("prompt").is_string()) {
          throw std::runtime_error("preference record " + std::to_string(line_no) +
                                   ": expected exactly prompt, chosen, rejected");
        }
        out.push_back({j.at("prompt").get<std::string>(),
                       read_single_message(j.at("chosen"), "chosen", line_no),
                       read_single_message(j.at("rejected"), "rejected", line_no)});
      },
      [&](std::size_t line_no, std::string_view err) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + std::string(err));
      });
  return out;
}

}  // namespace claimcheck::prefs

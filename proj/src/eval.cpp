// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "claimcheck/completion.hpp"
#include "claimcheck/parallel.hpp"
#include "claimcheck/preference.hpp"
#include "claimcheck/text.hpp"

namespace claimcheck::eval {

BenchmarkSchema BenchmarkSchema::from_json(const Json& j) {
  BenchmarkSchema s;
  s.id_field = j.value("id", s.id_field);
  s.document_field = j.value("document", s.document_field);
  s.claim_field = j.value("claim", s.claim_field);
  s.label_field = j.value("label", s.label_field);
  if (j.contains("label_map")) {
    s.label_map.clear();
    for (const auto& [k, v] : j.at("label_map").items()) s.label_map[k] = parse_label(v.get<std::string>());
  }
  return s;
}

Json BenchmarkSchema::to_json() const {
  Json m = Json::object();
  for (const auto& [k, v] : label_map) m[k] = to_string(v);
  return Json{{"id", id_field},
              {"document", document_field},
              {"claim", claim_field},
              {"label", label_field},
              {"label_map", m}};
}

namespace {

std::optional<std::string> label_key(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<long long>(d))) return std::to_string(static_cast<long long>(d));
    return v.dump();
  }
  return std::nullopt;
}

}  // namespace

BenchLoadResult load_benchmark(const std::filesystem::path& path, const std::string& dataset_name,
                               const BenchmarkSchema& schema) {
  BenchLoadResult out;
  for_each_jsonl(
      path,
      [&](std::size_t line_no, Json rec) {
        if (!rec.is_object()) {
          ++out.skipped_malformed;
          return;
        }
        const auto doc = rec.find(schema.document_field);
        const auto claim = rec.find(schema.claim_field);
        const auto label = rec.find(schema.label_field);
        if (doc == rec.end() || claim == rec.end() || label == rec.end() || !doc->is_string() ||
            !claim->is_string() || text::trim(doc->get<std::string>()).empty() ||
            text::trim(claim->get<std::string>()).empty()) {
          ++out.skipped_malformed;
          return;
        }
        const auto key = label_key(*label);
        const auto mapped = key ? schema.label_map.find(*key) : schema.label_map.end();
        if (mapped == schema.label_map.end()) {
          ++out.skipped_unmapped;
          return;
        }
        BenchRecord r;
        r.dataset = dataset_name;
        r.record_id = std::to_string(line_no);
        if (const auto id = rec.find(schema.id_field); id != rec.end()) {
          if (id->is_string()) r.record_id = id->get<std::string>();
          else if (id->is_number_integer()) r.record_id = std::to_string(id->get<long long>());
        }
        r.document = doc->get<std::string>();
        r.claim = claim->get<std::string>();
        r.gold = mapped->second;
        out.records.push_back(std::move(r));
      },
      [&](std::size_t, std::string_view) { ++out.skipped_malformed; });
  return out;
}

std::string_view to_string(Prediction p) {
  switch (p) {
    case Prediction::grounded: return "grounded";
    case Prediction::hallucinated: return "hallucinated";
    case Prediction::invalid: return "invalid";
  }
  return "invalid";
}

Prediction parse_prediction(std::string_view s) {
  if (s == "grounded") return Prediction::grounded;
  if (s == "hallucinated") return Prediction::hallucinated;
  if (s == "invalid") return Prediction::invalid;
  throw std::invalid_argument("unknown prediction: " + std::string(s));
}

namespace {

Prediction to_prediction(Label l) {
  return l == Label::grounded ? Prediction::grounded : Prediction::hallucinated;
}

bool is_correct(Prediction p, Label gold) {
  return p != Prediction::invalid && p == to_prediction(gold);
}

}  // namespace

Json EvalVerdict::to_json() const {
  return Json{{"dataset", dataset},
              {"record_id", record_id},
              {"gold", to_string(gold)},
              {"predicted", to_string(predicted)},
              {"correct", correct},
              {"justification", justification},
              {"reasoning_trace", reasoning_trace},
              {"raw_response", raw_response},
              {"error_note", error_note}};
}

EvalVerdict EvalVerdict::from_json(const Json& j) {
  EvalVerdict v;
  v.dataset = j.value("dataset", std::string());
  v.record_id = j.at("record_id").get<std::string>();
  v.gold = parse_label(j.at("gold").get<std::string>());
  v.predicted = parse_prediction(j.at("predicted").get<std::string>());
  v.justification = j.value("justification", std::string());
  v.reasoning_trace = j.value("reasoning_trace", std::string());
  v.raw_response = j.value("raw_response", std::string());
  v.error_note = j.value("error_note", std::string());
  v.correct = is_correct(v.predicted, v.gold);
  return v;
}

EvalVerdict score_response(const BenchRecord& record, std::string_view raw_response) {
  EvalVerdict v;
  v.dataset = record.dataset;
  v.record_id = record.record_id;
  v.gold = record.gold;
  const prefs::Completion c = prefs::parse_completion(raw_response);
  v.raw_response = c.raw;
  if (c.parseable()) {
    v.predicted = to_prediction(*c.predicted_label);
    v.justification = c.justification;
    v.reasoning_trace = c.reasoning_trace;
  } else {
    v.predicted = Prediction::invalid;
  }
  v.correct = is_correct(v.predicted, v.gold);
  return v;
}

EvalVerdict classify_record(const BenchRecord& record, llm::ChatClient& client,
                            const llm::InferenceParams& params) {
  const auto prompt = prefs::build_classification_prompt(record.document, record.claim);
  const auto response = client.complete(prompt.rendered, params);
  if (!response.ok()) {
    EvalVerdict v;
    v.dataset = record.dataset;
    v.record_id = record.record_id;
    v.gold = record.gold;
    v.predicted = Prediction::invalid;
    v.error_note = "client error (" + std::string(llm::to_string(*response.error)) +
                   "): " + response.error_detail;
    v.correct = false;
    return v;
  }
  return score_response(record, response.content);
}

std::vector<EvalVerdict> classify_all(const std::vector<BenchRecord>& records,
                                      llm::ChatClient& client, const llm::InferenceParams& params,
                                      std::size_t max_inflight) {
  return ordered_parallel_map(records.size(), max_inflight, [&](std::size_t i) {
    return classify_record(records[i], client, params);
  });
}

Json ConfusionMatrix::to_json() const {
  return Json{{"tp", tp}, {"fn", fn}, {"tn", tn}, {"fp", fp}};
}

std::string_view to_string(InvalidPolicy p) {
  return p == InvalidPolicy::count_as_wrong ? "count_as_wrong" : "exclude";
}

InvalidPolicy parse_invalid_policy(std::string_view s) {
  if (s == "count_as_wrong") return InvalidPolicy::count_as_wrong;
  if (s == "exclude") return InvalidPolicy::exclude;
  throw std::invalid_argument("unknown invalid policy: " + std::string(s));
}

ConfusionMatrix confusion(const std::vector<EvalVerdict>& verdicts, InvalidPolicy policy) {
  ConfusionMatrix cm;
  for (const auto& v : verdicts) {
    if (v.predicted == Prediction::invalid && policy == InvalidPolicy::exclude) continue;
    const bool gold_positive = v.gold == Label::hallucinated;
    Prediction p = v.predicted;
    if (p == Prediction::invalid) {
      // Wrong cell for the gold class.
      p = gold_positive ? Prediction::grounded : Prediction::hallucinated;
    }
    const bool pred_positive = p == Prediction::hallucinated;
    if (gold_positive) {
      ++(pred_positive ? cm.tp : cm.fn);
    } else {
      ++(pred_positive ? cm.fp : cm.tn);
    }
  }
  return cm;
}

std::size_t count_invalid(const std::vector<EvalVerdict>& verdicts) {
  return static_cast<std::size_t>(std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) {
    return v.predicted == Prediction::invalid;
  }));
}

double true_positive_rate(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fn == 0) throw UndefinedMetric("no positive (hallucinated) records");
  return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

double true_negative_rate(const ConfusionMatrix& cm) {
  if (cm.tn + cm.fp == 0) throw UndefinedMetric("no negative (grounded) records");
  return static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
}

double balanced_accuracy(const ConfusionMatrix& cm) {
  return 0.5 * (true_positive_rate(cm) + true_negative_rate(cm));
}

double aggregate(const std::map<std::string, double>& per_dataset) {
  if (per_dataset.empty()) throw std::invalid_argument("aggregate over no datasets");
  double sum = 0.0;
  for (const auto& [name, v] : per_dataset) sum += v;
  return sum / static_cast<double>(per_dataset.size());
}

double aggregate_grouped(const std::map<std::string, double>& per_dataset,
                         const std::map<std::string, std::string>& groups) {
  if (per_dataset.empty()) throw std::invalid_argument("aggregate over no datasets");
  std::map<std::string, std::pair<double, std::size_t>> by_group;
  for (const auto& [name, v] : per_dataset) {
    const auto g = groups.find(name);
    auto& acc = by_group[g == groups.end() ? name : g->second];
    acc.first += v;
    ++acc.second;
  }
  std::map<std::string, double> group_means;
  for (const auto& [g, acc] : by_group) group_means[g] = acc.first / static_cast<double>(acc.second);
  return aggregate(group_means);
}

std::vector<EvalVerdict> read_recorded_predictions(const std::filesystem::path& path,
                                                   const std::string& dataset_name) {
  std::vector<EvalVerdict> out;
  for_each_jsonl(
      path,
      [&](std::size_t line_no, Json j) {
        BenchRecord r;
        r.dataset = dataset_name;
        r.record_id = j.contains("record_id") ? j.at("record_id").get<std::string>()
                                              : std::to_string(line_no);
        r.gold = parse_label(j.at("gold").get<std::string>());
        if (j.contains("raw_response")) {
          out.push_back(score_response(r, j.at("raw_response").get<std::string>()));
          return;
        }
        EvalVerdict v;
        v.dataset = dataset_name;
        v.record_id = r.record_id;
        v.gold = r.gold;
        v.predicted = parse_prediction(j.at("predicted").get<std::string>());
        v.correct = is_correct(v.predicted, v.gold);
        out.push_back(std::move(v));
      },
      [&](std::size_t line_no, std::string_view err) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + std::string(err));
      });
  return out;
}

void write_verdicts(const std::filesystem::path& path, const std::vector<EvalVerdict>& verdicts) {
  AtomicFileWriter w(path);
  for (const auto& v : verdicts) w.write_line(dump_compact(v.to_json()));
  w.commit();
}

std::vector<EvalVerdict> read_verdicts(const std::filesystem::path& path) {
  std::vector<EvalVerdict> out;
  for_each_jsonl(
      path, [&](std::size_t, Json j) { out.push_back(EvalVerdict::from_json(j)); },
      [&](std::size_t line_no, std::string_view err) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + std::string(err));
      });
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(GEvalDimension d) {
  switch (d) {
    case GEvalDimension::relevance: return "relevance";
    case GEvalDimension::coherence: return "coherence";
    case GEvalDimension::consistency: return "consistency";
    case GEvalDimension::fluency: return "fluency";
  }
  return "relevance";
}

double scale_max(GEvalDimension d) { return d == GEvalDimension::fluency ? 3.0 : 5.0; }

double GEvalScore::get(GEvalDimension d) const {
  switch (d) {
    case GEvalDimension::relevance: return relevance;
    case GEvalDimension::coherence: return coherence;
    case GEvalDimension::consistency: return consistency;
    case GEvalDimension::fluency: return fluency;
  }
  return 0;
}

void GEvalScore::set(GEvalDimension d, double v) {
  switch (d) {
    case GEvalDimension::relevance: relevance = v; break;
    case GEvalDimension::coherence: coherence = v; break;
    case GEvalDimension::consistency: consistency = v; break;
    case GEvalDimension::fluency: fluency = v; break;
  }
}

Json GEvalScore::to_json() const {
  return Json{{"relevance", relevance},
              {"coherence", coherence},
              {"consistency", consistency},
              {"fluency", fluency}};
}

GEvalPrompts GEvalPrompts::defaults() {
  const std::string header =
      "You will be given a source document, a claim about it, and a justification explaining "
      "whether the claim is supported by the document.\n\n";
  const std::string footer =
      "\n\nSource document:\n{{document}}\n\nClaim:\n{{claim}}\n\nJustification:\n"
      "{{justification}}\n\nAnswer with the score only.";
  GEvalPrompts p;
  p.templates[GEvalDimension::relevance] =
      header +
      "Evaluation criterion - Relevance (1-5): the justification addresses the claim and uses only "
      "the parts of the document that bear on it. 1 means unrelated, 5 means fully focused." +
      footer;
  p.templates[GEvalDimension::coherence] =
      header +
      "Evaluation criterion - Coherence (1-5): the justification is well structured and its "
      "reasoning steps follow from one another. 1 means incoherent, 5 means fully coherent." +
      footer;
  p.templates[GEvalDimension::consistency] =
      header +
      "Evaluation criterion - Consistency (1-5): every statement in the justification is "
      "factually consistent with the document. 1 means mostly unsupported, 5 means fully "
      "consistent." +
      footer;
  p.templates[GEvalDimension::fluency] =
      header +
      "Evaluation criterion - Fluency (1-3): grammar, spelling and readability of the "
      "justification. 1 means poor, 3 means good." +
      footer;
  return p;
}

GEvalPrompts GEvalPrompts::load(const std::filesystem::path& path) {
  GEvalPrompts p = defaults();
  const Json j = Json::parse(read_text_file(path));
  for (GEvalDimension d : kGEvalDimensions) {
    const std::string key(to_string(d));
    if (j.contains(key)) p.templates[d] = j.at(key).get<std::string>();
  }
  return p;
}

std::string GEvalPrompts::render(GEvalDimension d, std::string_view document,
                                 std::string_view claim, std::string_view justification) const {
  std::string out = templates.at(d);
  auto substitute = [&](std::string_view key, std::string_view value) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
      out.replace(pos, key.size(), value);
    }
  };
  substitute("{{document}}", document);
  substitute("{{claim}}", claim);
  substitute("{{justification}}", justification);
  return out;
}

std::optional<double> extract_score(std::string_view raw) {
  const auto split = prefs::split_think_block(raw);
  const std::string body = split ? split->remainder : std::string(raw);
  static const std::regex kNumber(R"([-+]?\d+(?:\.\d+)?)");
  std::smatch m;
  if (!std::regex_search(body, m, kNumber)) return std::nullopt;
  return std::stod(m.str());
}

GEvalOutcome geval_justification(std::string_view document, std::string_view claim,
                                 std::string_view justification, llm::ChatClient& judge,
                                 const llm::InferenceParams& params, const GEvalPrompts& prompts) {
  GEvalOutcome out;
  GEvalScore score;
  for (GEvalDimension d : kGEvalDimensions) {
    const auto response = judge.complete(prompts.render(d, document, claim, justification), params);
    if (!response.ok()) {
      out.status = GEvalStatus::judge_unavailable;
      out.failed_dimension = d;
      return out;
    }
    const auto value = extract_score(response.content);
    if (!value) {
      out.status = GEvalStatus::non_numeric;
      out.failed_dimension = d;
      return out;
    }
    const double clamped = std::clamp(*value, 1.0, scale_max(d));
    if (clamped != *value) {
      std::ostringstream w;
      w << to_string(d) << " score " << *value << " clamped to " << clamped;
      out.warnings.push_back(w.str());
    }
    score.set(d, clamped);
  }
  out.score = score;
  return out;
}

Json GEvalSummary::to_json() const {
  return Json{{"scored", scored},
              {"skipped_unavailable", skipped_unavailable},
              {"dropped_non_numeric", dropped_non_numeric},
              {"clamped", clamped},
              {"mean", mean.to_json()}};
}

GEvalSummary summarize_geval(const std::vector<GEvalOutcome>& outcomes) {
  GEvalSummary s;
  GEvalScore sum{0, 0, 0, 0};
  for (const auto& o : outcomes) {
    s.clamped += o.warnings.size();
    if (o.status == GEvalStatus::judge_unavailable) {
      ++s.skipped_unavailable;
      continue;
    }
    if (o.status == GEvalStatus::non_numeric) {
      ++s.dropped_non_numeric;
      continue;
    }
    ++s.scored;
    for (GEvalDimension d : kGEvalDimensions) sum.set(d, sum.get(d) + o.score->get(d));
  }
  if (s.scored > 0) {
    for (GEvalDimension d : kGEvalDimensions) s.mean.set(d, sum.get(d) / static_cast<double>(s.scored));
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

template <typename F>
std::optional<double> defined(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json DatasetResult::to_json() const {
  return Json{{"name", name},
              {"records", records},
              {"invalid", invalid},
              {"confusion", matrix.to_json()},
              {"confusion_excluding_invalid", matrix_excluding.to_json()},
              {"tpr", optional_number(tpr)},
              {"tnr", optional_number(tnr)},
              {"bacc", optional_number(bacc)},
              {"bacc_excluding_invalid", optional_number(bacc_excluding_invalid)}};
}

DatasetResult summarize_dataset(const std::string& name, const std::vector<EvalVerdict>& verdicts) {
  DatasetResult r;
  r.name = name;
  r.records = verdicts.size();
  r.invalid = count_invalid(verdicts);
  r.matrix = confusion(verdicts, InvalidPolicy::count_as_wrong);
  r.matrix_excluding = confusion(verdicts, InvalidPolicy::exclude);
  r.tpr = defined([&] { return true_positive_rate(r.matrix); });
  r.tnr = defined([&] { return true_negative_rate(r.matrix); });
  r.bacc = defined([&] { return balanced_accuracy(r.matrix); });
  r.bacc_excluding_invalid = defined([&] { return balanced_accuracy(r.matrix_excluding); });
  return r;
}

EvalReport build_report(const std::vector<DatasetResult>& datasets, InvalidPolicy policy,
                        const std::map<std::string, std::string>& groups) {
  EvalReport report;
  report.datasets = datasets;
  report.policy = policy;
  report.groups = groups;
  std::map<std::string, double> values;
  for (const auto& d : datasets) {
    const auto& v = policy == InvalidPolicy::count_as_wrong ? d.bacc : d.bacc_excluding_invalid;
    if (v) values[d.name] = *v;
  }
  if (!values.empty()) report.macro_bacc = aggregate_grouped(values, groups);
  return report;
}

Json EvalReport::to_json() const {
  Json ds = Json::array();
  for (const auto& d : datasets) ds.push_back(d.to_json());
  Json j{{"datasets", ds},
         {"invalid_policy", to_string(policy)},
         {"groups", groups},
         {"macro_bacc", optional_number(macro_bacc)}};
  if (geval) j["geval"] = geval->to_json();
  return j;
}

std::string EvalReport::render_table() const {
  std::ostringstream out;
  auto pct = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(2) << *v * 100.0;
    } else {
      s << "n/a";
    }
    return s.str();
  };
  out << std::left << std::setw(24) << "dataset" << std::right << std::setw(8) << "n"
      << std::setw(8) << "invalid" << std::setw(8) << "TP" << std::setw(8) << "FN" << std::setw(8)
      << "TN" << std::setw(8) << "FP" << std::setw(8) << "TPR" << std::setw(8) << "TNR"
      << std::setw(8) << "BAcc" << "\n";
  for (const auto& d : datasets) {
    const auto& cm = policy == InvalidPolicy::count_as_wrong ? d.matrix : d.matrix_excluding;
    const auto& bacc = policy == InvalidPolicy::count_as_wrong ? d.bacc : d.bacc_excluding_invalid;
    std::optional<double> tpr, tnr;
    tpr = defined([&] { return true_positive_rate(cm); });
    tnr = defined([&] { return true_negative_rate(cm); });
    out << std::left << std::setw(24) << d.name << std::right << std::setw(8) << d.records
        << std::setw(8) << d.invalid << std::setw(8) << cm.tp << std::setw(8) << cm.fn
        << std::setw(8) << cm.tn << std::setw(8) << cm.fp << std::setw(8) << pct(tpr)
        << std::setw(8) << pct(tnr) << std::setw(8) << pct(bacc) << "\n";
  }
  out << "macro BAcc (" << to_string(policy) << "): " << pct(macro_bacc) << "\n";
  if (geval) {
    out << std::fixed << std::setprecision(2) << "justification scores over " << geval->scored
        << " records: relevance " << geval->mean.relevance << ", coherence "
        << geval->mean.coherence << ", consistency " << geval->mean.consistency << ", fluency "
        << geval->mean.fluency << "\n";
  }
  return out.str();
}

}  // namespace claimcheck::eval

// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "claimcheck/curation.hpp"
#include "claimcheck/digest.hpp"
#include "claimcheck/parallel.hpp"
#include "claimcheck/preference.hpp"
#include "claimcheck/random.hpp"
#include "claimcheck/reformation.hpp"

namespace claimcheck::pipeline {

namespace fs = std::filesystem;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::curate: return "curate";
    case Stage::reform: return "reform";
    case Stage::claims: return "claims";
    case Stage::prefs: return "prefs";
    case Stage::filter: return "filter";
    case Stage::export_: return "export";
    case Stage::eval: return "eval";
    case Stage::report: return "report";
  }
  return "ingest";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  throw std::invalid_argument("unknown stage: " + std::string(s));
}

std::optional<Stage> upstream(Stage s) {
  switch (s) {
    case Stage::ingest: return std::nullopt;
    case Stage::curate: return Stage::ingest;
    case Stage::reform: return Stage::curate;
    case Stage::claims: return Stage::reform;
    case Stage::prefs: return Stage::claims;
    case Stage::filter: return Stage::prefs;
    case Stage::export_: return Stage::filter;
    case Stage::eval: return std::nullopt;
    case Stage::report: return Stage::eval;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

const std::map<std::string, std::string>& default_outputs() {
  static const std::map<std::string, std::string> outputs = {
      {"ingest", "documents.jsonl"},   {"curate", "clean.jsonl"},
      {"reform", "reformed.jsonl"},    {"claims", "claims.jsonl"},
      {"prefs", "tuples.jsonl"},       {"filter", "filtered.jsonl"},
      {"export", "preferences.jsonl"}, {"audit", "preferences.audit.jsonl"},
      {"eval", "verdicts.jsonl"},      {"report", "report.json"},
      {"report_table", "report.txt"},
  };
  return outputs;
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("config field '") + key + "': " + e.what());
  }
}

void require_object(const Json& j, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be an object");
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& j, const fs::path& base_dir) {
  require_object(j, "config");
  PipelineConfig c;
  c.base_dir = base_dir;
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.work_dir = get_or<std::string>(j, "work_dir", c.work_dir.string());
  c.corpus = get_or<std::string>(j, "corpus", "");
  if (j.contains("corpus_schema")) c.corpus_schema = corpus::CorpusSchema::from_json(j.at("corpus_schema"));
  c.sample_size = get_or<std::size_t>(j, "sample_size", c.sample_size);

  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    require_object(t, "thresholds");
    c.thresholds.language = get_or(t, "language", c.thresholds.language);
    c.thresholds.min_words = get_or(t, "min_words", c.thresholds.min_words);
    c.thresholds.min_sentences = get_or(t, "min_sentences", c.thresholds.min_sentences);
    c.thresholds.max_token_len = get_or(t, "max_token_len", c.thresholds.max_token_len);
    c.thresholds.min_line_words = get_or(t, "min_line_words", c.thresholds.min_line_words);
    c.thresholds.shingle_size = get_or(t, "shingle_size", c.thresholds.shingle_size);
  }
  if (j.contains("quotas")) {
    const auto& q = j.at("quotas");
    require_object(q, "quotas");
    c.quotas.grounded = get_or(q, "grounded", c.quotas.grounded);
    c.quotas.intrinsic = get_or(q, "intrinsic", c.quotas.intrinsic);
    c.quotas.extrinsic = get_or(q, "extrinsic", c.quotas.extrinsic);
  }
  if (j.contains("concurrency")) {
    const auto& k = j.at("concurrency");
    require_object(k, "concurrency");
    c.concurrency.max_inflight = get_or(k, "max_inflight", c.concurrency.max_inflight);
    c.concurrency.global_inflight = get_or(k, "global_inflight", c.concurrency.global_inflight);
    c.concurrency.workers = get_or(k, "workers", c.concurrency.workers);
  }
  c.unsafe_wordlist = get_or<std::string>(j, "unsafe_wordlist", "");
  c.styles = get_or<std::string>(j, "styles", "");
  c.judge_examples = get_or<std::string>(j, "judge_examples", "");
  c.outputs = default_outputs();
  if (j.contains("outputs")) {
    require_object(j.at("outputs"), "outputs");
    for (const auto& [k, v] : j.at("outputs").items()) {
      if (!c.outputs.count(k)) throw std::invalid_argument("unknown output: " + k);
      c.outputs[k] = v.get<std::string>();
    }
  }
  if (j.contains("endpoints")) {
    require_object(j.at("endpoints"), "endpoints");
    for (const auto& [slot, e] : j.at("endpoints").items()) {
      c.endpoints.emplace(slot, llm::EndpointConfig::from_json(slot, e, base_dir));
    }
  }
  c.consensus_filter = get_or(j, "consensus_filter", c.consensus_filter);

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    require_object(e, "eval");
    c.eval.slot = get_or(e, "slot", c.eval.slot);
    c.eval.mode = llm::parse_mode(get_or<std::string>(e, "mode", "think"));
    c.eval.policy = eval::parse_invalid_policy(get_or<std::string>(e, "invalid_policy", "count_as_wrong"));
    c.eval.groups = get_or(e, "groups", c.eval.groups);
    c.eval.geval = get_or(e, "geval", c.eval.geval);
    c.eval.geval_slot = get_or(e, "geval_slot", c.eval.geval_slot);
    c.eval.geval_prompts = get_or<std::string>(e, "geval_prompts", "");
    c.eval.geval_max_records = get_or(e, "geval_max_records", c.eval.geval_max_records);
    for (const auto& d : e.value("datasets", Json::array())) {
      EvalDataset ds;
      ds.name = d.at("name").get<std::string>();
      ds.path = d.at("path").get<std::string>();
      if (d.contains("schema")) ds.schema = eval::BenchmarkSchema::from_json(d.at("schema"));
      ds.recorded = d.value("recorded", false);
      c.eval.datasets.push_back(std::move(ds));
    }
  }
  c.validate();
  return c;
}

void apply_override(Json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw std::invalid_argument("override must look like key=value: " + std::string(assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  Json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw std::invalid_argument("empty key segment in override: " + key);
    if (!node->is_object()) *node = Json::object();
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

PipelineConfig PipelineConfig::load(const fs::path& path, const std::vector<std::string>& overrides) {
  Json j = Json::parse(read_text_file(path));
  for (const auto& o : overrides) apply_override(j, o);
  return from_json(j, path.parent_path());
}

void PipelineConfig::validate() const {
  quotas.validate();
  if (thresholds.language < 0.0 || thresholds.language > 1.0) {
    throw std::invalid_argument("thresholds.language must be within [0, 1]");
  }
  if (thresholds.shingle_size < 1) throw std::invalid_argument("thresholds.shingle_size must be >= 1");
  if (thresholds.min_sentences < 1) throw std::invalid_argument("thresholds.min_sentences must be >= 1");
  if (thresholds.max_token_len < 1) throw std::invalid_argument("thresholds.max_token_len must be >= 1");
  if (concurrency.max_inflight < 1 || concurrency.global_inflight < 1 || concurrency.workers < 1) {
    throw std::invalid_argument("concurrency bounds must be >= 1");
  }
  if (sample_size < 1) throw std::invalid_argument("sample_size must be >= 1");
  std::set<std::string> names;
  for (const auto& d : eval.datasets) {
    if (d.name.empty()) throw std::invalid_argument("eval dataset without a name");
    if (!names.insert(d.name).second) throw std::invalid_argument("duplicate eval dataset: " + d.name);
    if (d.path.empty()) throw std::invalid_argument("eval dataset " + d.name + " has no path");
  }
}

fs::path PipelineConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

fs::path PipelineConfig::output(std::string_view name) const {
  return resolve(work_dir) / outputs.at(std::string(name));
}

fs::path PipelineConfig::manifest_path(Stage s) const {
  return resolve(work_dir) / "manifests" / (std::string(to_string(s)) + ".json");
}

const llm::EndpointConfig& PipelineConfig::endpoint(const std::string& slot) const {
  const auto it = endpoints.find(slot);
  if (it == endpoints.end()) throw std::invalid_argument("endpoint slot not configured: " + slot);
  return it->second;
}

// ---------------------------------------------------------------------------
// Manifests and digests

Json StageManifest::to_json() const {
  return Json{{"stage", stage},
              {"input_digest", input_digest},
              {"output_digest", output_digest},
              {"config_digest", config_digest},
              {"counts", counts},
              {"timestamp", timestamp},
              {"outputs", outputs}};
}

StageManifest StageManifest::from_json(const Json& j) {
  StageManifest m;
  m.stage = j.at("stage").get<std::string>();
  m.input_digest = j.at("input_digest").get<std::string>();
  m.output_digest = j.at("output_digest").get<std::string>();
  m.config_digest = j.at("config_digest").get<std::string>();
  m.counts = j.value("counts", Json::object());
  m.timestamp = j.value("timestamp", std::string());
  m.outputs = j.value("outputs", std::vector<std::string>{});
  return m;
}

std::optional<StageManifest> read_manifest(const PipelineConfig& config, Stage s) {
  const auto path = config.manifest_path(s);
  if (!fs::exists(path)) return std::nullopt;
  try {
    return StageManifest::from_json(Json::parse(read_text_file(path)));
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable manifests count as absent
  }
}

std::vector<fs::path> stage_outputs(const PipelineConfig& config, Stage s) {
  switch (s) {
    case Stage::export_: return {config.output("export"), config.output("audit")};
    case Stage::report: return {config.output("report"), config.output("report_table")};
    default: return {config.output(to_string(s))};
  }
}

namespace {

std::string file_digest_or_missing(const fs::path& p) {
  return fs::exists(p) ? file_sha256_hex(p) : std::string("missing");
}

}  // namespace

std::string outputs_digest(const std::vector<fs::path>& files) {
  std::string joined;
  for (const auto& f : files) joined += f.filename().string() + ":" + file_digest_or_missing(f) + "\n";
  return sha256_hex(joined);
}

namespace {

Json endpoint_fingerprint(const PipelineConfig& config, const std::string& slot) {
  const auto it = config.endpoints.find(slot);
  if (it == config.endpoints.end()) return nullptr;
  Json j = it->second.to_json();
  if (!it->second.mock_script.empty()) {
    // Content, not location, decides whether mock output can change.
    j["mock_script"] = file_digest_or_missing(it->second.mock_script);
  }
  return j;
}

Json stage_config_json(const PipelineConfig& c, Stage s) {
  const auto& t = c.thresholds;
  switch (s) {
    case Stage::ingest: {
      const auto& sc = c.corpus_schema;
      return Json{{"seed", c.seed},
                  {"schema", {sc.id_field, sc.text_field, sc.language_score_field, sc.url_field}},
                  {"language", t.language},
                  {"sample_size", c.sample_size}};
    }
    case Stage::curate:
      return Json{{"min_words", t.min_words},         {"min_sentences", t.min_sentences},
                  {"max_token_len", t.max_token_len}, {"min_line_words", t.min_line_words},
                  {"shingle_size", t.shingle_size}};
    case Stage::reform:
      return Json{{"seed", c.seed}, {"dr", endpoint_fingerprint(c, "dr")}};
    case Stage::claims:
      return Json{{"seed", c.seed},
                  {"cg", endpoint_fingerprint(c, "cg")},
                  {"quotas", {c.quotas.grounded, c.quotas.intrinsic, c.quotas.extrinsic}}};
    case Stage::prefs:
      return Json{{"pg_large", endpoint_fingerprint(c, "pg_large")},
                  {"pg_small", endpoint_fingerprint(c, "pg_small")}};
    case Stage::filter:
      return Json{{"seed", c.seed},
                  {"consensus_filter", c.consensus_filter},
                  {"ie1", c.consensus_filter ? endpoint_fingerprint(c, "ie1") : Json(nullptr)},
                  {"ie2", c.consensus_filter ? endpoint_fingerprint(c, "ie2") : Json(nullptr)}};
    case Stage::export_: return Json::object();
    case Stage::eval: {
      Json ds = Json::array();
      for (const auto& d : c.eval.datasets) {
        ds.push_back({{"name", d.name}, {"schema", d.schema.to_json()}, {"recorded", d.recorded}});
      }
      return Json{{"datasets", ds},
                  {"mode", llm::to_string(c.eval.mode)},
                  {"endpoint", endpoint_fingerprint(c, c.eval.slot)}};
    }
    case Stage::report:
      return Json{{"policy", eval::to_string(c.eval.policy)},
                  {"groups", c.eval.groups},
                  {"geval", c.eval.geval},
                  {"geval_max_records", c.eval.geval_max_records},
                  {"judge", c.eval.geval ? endpoint_fingerprint(c, c.eval.geval_slot) : Json(nullptr)}};
  }
  return Json::object();
}

// External files a stage reads besides its upstream output.
std::vector<fs::path> side_inputs(const PipelineConfig& c, Stage s) {
  switch (s) {
    case Stage::ingest: return {c.resolve(c.corpus)};
    case Stage::curate: return {c.resolve(c.unsafe_wordlist)};
    case Stage::reform:
      return c.styles.empty() ? std::vector<fs::path>{} : std::vector<fs::path>{c.resolve(c.styles)};
    case Stage::filter:
      return c.judge_examples.empty() || !c.consensus_filter
                 ? std::vector<fs::path>{}
                 : std::vector<fs::path>{c.resolve(c.judge_examples)};
    case Stage::eval: {
      std::vector<fs::path> files;
      for (const auto& d : c.eval.datasets) files.push_back(c.resolve(d.path));
      return files;
    }
    case Stage::report:
      return c.eval.geval && !c.eval.geval_prompts.empty()
                 ? std::vector<fs::path>{c.resolve(c.eval.geval_prompts)}
                 : std::vector<fs::path>{};
    default: return {};
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void log_line(const RunOptions& o, const std::string& line) {
  if (o.log) *o.log << line << '\n';
}

}  // namespace

std::string config_digest(const PipelineConfig& config, Stage s) {
  return sha256_hex(stage_config_json(config, s).dump());
}

// ---------------------------------------------------------------------------
// Stage bodies

namespace {

struct Clients {
  std::shared_ptr<llm::InflightLimiter> global;
  std::map<std::string, std::unique_ptr<llm::ChatClient>> by_slot;

  llm::ChatClient& get(const PipelineConfig& config, const std::string& slot) {
    auto& c = by_slot[slot];
    if (!c) {
      c = llm::make_client(config.endpoint(slot));
      c->set_global_limiter(global);
    }
    return *c;
  }
};

llm::InferenceParams think_params(const PipelineConfig& config, const std::string& slot) {
  const auto& p = config.endpoint(slot).params;
  if (p.mode != llm::Mode::think) {
    throw std::invalid_argument("endpoint " + slot + " must run in think mode");
  }
  return p;
}

void require_output(std::size_t produced, std::size_t input, std::string_view what) {
  if (input > 0 && produced == 0) {
    throw std::runtime_error(std::string(what) + ": no records produced from " + std::to_string(input) +
                             " inputs");
  }
}

Json run_ingest(const PipelineConfig& c) {
  corpus::IngestOptions o;
  o.schema = c.corpus_schema;
  o.language_threshold = c.thresholds.language;
  o.sample_size = c.sample_size;
  o.seed = Rng::substream(c.seed, "ingest").next();
  auto result = corpus::ingest(c.resolve(c.corpus), o);
  corpus::write_documents(c.output("ingest"), result.documents);
  return result.stats.to_json();
}

Json run_curate(const PipelineConfig& c) {
  if (c.unsafe_wordlist.empty()) throw std::invalid_argument("unsafe_wordlist is not configured");
  const auto wordlist = curation::UnsafeWordlist::load(c.resolve(c.unsafe_wordlist));
  curation::CurationOptions o;
  o.quality.min_sentences = c.thresholds.min_sentences;
  o.quality.max_token_chars = c.thresholds.max_token_len;
  o.quality.min_line_words = c.thresholds.min_line_words;
  o.min_words = c.thresholds.min_words;
  o.shingle_size = c.thresholds.shingle_size;
  o.workers = c.concurrency.workers;
  auto result = curation::curate(corpus::read_documents(c.output("ingest")), wordlist, o);
  corpus::write_documents(c.output("curate"), result.documents);
  return result.report.to_json();
}

Json run_reform(const PipelineConfig& c, Clients& clients) {
  const auto registry = c.styles.empty() ? reformation::StyleRegistry::builtin()
                                         : reformation::StyleRegistry::load(c.resolve(c.styles));
  const auto docs = corpus::read_documents(c.output("curate"));
  Rng rng = Rng::substream(c.seed, "reform");
  auto result = reformation::reform_all(docs, rng, clients.get(c, "dr"), c.endpoint("dr").params,
                                        c.concurrency.max_inflight, registry);
  require_output(result.records.size(), docs.size(), "reform");
  reformation::write_reform_records(c.output("reform"), result.records);
  return result.stats_json();
}

Json run_claims(const PipelineConfig& c, Clients& clients) {
  std::vector<corpus::Document> docs;
  for (const auto& r : reformation::read_reform_records(c.output("reform"))) docs.push_back(r.to_document());
  Rng rng = Rng::substream(c.seed, "claims");
  auto result = claims::generate_claims(docs, rng, clients.get(c, "cg"), c.endpoint("cg").params,
                                        c.concurrency.max_inflight, c.quotas);
  require_output(result.triplets.size(), docs.size(), "claims");
  claims::write_triplets(c.output("claims"), result.triplets);
  return result.stats_json();
}

Json run_prefs(const PipelineConfig& c, Clients& clients) {
  const auto triplets = claims::read_triplets(c.output("claims"));
  auto result = prefs::build_pairs(triplets, clients.get(c, "pg_large"), clients.get(c, "pg_small"),
                                   think_params(c, "pg_large"), think_params(c, "pg_small"),
                                   c.concurrency.max_inflight);
  require_output(result.tuples.size(), triplets.size(), "prefs");
  prefs::write_tuples(c.output("prefs"), result.tuples);
  return result.stats_json();
}

Json run_filter(const PipelineConfig& c, Clients& clients) {
  auto tuples = prefs::read_tuples(c.output("prefs"));
  prefs::JudgeSetup judges;
  if (c.consensus_filter) {
    judges.judge1 = &clients.get(c, "ie1");
    judges.judge2 = &clients.get(c, "ie2");
    judges.params1 = c.endpoint("ie1").params;
    judges.params2 = c.endpoint("ie2").params;
    if (!c.judge_examples.empty()) judges.examples = prefs::load_judge_examples(c.resolve(c.judge_examples));
  }
  Rng rng = Rng::substream(c.seed, "filter");
  const auto stats = prefs::run_consensus(tuples, judges, rng, c.concurrency.max_inflight, c.consensus_filter);
  prefs::write_tuples(c.output("filter"), tuples);
  return stats.to_json();
}

Json run_export(const PipelineConfig& c) {
  const auto tuples = prefs::read_tuples(c.output("filter"));
  std::vector<prefs::PreferenceTuple> kept;
  for (const auto& t : tuples) {
    if (t.exportable()) kept.push_back(t);
  }
  const auto written = prefs::export_preference_dataset(kept, c.output("export"));
  prefs::write_audit(tuples, c.output("audit"));
  return Json{{"input", tuples.size()}, {"exported", written}, {"dropped", tuples.size() - written}};
}

Json run_eval(const PipelineConfig& c, Clients& clients) {
  if (c.eval.datasets.empty()) throw std::invalid_argument("no eval datasets configured");
  std::vector<eval::EvalVerdict> all;
  Json per_dataset = Json::object();
  for (const auto& d : c.eval.datasets) {
    std::vector<eval::EvalVerdict> verdicts;
    Json counts;
    if (d.recorded) {
      verdicts = eval::read_recorded_predictions(c.resolve(d.path), d.name);
    } else {
      const auto loaded = eval::load_benchmark(c.resolve(d.path), d.name, d.schema);
      counts["skipped_unmapped"] = loaded.skipped_unmapped;
      counts["skipped_malformed"] = loaded.skipped_malformed;
      // Evaluation runs the preset for the selected mode; transport fields
      // come from the endpoint.
      const auto& ep = c.endpoint(c.eval.slot).params;
      auto params = llm::preset(c.eval.mode);
      params.max_retries = ep.max_retries;
      params.timeout = ep.timeout;
      params.max_tokens = ep.max_tokens;
      verdicts = eval::classify_all(loaded.records, clients.get(c, c.eval.slot), params,
                                    c.concurrency.max_inflight);
    }
    counts["records"] = verdicts.size();
    counts["invalid"] = eval::count_invalid(verdicts);
    per_dataset[d.name] = counts;
    all.insert(all.end(), std::make_move_iterator(verdicts.begin()), std::make_move_iterator(verdicts.end()));
  }
  eval::write_verdicts(c.output("eval"), all);
  return Json{{"mode", llm::to_string(c.eval.mode)}, {"datasets", per_dataset}};
}

Json run_report(const PipelineConfig& c, Clients& clients) {
  const auto verdicts = eval::read_verdicts(c.output("eval"));
  std::vector<std::string> order;
  std::map<std::string, std::vector<eval::EvalVerdict>> by_dataset;
  for (const auto& v : verdicts) {
    auto [it, inserted] = by_dataset.try_emplace(v.dataset);
    if (inserted) order.push_back(v.dataset);
    it->second.push_back(v);
  }
  std::vector<eval::DatasetResult> results;
  for (const auto& name : order) results.push_back(eval::summarize_dataset(name, by_dataset[name]));
  auto report = eval::build_report(results, c.eval.policy, c.eval.groups);

  if (c.eval.geval) {
    // Justifications are scored against the benchmark records they explain.
    std::map<std::pair<std::string, std::string>, const eval::BenchRecord*> index;
    std::vector<eval::BenchLoadResult> loaded;
    for (const auto& d : c.eval.datasets) {
      if (!d.recorded) loaded.push_back(eval::load_benchmark(c.resolve(d.path), d.name, d.schema));
    }
    for (const auto& l : loaded) {
      for (const auto& r : l.records) index[{r.dataset, r.record_id}] = &r;
    }
    std::vector<std::pair<const eval::BenchRecord*, const eval::EvalVerdict*>> jobs;
    for (const auto& v : verdicts) {
      if (v.predicted == eval::Prediction::invalid || v.justification.empty()) continue;
      const auto it = index.find({v.dataset, v.record_id});
      if (it == index.end()) continue;
      if (c.eval.geval_max_records && jobs.size() >= c.eval.geval_max_records) break;
      jobs.emplace_back(it->second, &v);
    }
    const auto prompts = c.eval.geval_prompts.empty() ? eval::GEvalPrompts::defaults()
                                                      : eval::GEvalPrompts::load(c.resolve(c.eval.geval_prompts));
    auto& judge = clients.get(c, c.eval.geval_slot);
    const auto params = c.endpoint(c.eval.geval_slot).params;
    const auto outcomes = ordered_parallel_map(jobs.size(), c.concurrency.max_inflight, [&](std::size_t i) {
      return eval::geval_justification(jobs[i].first->document, jobs[i].first->claim,
                                       jobs[i].second->justification, judge, params, prompts);
    });
    report.geval = eval::summarize_geval(outcomes);
  }

  write_text_atomic(c.output("report"), report.to_json().dump(2) + "\n");
  write_text_atomic(c.output("report_table"), report.render_table());
  Json counts{{"datasets", results.size()}, {"records", verdicts.size()}};
  counts["macro_bacc"] = report.macro_bacc ? Json(*report.macro_bacc) : Json(nullptr);
  return counts;
}

Json execute(Stage s, const PipelineConfig& c) {
  Clients clients;
  clients.global = std::make_shared<llm::InflightLimiter>(c.concurrency.global_inflight);
  switch (s) {
    case Stage::ingest: return run_ingest(c);
    case Stage::curate: return run_curate(c);
    case Stage::reform: return run_reform(c, clients);
    case Stage::claims: return run_claims(c, clients);
    case Stage::prefs: return run_prefs(c, clients);
    case Stage::filter: return run_filter(c, clients);
    case Stage::export_: return run_export(c);
    case Stage::eval: return run_eval(c, clients);
    case Stage::report: return run_report(c, clients);
  }
  return Json::object();
}

}  // namespace

// ---------------------------------------------------------------------------
// Orchestration

StageRun run_stage(Stage s, const PipelineConfig& config, const RunOptions& options) {
  const std::string name(to_string(s));
  std::string input_material;

  if (const auto up = upstream(s)) {
    const std::string up_name(to_string(*up));
    const auto up_manifest = read_manifest(config, *up);
    const auto up_outputs = stage_outputs(config, *up);
    if (!up_manifest) {
      if (!options.force) {
        throw StageRefused(name + ": no manifest for upstream stage '" + up_name + "'; run it first");
      }
      input_material += up_name + ":" + outputs_digest(up_outputs) + "\n";
    } else {
      const auto actual = outputs_digest(up_outputs);
      if (actual != up_manifest->output_digest && !options.force) {
        throw StageRefused(name + ": output of '" + up_name +
                           "' changed since its manifest was written (expected " +
                           up_manifest->output_digest.substr(0, 12) + ", found " + actual.substr(0, 12) +
                           "); rerun '" + up_name + "' or pass --force");
      }
      input_material += up_name + ":" + actual + "\n";
    }
  }
  for (const auto& f : side_inputs(config, s)) {
    if (!fs::exists(f)) throw std::runtime_error(name + ": input not found: " + f.string());
    input_material += f.filename().string() + ":" + file_sha256_hex(f) + "\n";
  }

  StageManifest manifest;
  manifest.stage = name;
  manifest.input_digest = sha256_hex(input_material);
  manifest.config_digest = config_digest(config, s);
  const auto outputs = stage_outputs(config, s);

  if (!options.force) {
    if (const auto existing = read_manifest(config, s)) {
      if (existing->input_digest == manifest.input_digest &&
          existing->config_digest == manifest.config_digest &&
          existing->output_digest == outputs_digest(outputs)) {
        log_line(options, name + ": up to date");
        return {*existing, false};
      }
    }
  }

  log_line(options, name + ": running");
  // A stale manifest must not survive a failed rerun.
  fs::remove(config.manifest_path(s));
  manifest.counts = execute(s, config);
  manifest.output_digest = outputs_digest(outputs);
  manifest.timestamp = utc_timestamp();
  for (const auto& o : outputs) manifest.outputs.push_back(o.filename().string());
  write_text_atomic(config.manifest_path(s), manifest.to_json().dump(2) + "\n");
  log_line(options, name + ": done " + dump_compact(manifest.counts));
  return {manifest, true};
}

RunAllResult run_all(const PipelineConfig& config, const RunOptions& options) {
  RunAllResult result;
  std::vector<Stage> stages(kDataStages.begin(), kDataStages.end());
  if (!config.eval.datasets.empty()) {
    stages.push_back(Stage::eval);
    stages.push_back(Stage::report);
  }
  for (Stage s : stages) {
    try {
      result.runs.push_back(run_stage(s, config, options));
    } catch (const std::exception& e) {
      result.failed_stage = s;
      result.error = e.what();
      log_line(options, std::string(to_string(s)) + ": failed: " + e.what());
      break;
    }
  }
  return result;
}

}  // namespace claimcheck::pipeline

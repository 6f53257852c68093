// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/reformation.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "claimcheck/parallel.hpp"
#include "claimcheck/text.hpp"

namespace claimcheck::reformation {

StyleRegistry::StyleRegistry(std::vector<Style> styles) : styles_(std::move(styles)) {
  if (styles_.size() != kStyleCount) {
    throw std::invalid_argument("style registry needs exactly 18 styles, got " +
                                std::to_string(styles_.size()));
  }
  std::unordered_set<std::string> ids;
  for (const auto& s : styles_) {
    if (s.id.empty() || s.instruction.empty()) throw std::invalid_argument("style with empty field");
    if (!ids.insert(s.id).second) throw std::invalid_argument("duplicate style id: " + s.id);
  }
}

const StyleRegistry& StyleRegistry::builtin() {
  static const StyleRegistry kRegistry({
      {"paraphrase", "Paraphrase the following text while retaining its original meaning."},
      {"summarize", "Provide a concise summary of the following text."},
      {"expand", "Expand on the following text by adding more details and context."},
      {"news_article", "Rewrite the following information as a news article."},
      {"blog_post", "Transform the following text into an engaging blog post."},
      {"report", "Convert the following information into a formal report."},
      {"story", "Rewrite the following text as a narrative story."},
      {"dialogue", "Transform the following text into a dialogue between two characters."},
      {"letter", "Rewrite the following text as a formal letter."},
      {"social_media_post", "Transform the following text into a social media post."},
      {"script", "Transform the following text into a script for a short video or play."},
      {"interview",
       "Rewrite the following text as an interview between an interviewer and an expert."},
      {"product_description", "Transform the following text into a product description."},
      {"review", "Rewrite the following text as a review of a product or service."},
      {"news_summary", "Summarize the following article into a concise news brief."},
      {"formalize_news", "Rewrite the following content in a formal journalistic style."},
      {"meeting_summary", "Rewrite the following text as if it were a summary of a team meeting."},
      {"meeting_dialogue",
       "Rewrite the following content as a conversation between multiple meeting participants."},
  });
  return kRegistry;
}

StyleRegistry StyleRegistry::from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("style registry must be a JSON array");
  std::vector<Style> styles;
  for (const auto& e : j) {
    styles.push_back({e.at("id").get<std::string>(), e.at("instruction").get<std::string>()});
  }
  return StyleRegistry(std::move(styles));
}

StyleRegistry StyleRegistry::load(const std::filesystem::path& path) {
  return from_json(Json::parse(read_text_file(path)));
}

const Style& StyleRegistry::find(std::string_view id) const {
  const auto it = std::find_if(styles_.begin(), styles_.end(),
                               [&](const Style& s) { return s.id == id; });
  if (it == styles_.end()) throw std::out_of_range("unknown style: " + std::string(id));
  return *it;
}

bool StyleRegistry::contains(std::string_view id) const {
  return std::any_of(styles_.begin(), styles_.end(), [&](const Style& s) { return s.id == id; });
}

Json StyleRegistry::to_json() const {
  Json j = Json::array();
  for (const auto& s : styles_) j.push_back({{"id", s.id}, {"instruction", s.instruction}});
  return j;
}

const std::string& pick_style(Rng& rng, const StyleRegistry& registry) {
  return registry.at(static_cast<std::size_t>(rng.uniform_index(registry.size()))).id;
}

double sample_temperature(Rng& rng) { return rng.uniform(kMinTemperature, kMaxTemperature); }

Json ReformRecord::to_json() const {
  return Json{{"doc_id", doc_id},
              {"style_id", style_id},
              {"temperature", temperature},
              {"reformed_text", reformed_text},
              {"stage", "reformed"}};
}

ReformRecord ReformRecord::from_json(const Json& j) {
  return ReformRecord{j.at("doc_id").get<std::string>(), j.at("style_id").get<std::string>(),
                      j.at("temperature").get<double>(), j.at("reformed_text").get<std::string>()};
}

corpus::Document ReformRecord::to_document() const {
  corpus::Document d(doc_id, reformed_text);
  d.advance(corpus::Stage::reformed);
  return d;
}

std::string build_reform_prompt(const Style& style, std::string_view document_text) {
  std::string prompt = style.instruction;
  prompt += "\n\n";
  prompt += document_text;
  return prompt;
}

std::string_view to_string(ReformStatus s) {
  switch (s) {
    case ReformStatus::ok: return "ok";
    case ReformStatus::client_error: return "client_error";
    case ReformStatus::empty_response: return "empty_response";
  }
  return "ok";
}

ReformOutcome reform_document(const corpus::Document& doc, const std::string& style_id,
                              double temperature, llm::ChatClient& client,
                              const llm::InferenceParams& base, const StyleRegistry& registry) {
  if (doc.stage() != corpus::Stage::clean) {
    throw std::invalid_argument("reform_document: document " + doc.id() + " is not clean");
  }
  if (!(temperature >= kMinTemperature && temperature <= kMaxTemperature)) {
    throw std::invalid_argument("reform temperature outside [0.2, 0.7]");
  }
  const Style& style = registry.find(style_id);
  llm::InferenceParams params = base;
  params.temperature = temperature;

  const auto response = client.complete(build_reform_prompt(style, doc.text()), params);
  ReformOutcome out;
  if (!response.ok()) {
    out.status = ReformStatus::client_error;
    out.detail = std::string(llm::to_string(*response.error)) + ": " + response.error_detail;
    return out;
  }
  if (text::trim(response.content).empty()) {
    out.status = ReformStatus::empty_response;
    return out;
  }
  out.record = ReformRecord{doc.id(), style.id, temperature, response.content};
  return out;
}

Json ReformStageResult::stats_json() const {
  return Json{{"input", draws.size()},
              {"reformed", records.size()},
              {"skipped_client_error", skipped_client_error},
              {"skipped_empty", skipped_empty}};
}

ReformStageResult reform_all(const std::vector<corpus::Document>& docs, Rng& rng,
                             llm::ChatClient& client, const llm::InferenceParams& base,
                             std::size_t max_inflight, const StyleRegistry& registry) {
  ReformStageResult result;
  result.draws.reserve(docs.size());
  for (const auto& d : docs) {
    const std::string& style = pick_style(rng, registry);
    const double temperature = sample_temperature(rng);
    result.draws.push_back({d.id(), style, temperature, ReformStatus::ok});
  }

  auto outcomes = ordered_parallel_map(docs.size(), max_inflight, [&](std::size_t i) {
    return reform_document(docs[i], result.draws[i].style_id, result.draws[i].temperature, client,
                           base, registry);
  });

  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    result.draws[i].status = outcomes[i].status;
    switch (outcomes[i].status) {
      case ReformStatus::ok: result.records.push_back(std::move(*outcomes[i].record)); break;
      case ReformStatus::client_error: ++result.skipped_client_error; break;
      case ReformStatus::empty_response: ++result.skipped_empty; break;
    }
  }
  return result;
}

void write_reform_records(const std::filesystem::path& path, const std::vector<ReformRecord>& records) {
  AtomicFileWriter w(path);
  for (const auto& r : records) w.write_line(dump_compact(r.to_json()));
  w.commit();
}

std::vector<ReformRecord> read_reform_records(const std::filesystem::path& path) {
  std::vector<ReformRecord> out;
  for_each_jsonl(
      path, [&](std::size_t, Json j) { out.push_back(ReformRecord::from_json(j)); },
      [&](std::size_t line_no, std::string_view err) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + std::string(err));
      });
  return out;
}

}  // namespace claimcheck::reformation

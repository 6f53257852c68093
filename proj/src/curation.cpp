// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/curation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "claimcheck/parallel.hpp"
#include "claimcheck/text.hpp"

namespace claimcheck::curation {
namespace {

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Byte length of a closing quote/bracket starting at s[i], or 0.
std::size_t closing_mark_at(std::string_view s, std::size_t i) {
  const char c = s[i];
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  // U+2019 and U+201D.
  if (i + 2 < s.size() && static_cast<unsigned char>(c) == 0xE2 &&
      static_cast<unsigned char>(s[i + 1]) == 0x80) {
    const auto third = static_cast<unsigned char>(s[i + 2]);
    if (third == 0x99 || third == 0x9D) return 3;
  }
  return 0;
}

// Length of a trailing closing mark ending at the end of s, or 0.
std::size_t trailing_closing_mark(std::string_view s) {
  if (s.empty()) return 0;
  const char c = s.back();
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  if (s.size() >= 3 && static_cast<unsigned char>(s[s.size() - 3]) == 0xE2 &&
      static_cast<unsigned char>(s[s.size() - 2]) == 0x80) {
    const auto third = static_cast<unsigned char>(s.back());
    if (third == 0x99 || third == 0x9D) return 3;
  }
  return 0;
}

bool ends_with_terminal(std::string_view line) {
  while (!line.empty()) {
    if (is_terminal(line.back())) return true;
    const std::size_t mark = trailing_closing_mark(line);
    if (mark == 0) return false;
    line.remove_suffix(mark);
  }
  return false;
}

bool is_lower_ascii(char c) { return c >= 'a' && c <= 'z'; }
bool is_upper_ascii(char c) { return c >= 'A' && c <= 'Z'; }

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> kAbbrev = {
      "mr",  "mrs", "ms",  "dr",   "prof", "sr",  "jr",  "st",  "vs",  "etc", "e.g", "i.e",
      "inc", "ltd", "co",  "corp", "jan",  "feb", "mar", "apr", "jun", "jul", "aug", "sep",
      "sept", "oct", "nov", "dec", "no",  "fig",  "approx", "dept", "est", "u.s", "mt", "ave",
      "gen", "gov", "rev", "lt",  "col", "sgt", "capt", "cf",  "al"};
  return kAbbrev;
}

// Token immediately before position `dot` (exclusive), stripped of leading
// opening punctuation.
std::string_view token_before(std::string_view s, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !text::is_space(s[start - 1])) --start;
  std::string_view tok = s.substr(start, dot - start);
  while (!tok.empty() && (tok.front() == '(' || tok.front() == '"' || tok.front() == '\'' ||
                          tok.front() == '[')) {
    tok.remove_prefix(1);
  }
  return tok;
}

bool is_abbreviation(std::string_view token, const SplitOptions& options) {
  if (token.empty()) return false;
  if (token.size() == 1 && is_upper_ascii(token[0])) return options.single_letter_abbreviations;
  return abbreviations().count(text::to_lower_ascii(token)) > 0;
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

}  // namespace

UnsafeWordlist::UnsafeWordlist(std::vector<std::string> terms) {
  for (auto& t : terms) {
    const std::string norm = text::to_lower_ascii(text::collapse_whitespace(t));
    if (!norm.empty()) terms_.push_back(norm);
  }
  std::sort(terms_.begin(), terms_.end());
  terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
  if (terms_.empty()) throw std::invalid_argument("unsafe wordlist is empty");
}

UnsafeWordlist UnsafeWordlist::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open unsafe wordlist " + path.string());
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    terms.emplace_back(t);
  }
  return UnsafeWordlist(std::move(terms));
}

bool UnsafeWordlist::matches(std::string_view body) const {
  const std::string lowered = text::to_lower_ascii(body);
  const std::string_view hay = lowered;
  for (const auto& term : terms_) {
    for (std::size_t pos = hay.find(term); pos != std::string_view::npos;
         pos = hay.find(term, pos + 1)) {
      const bool left_ok = pos == 0 || !text::is_word_char(hay[pos - 1]);
      const std::size_t end = pos + term.size();
      const bool right_ok = end == hay.size() || !text::is_word_char(hay[end]);
      if (left_ok && right_ok) return true;
    }
  }
  return false;
}

bool contains_unsafe(const Document& doc, const UnsafeWordlist& wordlist) {
  return wordlist.matches(doc.text());
}

std::string_view to_string(QualityRule rule) {
  switch (rule) {
    case QualityRule::min_sentences: return "min_sentences";
    case QualityRule::terminal_punctuation: return "terminal_punctuation";
    case QualityRule::boilerplate: return "boilerplate";
    case QualityRule::long_token: return "long_token";
  }
  return "unknown";
}

std::vector<std::string> default_boilerplate_phrases() {
  return {"lorem ipsum",
          "we use cookies",
          "this website uses cookies",
          "this site uses cookies",
          "use of cookies",
          "accept cookies",
          "accept all cookies",
          "cookie policy",
          "cookie settings"};
}

std::optional<QualityRule> QualityVerdict::reason() const {
  for (QualityRule r : kQualityRules) {
    if (failed(r)) return r;
  }
  return std::nullopt;
}

QualityVerdict check_quality(const Document& doc, const QualityConfig& config) {
  QualityVerdict v;
  const std::string& body = doc.text();

  if (split_sentences(body).size() < config.min_sentences) v.fail(QualityRule::min_sentences);

  for (std::string_view line : text::split_lines(body)) {
    line = text::trim(line);
    if (text::word_count(line) < config.min_line_words) continue;
    if (!ends_with_terminal(line)) {
      v.fail(QualityRule::terminal_punctuation);
      break;
    }
  }

  const std::string lowered = text::to_lower_ascii(body);
  for (const auto& phrase : config.boilerplate_phrases) {
    if (!phrase.empty() && lowered.find(text::to_lower_ascii(phrase)) != std::string::npos) {
      v.fail(QualityRule::boilerplate);
      break;
    }
  }

  for (std::string_view tok : text::split_whitespace(body)) {
    if (utf8_length(tok) > config.max_token_chars) {
      v.fail(QualityRule::long_token);
      break;
    }
  }
  return v;
}

bool min_words(const Document& doc, std::size_t k) { return doc.word_count() >= k; }

std::vector<std::string> split_sentences(std::string_view s, const SplitOptions& options) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    const auto piece = text::trim(s.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end;
  };

  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const char c = s[i];
    if (c == '\n') {
      flush(i);
      start = ++i;
      continue;
    }
    if (!is_terminal(c)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_terminal(s[j])) ++j;
    const bool lone_period = (j - i == 1) && c == '.';
    while (j < n) {
      const std::size_t mark = closing_mark_at(s, j);
      if (mark == 0) break;
      j += mark;
    }
    if (j == n) {
      flush(j);
      break;
    }
    if (!text::is_space(s[j])) {
      i = j;
      continue;
    }
    std::size_t k = j;
    while (k < n && text::is_space(s[k]) && s[k] != '\n') ++k;
    if (k < n && s[k] != '\n' && is_lower_ascii(s[k])) {
      i = k;
      continue;
    }
    if (lone_period && is_abbreviation(token_before(s, i), options)) {
      i = k;
      continue;
    }
    flush(j);
    i = j;
  }
  if (start < n) flush(n);
  return out;
}

std::string normalize_sentence(std::string_view sentence) {
  std::string_view s = text::trim(sentence);
  for (;;) {
    if (!s.empty() && is_terminal(s.back())) {
      s.remove_suffix(1);
      continue;
    }
    const std::size_t mark = trailing_closing_mark(s);
    if (mark > 0 && s.size() > mark && is_terminal(s[s.size() - mark - 1])) {
      s.remove_suffix(mark);
      continue;
    }
    break;
  }
  return text::to_lower_ascii(text::collapse_whitespace(s));
}

std::vector<Shingle> shingles(const Document& doc, std::size_t size, const SplitOptions& options) {
  if (size == 0) throw std::invalid_argument("shingle size must be at least 1");
  const auto sentences = split_sentences(doc.text(), options);
  std::vector<Shingle> out;
  if (sentences.size() < size) return out;
  std::vector<std::string> norm;
  norm.reserve(sentences.size());
  for (const auto& s : sentences) norm.push_back(normalize_sentence(s));
  for (std::size_t i = 0; i + size <= norm.size(); ++i) {
    std::string key = norm[i];
    for (std::size_t k = 1; k < size; ++k) {
      key.push_back('\n');
      key += norm[i + k];
    }
    out.push_back({std::move(key), doc.id()});
  }
  return out;
}

NearDuplicateIndex::NearDuplicateIndex(std::size_t shingle_size, SplitOptions options)
    : shingle_size_(shingle_size), options_(options) {
  if (shingle_size_ == 0) throw std::invalid_argument("shingle size must be at least 1");
}

bool NearDuplicateIndex::admit(const Document& doc) {
  const auto doc_shingles = shingles(doc, shingle_size_, options_);
  std::vector<Digest128> keys;
  keys.reserve(doc_shingles.size());
  for (const auto& sh : doc_shingles) {
    const Digest128 k = content_hash128(sh.key);
    if (seen_.count(k)) return false;
    keys.push_back(k);
  }
  seen_.insert(keys.begin(), keys.end());
  return true;
}

std::vector<Document> near_dup_filter(std::vector<Document> docs, std::size_t shingle_size,
                                      std::size_t* dropped, const SplitOptions& options) {
  NearDuplicateIndex index(shingle_size, options);
  std::vector<Document> kept;
  kept.reserve(docs.size());
  std::size_t drops = 0;
  for (auto& d : docs) {
    if (index.admit(d)) {
      kept.push_back(std::move(d));
    } else {
      ++drops;
    }
  }
  if (dropped) *dropped = drops;
  return kept;
}

std::size_t CurationReport::dropped_quality() const {
  return std::accumulate(dropped_quality_by_rule.begin(), dropped_quality_by_rule.end(),
                         std::size_t{0});
}

bool CurationReport::reconciles() const {
  return retained + dropped_unsafe + dropped_quality() + dropped_short + dropped_near_dup ==
         input_count;
}

Json CurationReport::to_json() const {
  Json by_rule = Json::object();
  for (QualityRule r : kQualityRules) {
    by_rule[std::string(to_string(r))] = dropped_quality_by_rule[static_cast<std::size_t>(r)];
  }
  return Json{{"input_count", input_count},
              {"dropped_unsafe", dropped_unsafe},
              {"dropped_quality", dropped_quality()},
              {"dropped_quality_by_rule", by_rule},
              {"dropped_short", dropped_short},
              {"dropped_near_dup", dropped_near_dup},
              {"retained", retained}};
}

CurationResult curate(std::vector<Document> docs, const UnsafeWordlist& wordlist,
                      const CurationOptions& options) {
  CurationResult result;
  CurationReport& report = result.report;
  report.input_count = docs.size();

  enum class Outcome { keep, unsafe, quality, short_doc };
  struct Decision {
    Outcome outcome = Outcome::keep;
    QualityRule rule = QualityRule::min_sentences;
  };

  // Per-document predicates are independent; the near-duplicate pass below
  // is order-dependent and runs sequentially.
  const auto decisions = ordered_parallel_map(docs.size(), options.workers, [&](std::size_t i) {
    const Document& d = docs[i];
    if (contains_unsafe(d, wordlist)) return Decision{Outcome::unsafe};
    const QualityVerdict q = check_quality(d, options.quality);
    if (!q.passed()) return Decision{Outcome::quality, *q.reason()};
    if (!min_words(d, options.min_words)) return Decision{Outcome::short_doc};
    return Decision{};
  });

  std::vector<Document> survivors;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    switch (decisions[i].outcome) {
      case Outcome::unsafe: ++report.dropped_unsafe; break;
      case Outcome::quality:
        ++report.dropped_quality_by_rule[static_cast<std::size_t>(decisions[i].rule)];
        break;
      case Outcome::short_doc: ++report.dropped_short; break;
      case Outcome::keep: survivors.push_back(std::move(docs[i])); break;
    }
  }

  result.documents = near_dup_filter(std::move(survivors), options.shingle_size,
                                     &report.dropped_near_dup, options.split);
  for (auto& d : result.documents) {
    if (d.stage() < corpus::Stage::clean) d.advance(corpus::Stage::clean);
  }
  report.retained = result.documents.size();
  return result;
}

}  // namespace claimcheck::curation

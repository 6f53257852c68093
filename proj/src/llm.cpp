// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "claimcheck/digest.hpp"
#include "claimcheck/http_client.hpp"

namespace claimcheck::llm {

std::string_view to_string(Mode m) { return m == Mode::think ? "think" : "no_think"; }

Mode parse_mode(std::string_view s) {
  if (s == "think") return Mode::think;
  if (s == "no_think") return Mode::no_think;
  throw std::invalid_argument("unknown inference mode: '" + std::string(s) + "'");
}

InferenceParams preset(Mode mode) {
  InferenceParams p;
  p.mode = mode;
  if (mode == Mode::think) {
    p.temperature = 0.6;
    p.top_p = 0.95;
  } else {
    p.temperature = 0.7;
    p.top_p = 0.8;
  }
  p.top_k = 20;
  p.min_p = 0.0;
  return p;
}

void InferenceParams::validate() const {
  auto in_range = [](double v) { return v >= 0.0 && v <= 2.0; };
  if (!in_range(temperature)) throw std::invalid_argument("temperature must lie in [0, 2]");
  if (!in_range(top_p)) throw std::invalid_argument("top_p must lie in [0, 2]");
  if (!in_range(min_p)) throw std::invalid_argument("min_p must lie in [0, 2]");
  if (top_k < 0) throw std::invalid_argument("top_k must be non-negative");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
  if (timeout.count() <= 0) throw std::invalid_argument("timeout must be positive");
}

Json InferenceParams::to_json() const {
  Json j{{"temperature", temperature}, {"top_p", top_p},     {"top_k", top_k},
         {"min_p", min_p},             {"mode", to_string(mode)}, {"max_retries", max_retries},
         {"timeout_ms", timeout.count()}};
  if (max_tokens) j["max_tokens"] = *max_tokens;
  return j;
}

InferenceParams InferenceParams::from_json(const Json& j) {
  const Mode mode = parse_mode(j.value("mode", std::string("think")));
  InferenceParams p = preset(mode);
  p.temperature = j.value("temperature", p.temperature);
  p.top_p = j.value("top_p", p.top_p);
  p.top_k = j.value("top_k", p.top_k);
  p.min_p = j.value("min_p", p.min_p);
  p.max_retries = j.value("max_retries", p.max_retries);
  p.timeout = std::chrono::milliseconds(j.value("timeout_ms", p.timeout.count()));
  if (j.contains("max_tokens") && !j.at("max_tokens").is_null()) {
    p.max_tokens = j.at("max_tokens").get<int>();
  }
  p.validate();
  return p;
}

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::network: return "network";
    case ErrorKind::http_status: return "http_status";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::malformed_body: return "malformed_body";
  }
  return "network";
}

ErrorKind parse_error_kind(std::string_view s) {
  if (s == "network") return ErrorKind::network;
  if (s == "http_status") return ErrorKind::http_status;
  if (s == "timeout") return ErrorKind::timeout;
  if (s == "malformed_body") return ErrorKind::malformed_body;
  throw std::invalid_argument("unknown error kind: " + std::string(s));
}

InflightLimiter::InflightLimiter(std::ptrdiff_t max_inflight)
    : sem_(std::max<std::ptrdiff_t>(1, max_inflight)) {}

std::string_view mode_token(Mode m) { return m == Mode::think ? "/think" : "/no_think"; }

std::vector<ChatMessage> with_mode_token(std::vector<ChatMessage> messages, Mode mode) {
  auto it = std::find_if(messages.rbegin(), messages.rend(),
                         [](const ChatMessage& m) { return m.role == "user"; });
  if (it == messages.rend()) throw std::invalid_argument("request has no user message");
  it->content += "\n";
  it->content += mode_token(mode);
  return messages;
}

std::string prompt_fingerprint(std::string_view prompt) { return content_hash128(prompt).hex(); }

ChatClient::ChatClient(std::string id, std::ptrdiff_t max_inflight)
    : id_(std::move(id)), local_(max_inflight) {}

namespace {

class LimiterGuard {
 public:
  LimiterGuard(InflightLimiter& local, InflightLimiter* global) : local_(local), global_(global) {
    if (global_) global_->acquire();
    local_.acquire();
  }
  ~LimiterGuard() {
    local_.release();
    if (global_) global_->release();
  }
  LimiterGuard(const LimiterGuard&) = delete;
  LimiterGuard& operator=(const LimiterGuard&) = delete;

 private:
  InflightLimiter& local_;
  InflightLimiter* global_;
};

}  // namespace

ChatResponse ChatClient::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw std::invalid_argument("chat request has no messages");
  request.params.validate();
  const auto outgoing = send_mode_token_ ? with_mode_token(request.messages, request.params.mode)
                                         : request.messages;

  ChatResponse response;
  const auto start = std::chrono::steady_clock::now();
  auto backoff = retry_.initial_backoff;
  const int max_attempts = 1 + request.params.max_retries;
  for (int n = 1; n <= max_attempts; ++n) {
    AttemptResult r;
    {
      LimiterGuard guard(local_, global_.get());
      try {
        r = attempt(outgoing, request.params);
      } catch (const std::exception& e) {
        r = AttemptResult::failure(ErrorKind::network, false, e.what());
      }
    }
    response.attempt_count = n;
    if (r.ok) {
      response.content = std::move(r.content);
      response.error.reset();
      response.error_detail.clear();
      break;
    }
    if (!response.error) response.error = r.kind;
    response.error_detail = r.detail;
    if (!r.transient || n == max_attempts) break;
    if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
    backoff = std::min(retry_.max_backoff,
                       std::chrono::milliseconds(static_cast<long long>(
                           static_cast<double>(backoff.count()) * retry_.multiplier)));
  }
  response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  return response;
}

ChatResponse ChatClient::complete(std::string prompt, const InferenceParams& params) {
  return complete(ChatRequest{id_, {{"user", std::move(prompt)}}, params});
}

// ---------------------------------------------------------------------------

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::vector<std::string> string_list(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw std::invalid_argument(std::string("mock script: ") + what + " must be a non-empty array");
  }
  return j.get<std::vector<std::string>>();
}

}  // namespace

AttemptResult render_mock_reply(std::string_view reply, const MockCall& call) {
  constexpr std::string_view kError = "!error:";
  if (reply.substr(0, kError.size()) == kError) {
    std::string_view rest = reply.substr(kError.size());
    const auto colon = rest.find(':');
    const ErrorKind kind = parse_error_kind(rest.substr(0, colon));
    bool transient = kind == ErrorKind::network || kind == ErrorKind::timeout;
    std::string detail(rest);
    if (kind == ErrorKind::http_status) {
      const int code = colon == std::string_view::npos
                           ? 500
                           : std::stoi(std::string(rest.substr(colon + 1)));
      transient = code == 429 || code >= 500;
    }
    return AttemptResult::failure(kind, transient, std::move(detail));
  }
  std::string out(reply);
  if (out.find("{{") != std::string::npos) {
    const auto blank = call.prompt.find("\n\n");
    const std::string tail = blank == std::string::npos ? call.prompt : call.prompt.substr(blank + 2);
    replace_all(out, "{{prompt_tail}}", tail);
    replace_all(out, "{{prompt}}", call.prompt);
  }
  return AttemptResult::success(std::move(out));
}

MockScript MockScript::from_json(const Json& j) {
  MockScript s;
  if (j.contains("scripted")) {
    for (const auto& e : j.at("scripted")) {
      s.scripted_.emplace_back(e.at("fingerprint").get<std::string>(),
                               string_list(e.at("replies"), "replies"));
    }
  }
  if (j.contains("rules")) {
    for (const auto& e : j.at("rules")) {
      s.rules_.push_back({e.value("contains", std::string()), string_list(e.at("replies"), "replies")});
    }
  }
  if (j.contains("default") && j.at("default").is_string()) s.default_ = j.at("default").get<std::string>();
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  return from_json(Json::parse(read_text_file(path)));
}

AttemptResult MockScript::reply(const MockCall& call) const {
  const std::string fp = prompt_fingerprint(call.prompt);
  for (const auto& [fingerprint, replies] : scripted_) {
    if (fingerprint == fp) {
      const auto& r = replies[std::min(call.call_index, replies.size() - 1)];
      return render_mock_reply(r, call);
    }
  }
  for (const auto& rule : rules_) {
    if (call.prompt.find(rule.contains) == std::string::npos) continue;
    const Digest128 h = content_hash128(call.prompt);
    return render_mock_reply(rule.replies[h.lo % rule.replies.size()], call);
  }
  if (default_) return render_mock_reply(*default_, call);
  return AttemptResult::failure(ErrorKind::http_status, false, "mock: no scripted reply");
}

MockClient::MockClient(std::string id, MockHandler handler, std::ptrdiff_t max_inflight)
    : ChatClient(std::move(id), max_inflight), handler_(std::move(handler)) {}

MockClient::MockClient(std::string id, MockScript script, std::ptrdiff_t max_inflight)
    : ChatClient(std::move(id), max_inflight),
      handler_([s = std::move(script)](const MockCall& c) { return s.reply(c); }) {}

std::vector<MockCall> MockClient::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t MockClient::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

AttemptResult MockClient::attempt(const std::vector<ChatMessage>& messages,
                                  const InferenceParams& params) {
  MockCall call;
  call.messages = messages;
  call.params = params;
  auto last_user = std::find_if(messages.rbegin(), messages.rend(),
                                [](const ChatMessage& m) { return m.role == "user"; });
  if (last_user != messages.rend()) {
    call.prompt = last_user->content;
    const std::string suffix = "\n" + std::string(mode_token(params.mode));
    if (call.prompt.size() >= suffix.size() &&
        call.prompt.compare(call.prompt.size() - suffix.size(), suffix.size(), suffix) == 0) {
      call.prompt.resize(call.prompt.size() - suffix.size());
    }
  }
  {
    std::lock_guard lock(mu_);
    call.call_index = per_fingerprint_[prompt_fingerprint(call.prompt)]++;
    calls_.push_back(call);
  }
  return handler_(call);
}

// ---------------------------------------------------------------------------

std::string expand_env(std::string_view s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
      const auto close = s.find('}', i + 2);
      if (close != std::string_view::npos) {
        const std::string name(s.substr(i + 2, close - i - 2));
        if (const char* v = std::getenv(name.c_str())) out += v;
        i = close + 1;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

EndpointConfig EndpointConfig::from_json(const std::string& id, const Json& j,
                                         const std::filesystem::path& base_dir) {
  EndpointConfig c;
  c.id = id;
  c.kind = j.value("kind", c.kind);
  if (c.kind != "http" && c.kind != "mock") {
    throw std::invalid_argument("endpoint " + id + ": kind must be 'http' or 'mock'");
  }
  c.base_url = expand_env(j.value("base_url", std::string()));
  c.model = expand_env(j.value("model", std::string()));
  c.api_key = j.value("api_key", std::string());
  c.mock_script = j.value("mock_script", std::string());
  if (!c.mock_script.empty() && !base_dir.empty() &&
      std::filesystem::path(c.mock_script).is_relative()) {
    c.mock_script = (base_dir / c.mock_script).string();
  }
  c.params = InferenceParams::from_json(j.value("params", Json::object()));
  c.send_mode_token = j.value("send_mode_token", c.send_mode_token);
  c.max_inflight = j.value("max_inflight", c.max_inflight);
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    c.retry.initial_backoff = std::chrono::milliseconds(r.value("initial_backoff_ms", c.retry.initial_backoff.count()));
    c.retry.multiplier = r.value("multiplier", c.retry.multiplier);
    c.retry.max_backoff = std::chrono::milliseconds(r.value("max_backoff_ms", c.retry.max_backoff.count()));
  } else if (c.kind == "mock") {
    c.retry.initial_backoff = std::chrono::milliseconds(0);
  }
  if (c.kind == "http" && (c.base_url.empty() || c.model.empty())) {
    throw std::invalid_argument("endpoint " + id + ": http endpoints need base_url and model");
  }
  if (c.kind == "mock" && c.mock_script.empty()) {
    throw std::invalid_argument("endpoint " + id + ": mock endpoints need mock_script");
  }
  return c;
}

Json EndpointConfig::to_json() const {
  // api_key is never serialized.
  return Json{{"kind", kind},
              {"base_url", base_url},
              {"model", model},
              {"mock_script", mock_script},
              {"params", params.to_json()},
              {"send_mode_token", send_mode_token},
              {"max_inflight", max_inflight}};
}

std::unique_ptr<ChatClient> make_client(const EndpointConfig& config) {
  std::unique_ptr<ChatClient> client;
  if (config.kind == "mock") {
    client = std::make_unique<MockClient>(config.id, MockScript::load(config.mock_script),
                                          config.max_inflight);
  } else {
    client = std::make_unique<HttpChatClient>(config);
  }
  client->set_retry_policy(config.retry);
  client->set_send_mode_token(config.send_mode_token);
  return client;
}

}  // namespace claimcheck::llm

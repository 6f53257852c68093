// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "claimcheck/http_client.hpp"

#include <chrono>
#include <stdexcept>

namespace claimcheck::llm {
namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

ParsedUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("base_url lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.origin = url.substr(0, path_start);
  p.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!p.path.empty() && p.path.back() == '/') p.path.pop_back();
  return p;
}

}  // namespace

Json chat_completion_body(const std::string& model, const std::vector<ChatMessage>& messages,
                          const InferenceParams& params) {
  Json msgs = Json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  Json body{{"model", model},
            {"messages", std::move(msgs)},
            {"temperature", params.temperature},
            {"top_p", params.top_p},
            {"top_k", params.top_k},
            {"min_p", params.min_p},
            {"stream", false}};
  if (params.max_tokens) body["max_tokens"] = *params.max_tokens;
  return body;
}

std::optional<std::string> parse_chat_completion(std::string_view body) {
  const Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message")) return std::nullopt;
  const auto& message = first.at("message");
  if (!message.is_object() || !message.contains("content") || !message.at("content").is_string()) {
    return std::nullopt;
  }
  return message.at("content").get<std::string>();
}

struct HttpChatClient::Impl {
  ParsedUrl url;
  std::string model;
  std::string api_key;
};

HttpChatClient::HttpChatClient(const EndpointConfig& config)
    : ChatClient(config.id, config.max_inflight), impl_(std::make_unique<Impl>()) {
  impl_->url = parse_base_url(config.base_url);
  impl_->model = config.model;
  impl_->api_key = expand_env(config.api_key);
}

HttpChatClient::~HttpChatClient() = default;

AttemptResult HttpChatClient::attempt(const std::vector<ChatMessage>& messages,
                                      const InferenceParams& params) {
  // httplib clients are not thread-safe; one per attempt.
  httplib::Client cli(impl_->url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(params.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(params.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!impl_->api_key.empty()) headers.emplace("Authorization", "Bearer " + impl_->api_key);

  const std::string body = chat_completion_body(impl_->model, messages, params).dump();
  const auto start = std::chrono::steady_clock::now();
  auto res = cli.Post(impl_->url.path + "/chat/completions", headers, body, "application/json");
  const auto elapsed = std::chrono::steady_clock::now() - start;

  if (!res) {
    const auto err = res.error();
    const bool timed_out = elapsed >= params.timeout * 9 / 10 &&
                           (err == httplib::Error::Read || err == httplib::Error::Connection ||
                            err == httplib::Error::Write);
    if (timed_out) return AttemptResult::failure(ErrorKind::timeout, true, httplib::to_string(err));
    return AttemptResult::failure(ErrorKind::network, true, httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    const bool transient = res->status == 429 || res->status >= 500;
    return AttemptResult::failure(ErrorKind::http_status, transient,
                                  "HTTP " + std::to_string(res->status));
  }
  auto content = parse_chat_completion(res->body);
  if (!content) {
    return AttemptResult::failure(ErrorKind::malformed_body, false, "unexpected response body");
  }
  return AttemptResult::success(std::move(*content));
}

}  // namespace claimcheck::llm

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "claimcheck/jsonl.hpp"

namespace claimcheck::llm {

enum class Mode { think, no_think };

std::string_view to_string(Mode m);
// Throws std::invalid_argument for anything but "think" / "no_think".
Mode parse_mode(std::string_view s);

// Sampling parameters sent with every request. See preset() for the thinking
// and non-thinking defaults.
struct InferenceParams {
  double temperature = 0.6;
  double top_p = 0.95;
  int top_k = 20;
  double min_p = 0.0;
  Mode mode = Mode::think;
  // Additional attempts after the first failure.
  int max_retries = 3;
  std::chrono::milliseconds timeout{120000};
  std::optional<int> max_tokens;

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;

  Json to_json() const;
  // Missing fields fall back to preset(mode) with mode defaulting to think.
  static InferenceParams from_json(const Json& j);
};

InferenceParams preset(Mode mode);

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string endpoint_id;
  std::vector<ChatMessage> messages;
  InferenceParams params;
};

enum class ErrorKind { network, http_status, timeout, malformed_body };
std::string_view to_string(ErrorKind k);
ErrorKind parse_error_kind(std::string_view s);

struct ChatResponse {
  std::string content;
  std::optional<ErrorKind> error;  // first failure seen, when the call failed
  std::string error_detail;
  std::chrono::milliseconds latency{0};
  int attempt_count = 0;

  bool ok() const { return !error.has_value(); }
};

// Outcome of a single transport attempt.
struct AttemptResult {
  bool ok = false;
  std::string content;
  ErrorKind kind = ErrorKind::network;
  bool transient = false;
  std::string detail;

  static AttemptResult success(std::string content) { return {true, std::move(content), ErrorKind::network, false, {}}; }
  static AttemptResult failure(ErrorKind kind, bool transient, std::string detail = {}) {
    return {false, {}, kind, transient, std::move(detail)};
  }
};

struct RetryPolicy {
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};
};

// Bounds concurrent requests; may be shared between clients as a global cap.
class InflightLimiter {
 public:
  explicit InflightLimiter(std::ptrdiff_t max_inflight);
  void acquire() { sem_.acquire(); }
  void release() { sem_.release(); }

 private:
  std::counting_semaphore<> sem_;
};

// Uniform chat-completion interface. complete() appends the mode token to the
// final user message, applies the in-flight bounds, and retries transient
// failures with exponential backoff; subclasses implement one attempt.
// Safe for concurrent use.
class ChatClient {
 public:
  explicit ChatClient(std::string id, std::ptrdiff_t max_inflight = 8);
  virtual ~ChatClient() = default;

  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  const std::string& id() const { return id_; }

  ChatResponse complete(const ChatRequest& request);

  // Convenience: single user message.
  ChatResponse complete(std::string prompt, const InferenceParams& params);

  void set_retry_policy(RetryPolicy policy) { retry_ = policy; }
  void set_global_limiter(std::shared_ptr<InflightLimiter> limiter) { global_ = std::move(limiter); }
  // When false the mode token is not appended (models without a thinking switch).
  void set_send_mode_token(bool send) { send_mode_token_ = send; }

 protected:
  virtual AttemptResult attempt(const std::vector<ChatMessage>& messages,
                                const InferenceParams& params) = 0;

 private:
  std::string id_;
  RetryPolicy retry_;
  InflightLimiter local_;
  std::shared_ptr<InflightLimiter> global_;
  bool send_mode_token_ = true;
};

std::string_view mode_token(Mode m);

// Returns a copy of `messages` with the mode token appended to the last user
// message. Throws std::invalid_argument if there is no user message.
std::vector<ChatMessage> with_mode_token(std::vector<ChatMessage> messages, Mode mode);

// Content-addressed key for a prompt (the final user message before the mode
// token is appended).
std::string prompt_fingerprint(std::string_view prompt);

// ---------------------------------------------------------------------------
// Mock client

struct MockCall {
  std::string prompt;                  // final user message, without mode token
  std::vector<ChatMessage> messages;   // as sent, with mode token
  InferenceParams params;
  std::size_t call_index = 0;          // calls so far with the same fingerprint
};

using MockHandler = std::function<AttemptResult(const MockCall&)>;

// Script file layout:
//   {
//     "scripted": [{"fingerprint": "<hex>", "replies": ["...", "..."]}],
//     "rules":    [{"contains": "substring", "replies": ["...", "..."]}],
//     "default":  "..."
//   }
// Scripted replies are consumed in order per fingerprint (the last one
// repeats). Rule replies are picked by prompt fingerprint, so the choice is
// independent of request order. A reply of the form "!error:<kind>" or
// "!error:http_status:<code>" simulates a failed attempt. "{{prompt}}" expands
// to the prompt and "{{prompt_tail}}" to the text after its first blank line.
class MockScript {
 public:
  static MockScript from_json(const Json& j);
  static MockScript load(const std::filesystem::path& path);

  AttemptResult reply(const MockCall& call) const;

 private:
  struct Rule {
    std::string contains;
    std::vector<std::string> replies;
  };
  std::vector<std::pair<std::string, std::vector<std::string>>> scripted_;
  std::vector<Rule> rules_;
  std::optional<std::string> default_;
};

// Parses a reply template into an attempt result (see MockScript).
AttemptResult render_mock_reply(std::string_view reply, const MockCall& call);

class MockClient final : public ChatClient {
 public:
  MockClient(std::string id, MockHandler handler, std::ptrdiff_t max_inflight = 8);
  MockClient(std::string id, MockScript script, std::ptrdiff_t max_inflight = 8);

  // Every call received, in arrival order.
  std::vector<MockCall> calls() const;
  std::size_t call_count() const;

 protected:
  AttemptResult attempt(const std::vector<ChatMessage>& messages,
                        const InferenceParams& params) override;

 private:
  MockHandler handler_;
  mutable std::mutex mu_;
  std::vector<MockCall> calls_;
  std::unordered_map<std::string, std::size_t> per_fingerprint_;
};

// ---------------------------------------------------------------------------
// Endpoint configuration

struct EndpointConfig {
  std::string id;
  std::string kind = "http";  // "http" or "mock"
  std::string base_url;       // e.g. http://localhost:8000/v1
  std::string model;
  std::string api_key;        // may reference ${ENV_VAR}
  std::string mock_script;    // path, for kind == "mock"
  InferenceParams params;
  bool send_mode_token = true;
  std::ptrdiff_t max_inflight = 8;
  RetryPolicy retry;

  static EndpointConfig from_json(const std::string& id, const Json& j,
                                  const std::filesystem::path& base_dir = {});
  Json to_json() const;
};

// Replaces ${NAME} with the value of environment variable NAME (empty when
// unset).
std::string expand_env(std::string_view s);

std::unique_ptr<ChatClient> make_client(const EndpointConfig& config);

}  // namespace claimcheck::llm

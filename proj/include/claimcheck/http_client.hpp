// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include "claimcheck/llm.hpp"

namespace claimcheck::llm {

// OpenAI-compatible chat-completions client (POST <base_url>/chat/completions).
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(const EndpointConfig& config);
  ~HttpChatClient() override;

 protected:
  AttemptResult attempt(const std::vector<ChatMessage>& messages,
                        const InferenceParams& params) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Request body sent for one attempt; exposed for wire-format tests.
Json chat_completion_body(const std::string& model, const std::vector<ChatMessage>& messages,
                          const InferenceParams& params);

// Extracts choices[0].message.content; std::nullopt when the body does not
// have that shape.
std::optional<std::string> parse_chat_completion(std::string_view body);

}  // namespace claimcheck::llm

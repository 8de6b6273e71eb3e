// Copyright 2026 The CFSM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFSM_CHAT_CLIENT_HPP_
#define CFSM_CHAT_CLIENT_HPP_

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cfsm/errors.hpp"

namespace cfsm {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct ChatResponse {
  std::string content;
  // Per-token log-probabilities of the completion, when the backend returns
  // them; empty otherwise.
  std::vector<TokenLogprob> token_logprobs;
};

// Minimal chat-completions client surface. Implementations must be safe for
// concurrent complete() calls.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const std::vector<ChatMessage>& messages) = 0;
  virtual std::string id() const = 0;

  ChatResponse complete_user(const std::string& prompt) {
    return complete({ChatMessage{"user", prompt}});
  }
};

struct RemoteClientConfig {
  std::string endpoint;                     // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;
  double temperature = 0.0;
  bool want_logprobs = true;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_factor = 2.0;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_inflight = 4;
};

// OpenAI-compatible chat-completions client: POSTs {model, messages,
// temperature, logprobs?}, retries transient failures (connect errors, 429,
// 5xx) with exponential backoff, and caps concurrent in-flight requests.
// Throws RemoteError once the attempt budget is exhausted and ProtocolError
// for responses that do not match the wire schema.
class RemoteChatClient : public ChatClient {
 public:
  explicit RemoteChatClient(RemoteClientConfig config);
  ~RemoteChatClient() override;

  ChatResponse complete(const std::vector<ChatMessage>& messages) override;
  std::string id() const override;
  const RemoteClientConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Fixture client: replays an ordered list of response strings, one per
// request. Used for offline codification and tests.
class CannedChatClient : public ChatClient {
 public:
  explicit CannedChatClient(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}

  ChatResponse complete(const std::vector<ChatMessage>& messages) override;
  std::string id() const override { return "canned"; }

  std::size_t calls() const;
  const std::vector<std::vector<ChatMessage>>& requests() const { return requests_; }

  // Loads a JSON array of response strings.
  static CannedChatClient from_json(const std::string& text);
  static std::vector<std::string> responses_from_json(const std::string& text);

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> responses_;
  std::vector<std::vector<ChatMessage>> requests_;
  std::size_t cursor_ = 0;
};

}  // namespace cfsm

#endif  // CFSM_CHAT_CLIENT_HPP_

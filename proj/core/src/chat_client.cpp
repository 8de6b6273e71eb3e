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

#include "cfsm/chat_client.hpp"

#include <condition_variable>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace cfsm {
namespace {

using nlohmann::json;

bool retryable_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

ChatResponse parse_completion(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("completion response is not valid JSON: ") + e.what());
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw ProtocolError("completion response has no choices");
  }
  const auto& choice = doc["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    throw ProtocolError("completion choice has no message content");
  }
  ChatResponse out;
  out.content = choice["message"]["content"].get<std::string>();
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
    for (const auto& tok : choice["logprobs"]["content"]) {
      if (tok.contains("token") && tok.contains("logprob") && tok["token"].is_string() &&
          tok["logprob"].is_number()) {
        out.token_logprobs.push_back({tok["token"].get<std::string>(), tok["logprob"].get<double>()});
      }
    }
  }
  return out;
}

}  // namespace

struct RemoteChatClient::Impl {
  RemoteClientConfig config;
  httplib::Client http;
  std::mutex mutex;
  std::condition_variable slot_free;
  std::size_t inflight = 0;

  explicit Impl(RemoteClientConfig cfg) : config(std::move(cfg)), http(config.endpoint) {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    http.set_connection_timeout(secs.count() > 0 ? secs.count() : 1, 0);
    http.set_read_timeout(secs.count() > 0 ? secs.count() : 1, 0);
    http.set_write_timeout(secs.count() > 0 ? secs.count() : 1, 0);
  }

  struct InflightSlot {
    Impl& impl;
    explicit InflightSlot(Impl& i) : impl(i) {
      std::unique_lock lock(impl.mutex);
      impl.slot_free.wait(lock, [&] { return impl.inflight < impl.config.max_inflight; });
      ++impl.inflight;
    }
    ~InflightSlot() {
      {
        std::lock_guard lock(impl.mutex);
        --impl.inflight;
      }
      impl.slot_free.notify_one();
    }
  };
};

RemoteChatClient::RemoteChatClient(RemoteClientConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteChatClient::~RemoteChatClient() = default;

const RemoteClientConfig& RemoteChatClient::config() const { return impl_->config; }

std::string RemoteChatClient::id() const { return "remote/" + impl_->config.model; }

ChatResponse RemoteChatClient::complete(const std::vector<ChatMessage>& messages) {
  const auto& cfg = impl_->config;

  json body;
  body["model"] = cfg.model;
  body["temperature"] = cfg.temperature;
  if (cfg.want_logprobs) body["logprobs"] = true;
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

  std::string last_failure = "no attempt made";
  auto backoff = cfg.initial_backoff;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * cfg.backoff_factor));
    }
    Impl::InflightSlot slot(*impl_);
    auto result = impl_->http.Post(cfg.path, headers, payload, "application/json");
    if (!result) {
      last_failure = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 200) return parse_completion(result->body);
    last_failure = "HTTP " + std::to_string(result->status);
    if (!retryable_status(result->status)) {
      throw RemoteError("chat completion failed (" + last_failure + ", not retryable)");
    }
  }
  throw RemoteError("chat completion failed after " + std::to_string(cfg.max_attempts) +
                    " attempts (" + last_failure + ")");
}

ChatResponse CannedChatClient::complete(const std::vector<ChatMessage>& messages) {
  std::lock_guard lock(mutex_);
  requests_.push_back(messages);
  if (cursor_ >= responses_.size()) {
    throw RemoteError("canned client exhausted after " + std::to_string(responses_.size()) +
                      " responses");
  }
  return ChatResponse{responses_[cursor_++], {}};
}

std::size_t CannedChatClient::calls() const {
  std::lock_guard lock(mutex_);
  return cursor_;
}

std::vector<std::string> CannedChatClient::responses_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("canned fixture is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_array()) throw SchemaError("canned fixture must be a JSON array of strings");
  std::vector<std::string> responses;
  for (const auto& r : doc) {
    if (!r.is_string()) throw SchemaError("canned fixture must be a JSON array of strings");
    responses.push_back(r.get<std::string>());
  }
  return responses;
}

CannedChatClient CannedChatClient::from_json(const std::string& text) {
  return CannedChatClient(responses_from_json(text));
}

}  // namespace cfsm

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

#ifndef CFSM_CHECKER_HPP_
#define CFSM_CHECKER_HPP_

#include <atomic>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfsm/chat_client.hpp"
#include "cfsm/errors.hpp"
#include "cfsm/prompt.hpp"
#include "cfsm/rng.hpp"

namespace cfsm {

enum class Label { kTrue, kFalse, kUnknown };

std::string_view to_string(Label label);
std::optional<Label> label_from(std::string_view text);

enum class VerdictSource { kScripted, kRemote, kCache };

// Answer to a binary question. true_logprob is the log-probability assigned
// to the "true" answer; labels and logits must agree across the log(0.5)
// boundary (see verdict_coherent).
struct Verdict {
  Label label = Label::kUnknown;
  double true_logprob = 0.0;
  VerdictSource source = VerdictSource::kScripted;
};

inline const double kLogHalf = std::log(0.5);
inline const double kDefaultTrueLogprob = std::log(0.95);
inline const double kDefaultFalseLogprob = std::log(0.05);

bool verdict_coherent(const Verdict& v, double tolerance = 1e-9);

// One binary question over a scene/action pair. Backends compose the parts as
// they need (the scripted oracle matches the action text alone; the remote
// discriminator renders scene and action into its prompt).
struct Query {
  std::string scene;
  std::string action;
  std::string question;
};

// The binary_question primitive. Implementations must be safe for concurrent
// check() calls.
class ConditionChecker {
 public:
  virtual ~ConditionChecker() = default;

  virtual Verdict check(const Query& query) = 0;

  // Stable backend identifier; part of every cache key.
  virtual std::string backend_id() const = 0;

  Verdict binary_question(std::string_view text, std::string_view question) {
    return check(Query{"", std::string(text), std::string(question)});
  }
};

// Deterministic pattern rule. Matching is case-insensitive substring search;
// with `anchor` set, both ends of the match must fall on token boundaries, so
// "travel north" does not match "travel northeast". A rule matches when every
// non-empty pattern matches its field; at least one pattern must be set.
struct ScriptedRule {
  std::string action_pattern;
  std::string question_pattern;
  bool anchor = false;
  Label label = Label::kFalse;
  double logprob = kDefaultFalseLogprob;
};

bool pattern_matches(std::string_view text, std::string_view pattern, bool anchor);

// The offline oracle standing in for an LLM discriminator: a pure function of
// (action, question, rule table). First matching rule wins; no match answers
// false with the configured logit.
class ScriptedChecker : public ConditionChecker {
 public:
  explicit ScriptedChecker(std::vector<ScriptedRule> rules,
                           double no_match_logprob = kDefaultFalseLogprob);

  Verdict check(const Query& query) override;
  std::string backend_id() const override { return "scripted"; }

  const std::vector<ScriptedRule>& rules() const { return rules_; }

  // Parses a JSON array of
  //   {"action_pattern": str?, "question_pattern": str?, "label": str,
  //    "logprob": float, "anchor": bool?}
  // Rules with incoherent label/logprob pairs are rejected.
  static ScriptedChecker from_json(const std::string& text,
                                   double no_match_logprob = kDefaultFalseLogprob);
  static ScriptedChecker from_file(const std::filesystem::path& path,
                                   double no_match_logprob = kDefaultFalseLogprob);
  static std::string rules_to_json(const std::vector<ScriptedRule>& rules);

 private:
  std::vector<ScriptedRule> rules_;
  double no_match_logprob_;
};

// Decorator counting check() calls; used for forward-count instrumentation.
class CountingChecker : public ConditionChecker {
 public:
  explicit CountingChecker(ConditionChecker& inner) : inner_(inner) {}

  Verdict check(const Query& query) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.check(query);
  }
  std::string backend_id() const override { return inner_.backend_id(); }

  std::size_t calls() const { return calls_.load(std::memory_order_relaxed); }
  void reset() { calls_.store(0, std::memory_order_relaxed); }

 private:
  ConditionChecker& inner_;
  std::atomic<std::size_t> calls_{0};
};

// Logits assigned to the label a SampledChecker draws.
struct SampledConfig {
  double true_logprob = kDefaultTrueLogprob;
  double false_logprob = kDefaultFalseLogprob;
};

// Stochastic exploration wrapper: answers true with probability
// exp(inner true_logprob), false otherwise, with the logit replaced by the
// configured value for the sampled label. Reproducible for a given seed.
class SampledChecker : public ConditionChecker {
 public:
  SampledChecker(ConditionChecker& inner, Rng rng, SampledConfig config = SampledConfig{})
      : inner_(inner), rng_(rng), config_(config) {}

  Verdict check(const Query& query) override;
  std::string backend_id() const override { return "sampled(" + inner_.backend_id() + ")"; }

 private:
  ConditionChecker& inner_;
  std::mutex mutex_;
  Rng rng_;
  SampledConfig config_;
};

// Append-friendly verdict store: one JSONL record per key,
// {"key": hex, "label": str, "logprob": float}. Concurrent writers race
// benignly (identical keys hold identical verdicts for deterministic
// backends); I/O errors disable persistence but never fail a lookup.
class CacheStore {
 public:
  explicit CacheStore(std::filesystem::path path);

  std::optional<Verdict> get(const std::string& key);
  void put(const std::string& key, const Verdict& verdict);

  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, Verdict> entries_;
  bool persist_ok_ = true;
};

// Collision-resistant cache key over (backend id, question, scene, action);
// fields are length-prefixed before hashing so no two field splits collide.
std::string cache_key(std::string_view backend_id, const Query& query);

// Memoizes a deterministic inner backend. First call delegates and persists;
// replays return the stored verdict with source=kCache and zero inner calls.
class CachedChecker : public ConditionChecker {
 public:
  CachedChecker(ConditionChecker& inner, CacheStore& store) : inner_(inner), store_(store) {}

  Verdict check(const Query& query) override;
  std::string backend_id() const override { return inner_.backend_id(); }

 private:
  ConditionChecker& inner_;
  CacheStore& store_;
};

// Calibrated label->logit mapping used when the wire response carries no
// usable token log-probabilities.
struct LabelCalibration {
  double true_logprob = std::log(0.9);
  double false_logprob = std::log(0.1);
  double unknown_logprob = kLogHalf;
};

// Remote discriminator: renders the discriminate prompt template with the
// query, sends it over an OpenAI-compatible chat-completions client, and maps
// the yes/no/unknown reply to a verdict. true_logprob comes from the answer
// token's log-probability when present, else from the calibration table.
// Unparseable replies degrade to an unknown verdict (flagged via on_protocol_error)
// instead of failing the step.
class RemoteChecker : public ConditionChecker {
 public:
  RemoteChecker(std::shared_ptr<ChatClient> client, PromptTemplate discriminate,
                LabelCalibration calibration = {});

  Verdict check(const Query& query) override;
  std::string backend_id() const override;

  // Invoked (with the offending content) whenever a reply cannot be mapped to
  // a label. Defaults to a stderr note.
  void set_protocol_error_handler(std::function<void(const std::string&)> handler);

 private:
  std::shared_ptr<ChatClient> client_;
  PromptTemplate discriminate_;
  LabelCalibration calibration_;
  std::function<void(const std::string&)> on_protocol_error_;
};

}  // namespace cfsm

#endif  // CFSM_CHECKER_HPP_

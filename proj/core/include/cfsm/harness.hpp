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

#ifndef CFSM_HARNESS_HPP_
#define CFSM_HARNESS_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfsm/chat_client.hpp"
#include "cfsm/checker.hpp"
#include "cfsm/engine.hpp"
#include "cfsm/model.hpp"

namespace cfsm::harness {

// Prompt assembly context: the global role-play instruction, the character
// instruction, and the grounded per-machine states appended into the latter.
struct PromptContext {
  std::string global_instruction;
  std::string character_instruction;
  // machine_id -> grounded-state summary, in machine declaration order
  std::vector<std::pair<std::string, std::string>> grounded_states;
};

// Deterministic concatenation: global instruction, character instruction with
// the grounded-state block (omitted when empty), scene, and the action slot.
std::string assemble_prompt(const PromptContext& context, const SceneAction& action);

struct StepBatch {
  std::size_t sentences_per_step = 1;
  std::vector<SceneAction> segments;
};

// Splits on sentence terminators (. ! ? plus closing quotes/brackets), then
// groups consecutive sentences into steps of the given size; the last group
// may be smaller. Joining the segments recovers the whitespace-normalized
// source text.
StepBatch segment_scene(const std::string& text, std::size_t sentences_per_step);

enum class StrategyKind {
  kDeterministic,
  kSampledStateDist,
  kRandomStateDist,
  kSampledChecker,
  kGeneratorTemperature,
};

std::string_view to_string(StrategyKind kind);
std::optional<StrategyKind> strategy_from(std::string_view name);

struct ExplorationStrategy {
  StrategyKind kind = StrategyKind::kDeterministic;
  double temperature = 0.0;  // generator-temperature only; must be >= 0
};

// Scores a candidate trajectory/response. Missing scores (nullopt) are
// recorded per sample; a run where every sample is missing is an error.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::optional<double> score(const std::string& candidate) = 0;
  virtual std::string name() const = 0;
};

// Deterministic offline judge: hashes the candidate into [0, 100).
class StubJudge : public Judge {
 public:
  std::optional<double> score(const std::string& candidate) override;
  std::string name() const override { return "stub"; }
};

// NLI-style remote judge: asks whether the candidate entails the reference
// and maps entailment/neutral/contradiction to 100/50/0.
class RemoteJudge : public Judge {
 public:
  RemoteJudge(std::shared_ptr<ChatClient> client, std::string reference)
      : client_(std::move(client)), reference_(std::move(reference)) {}
  std::optional<double> score(const std::string& candidate) override;
  std::string name() const override { return "remote"; }

 private:
  std::shared_ptr<ChatClient> client_;
  std::string reference_;
};

struct Episode {
  std::vector<SceneAction> actions;
  std::string reference;  // used by NLI-style judges; may be empty
};

struct BestKResult {
  int k = 0;
  std::vector<std::optional<double>> per_sample_scores;  // length k
  double best = 0.0;
};

// Runs k independent rollouts of the episode under the strategy, submits each
// rendered trajectory to the judge, and keeps the maximum score. Rollout j
// draws from a seed stream derived from (master_seed, strategy, j), so sample
// prefixes are nested across k and strategies never perturb one another.
BestKResult run_bestk(const Episode& episode, const CharacterStateModel& model,
                      const ExplorationStrategy& strategy, int k, Judge& judge,
                      ConditionChecker& checker, std::uint64_t master_seed);

// The candidate text submitted to judges: one line per step listing the
// grounded state of every machine (format v1, stable across runs).
std::string render_trajectory(const CharacterStateModel& model, const Episode& episode,
                              const std::vector<std::map<std::string, StateId>>& states_per_step,
                              const ExplorationStrategy& strategy);

// Plot-data emission: one series per label with x/y arrays, as JSON.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string series_to_plotdata(const std::vector<Series>& series);

// CSV for Best@K sweeps: columns strategy,k,sample,score (missing scores
// render as empty cells), plus best rows.
std::string bestk_csv(const std::string& strategy, const std::vector<BestKResult>& sweep);

void write_file(const std::string& path, const std::string& content);

}  // namespace cfsm::harness

#endif  // CFSM_HARNESS_HPP_

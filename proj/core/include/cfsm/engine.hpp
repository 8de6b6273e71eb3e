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

#ifndef CFSM_ENGINE_HPP_
#define CFSM_ENGINE_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfsm/checker.hpp"
#include "cfsm/errors.hpp"
#include "cfsm/model.hpp"

namespace cfsm {

// One observable event: the narrative context and the atomic action driving a
// transition.
struct SceneAction {
  std::string scene_text;
  std::string action_text;
  std::optional<std::string> actor_hint;
};

enum class Routing { kSkippedIrrelevant, kActive, kPassive, kShared };

std::string_view to_string(Routing routing);

// Outcome of advancing one machine by one action. checker_calls counts the
// question guards evaluated for this machine; routing questions are accounted
// by CharacterStep, which asks them once per action for the whole character.
struct EngineStep {
  StateId prior;
  StateId next;
  std::optional<std::string> fired_rule;
  std::size_t checker_calls = 0;
  Routing routing = Routing::kShared;
};

// Evaluates `state`'s guards in priority order against the action; the first
// guard answering true fires. kAlways fires without a checker call, kNever
// never fires, and an "unknown" verdict counts as false (the deterministic
// engine must be decisive). No firing guard means the state self-loops.
// Checker failures propagate; the step performs no state change.
EngineStep get_next_state(const MachineDefinition& machine, const StateId& state,
                          const SceneAction& action, ConditionChecker& checker);

// One action applied to a whole character: relevance gate, then active/passive
// routing, then per-machine transitions.
struct CharacterStep {
  std::size_t routing_calls = 0;
  std::optional<Verdict> relevance;
  std::optional<Verdict> activity;
  std::map<std::string, EngineStep> steps;  // machine_id -> step

  std::size_t total_checker_calls() const;
};

// Asks the model's relevance question once; an irrelevant action skips every
// machine (one checker call total). Otherwise the activity question routes the
// action: machines whose perspective matches advance, shared machines always
// advance, and mismatched machines are left unchanged.
CharacterStep step_character(const CharacterStateModel& model,
                             const std::map<std::string, StateId>& current,
                             const SceneAction& action, ConditionChecker& checker);

struct TraceStep {
  std::size_t t = 0;  // 1-based step number
  SceneAction action;
  EngineStep step;
};

struct TraceRecord {
  std::string machine_id;
  StateId initial;
  std::vector<TraceStep> steps;
  StateId terminal;
  std::size_t total_checker_calls = 0;
};

// Folds get_next_state over the action sequence. An empty sequence yields
// terminal == initial with zero calls. A checker failure aborts the fold and
// surfaces as TraceError carrying the partial record.
TraceRecord run_trace(const MachineDefinition& machine, const StateId& initial,
                      const std::vector<SceneAction>& actions, ConditionChecker& checker);

class TraceError : public Error {
 public:
  TraceError(const std::string& what, TraceRecord partial)
      : Error(what), partial_(std::move(partial)) {}
  const TraceRecord& partial() const { return partial_; }

 private:
  TraceRecord partial_;
};

// Line-delimited trace records, one line per action step:
// {"t": int, "action": str, "scene": str, "prior": str, "next": str,
//  "rule": str|null, "calls": int}
std::string trace_to_jsonl(const TraceRecord& record);

// Reads action inputs from JSONL; each line needs an "action" field and may
// carry "scene" and "t". Fields of completed records are ignored on input.
std::vector<SceneAction> actions_from_jsonl(const std::string& text);

}  // namespace cfsm

#endif  // CFSM_ENGINE_HPP_

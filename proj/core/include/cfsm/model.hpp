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

#ifndef CFSM_MODEL_HPP_
#define CFSM_MODEL_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfsm/errors.hpp"

namespace cfsm {

// Every machine reserves the first state as the initialization state and the
// last as the semantic catch-all.
inline constexpr std::string_view kUnactivated = "Unactivated";
inline constexpr std::string_view kOther = "Other";

struct StateId {
  std::size_t index = 0;
  std::string name;

  friend bool operator==(const StateId&, const StateId&) = default;
};

enum class GuardKind { kQuestion, kDefaultTarget, kAlways, kNever };

std::string_view to_string(GuardKind kind);
std::optional<GuardKind> guard_kind_from(std::string_view text);

// A transition guard. `question` is the binary question posed to the
// condition checker; it is required (non-empty) for kQuestion and
// kDefaultTarget and must be empty otherwise.
struct GuardCondition {
  GuardKind kind = GuardKind::kQuestion;
  std::string question;
  std::size_t target = 0;

  friend bool operator==(const GuardCondition&, const GuardCondition&) = default;
};

// One prioritized guarded transition. A missing source is the wildcard: the
// rule applies from every state, evaluated after that state's own rules.
struct TransitionRule {
  std::optional<std::size_t> source;
  int priority = 0;
  GuardCondition guard;

  bool is_wildcard() const { return !source.has_value(); }
  friend bool operator==(const TransitionRule&, const TransitionRule&) = default;
};

enum class Perspective { kActive, kPassive, kShared };

std::string_view to_string(Perspective p);
std::optional<Perspective> perspective_from(std::string_view text);

// Dimension labels named by the ablation study; the vocabulary stays open.
inline constexpr std::string_view kDimensionIdentity = "identity";
inline constexpr std::string_view kDimensionPersonality = "personality";
inline constexpr std::string_view kDimensionAbility = "ability";

// A codified machine: ordered states (reserved first/last), prioritized
// guarded rules, and routing metadata. Instances are plain values; immutable
// once built, so they can be shared across concurrent engine runs. Use
// validate_machine/parse_machine to establish the invariants.
struct MachineDefinition {
  std::string machine_id;
  std::string dimension;
  Perspective perspective = Perspective::kShared;
  std::vector<std::string> states;
  std::vector<TransitionRule> rules;

  std::size_t state_count() const { return states.size(); }
  StateId state(std::size_t index) const { return {index, states.at(index)}; }
  StateId initial() const { return state(0); }
  std::optional<StateId> find_state(std::string_view name) const;

  // Rules applicable from `source`, in evaluation order: the state's own
  // rules by priority, then wildcard rules by priority, then default-target
  // fallbacks ordered by target declaration order. First true answer wins.
  std::vector<const TransitionRule*> rules_for(std::size_t source) const;

  // Largest number of guards any single state can evaluate in one step.
  std::size_t max_guard_fanout() const;

  friend bool operator==(const MachineDefinition&, const MachineDefinition&) = default;
};

// Stable rule reference for traces and logs: "<source|*>#<priority>".
std::string rule_ref(const MachineDefinition& machine, const TransitionRule& rule);

struct CharacterStateModel {
  std::string character_id;
  std::string relevance_question;
  std::string activity_question;
  std::vector<MachineDefinition> machines;

  const MachineDefinition* find_machine(std::string_view machine_id) const;

  friend bool operator==(const CharacterStateModel&, const CharacterStateModel&) = default;
};

enum class Severity { kError, kWarning };

struct Diagnostic {
  std::string machine_id;
  Severity severity = Severity::kError;
  std::string message;
};

// Machine-level invariant checks: reserved first/last states, unique names,
// referential closure of all rule sources/targets, duplicate-free priorities
// per source, guard/question coherence.
std::vector<Diagnostic> validate_machine(const MachineDefinition& machine);

// Model-level diagnostics: everything from validate_machine per machine, plus
// unique machine ids, at most one machine per (dimension, perspective), and
// non-empty routing questions. Empty result means every invariant holds.
std::vector<Diagnostic> validate_model(const CharacterStateModel& model);

// Parses a definition document (UTF-8 JSON). Throws SyntaxError for malformed
// JSON or wrong value types (with byte offset), SchemaError for unknown
// fields or invariant violations.
MachineDefinition parse_machine(const std::string& text);

// Inverse of parse_machine: parse_machine(serialize_machine(m)) == m for any
// valid machine, wildcard markers preserved.
std::string serialize_machine(const MachineDefinition& machine);

CharacterStateModel parse_model(const std::string& text);
std::string serialize_model(const CharacterStateModel& model);

}  // namespace cfsm

#endif  // CFSM_MODEL_HPP_

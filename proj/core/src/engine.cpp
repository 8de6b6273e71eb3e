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

#include "cfsm/engine.hpp"

#include <sstream>

#include <json.hpp>

namespace cfsm {
namespace {

using ordered_json = nlohmann::ordered_json;

Routing routing_for(Perspective p) {
  switch (p) {
    case Perspective::kActive: return Routing::kActive;
    case Perspective::kPassive: return Routing::kPassive;
    case Perspective::kShared: return Routing::kShared;
  }
  return Routing::kShared;
}

EngineStep skipped_step(const StateId& state) {
  return EngineStep{state, state, std::nullopt, 0, Routing::kSkippedIrrelevant};
}

}  // namespace

std::string_view to_string(Routing routing) {
  switch (routing) {
    case Routing::kSkippedIrrelevant: return "skipped-irrelevant";
    case Routing::kActive: return "active";
    case Routing::kPassive: return "passive";
    case Routing::kShared: return "shared";
  }
  return "shared";
}

EngineStep get_next_state(const MachineDefinition& machine, const StateId& state,
                          const SceneAction& action, ConditionChecker& checker) {
  if (state.index >= machine.state_count() || machine.states[state.index] != state.name) {
    throw SchemaError("state \"" + state.name + "\" does not belong to machine \"" +
                      machine.machine_id + "\"");
  }

  EngineStep step{state, state, std::nullopt, 0, routing_for(machine.perspective)};
  for (const TransitionRule* rule : machine.rules_for(state.index)) {
    bool fires = false;
    switch (rule->guard.kind) {
      case GuardKind::kAlways:
        fires = true;
        break;
      case GuardKind::kNever:
        fires = false;
        break;
      case GuardKind::kQuestion:
      case GuardKind::kDefaultTarget: {
        ++step.checker_calls;
        const Verdict verdict =
            checker.check(Query{action.scene_text, action.action_text, rule->guard.question});
        fires = verdict.label == Label::kTrue;
        break;
      }
    }
    if (fires) {
      step.next = machine.state(rule->guard.target);
      step.fired_rule = rule_ref(machine, *rule);
      return step;
    }
  }
  return step;  // no guard fired: self-loop
}

std::size_t CharacterStep::total_checker_calls() const {
  std::size_t total = routing_calls;
  for (const auto& [id, step] : steps) total += step.checker_calls;
  return total;
}

CharacterStep step_character(const CharacterStateModel& model,
                             const std::map<std::string, StateId>& current,
                             const SceneAction& action, ConditionChecker& checker) {
  for (const auto& machine : model.machines) {
    if (!current.contains(machine.machine_id)) {
      throw SchemaError("current state map is missing machine \"" + machine.machine_id + "\"");
    }
  }

  CharacterStep result;
  result.relevance =
      checker.check(Query{action.scene_text, action.action_text, model.relevance_question});
  ++result.routing_calls;

  if (result.relevance->label != Label::kTrue) {
    for (const auto& machine : model.machines) {
      result.steps.emplace(machine.machine_id, skipped_step(current.at(machine.machine_id)));
    }
    return result;
  }

  result.activity =
      checker.check(Query{action.scene_text, action.action_text, model.activity_question});
  ++result.routing_calls;
  const Perspective role =
      result.activity->label == Label::kTrue ? Perspective::kActive : Perspective::kPassive;

  for (const auto& machine : model.machines) {
    const StateId& state = current.at(machine.machine_id);
    const bool routed =
        machine.perspective == Perspective::kShared || machine.perspective == role;
    if (!routed) {
      result.steps.emplace(machine.machine_id, skipped_step(state));
      continue;
    }
    EngineStep step = get_next_state(machine, state, action, checker);
    step.routing = machine.perspective == Perspective::kShared ? Routing::kShared
                                                               : routing_for(role);
    result.steps.emplace(machine.machine_id, std::move(step));
  }
  return result;
}

TraceRecord run_trace(const MachineDefinition& machine, const StateId& initial,
                      const std::vector<SceneAction>& actions, ConditionChecker& checker) {
  TraceRecord record;
  record.machine_id = machine.machine_id;
  record.initial = initial;
  record.terminal = initial;

  StateId state = initial;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    EngineStep step;
    try {
      step = get_next_state(machine, state, actions[i], checker);
    } catch (const CheckerError& e) {
      throw TraceError("trace aborted at step " + std::to_string(i + 1) + ": " + e.what(),
                       std::move(record));
    }
    record.total_checker_calls += step.checker_calls;
    state = step.next;
    record.steps.push_back(TraceStep{i + 1, actions[i], std::move(step)});
    record.terminal = state;
  }
  return record;
}

std::string trace_to_jsonl(const TraceRecord& record) {
  std::ostringstream out;
  for (const auto& s : record.steps) {
    ordered_json line;
    line["t"] = s.t;
    line["action"] = s.action.action_text;
    line["scene"] = s.action.scene_text;
    line["prior"] = s.step.prior.name;
    line["next"] = s.step.next.name;
    if (s.step.fired_rule) {
      line["rule"] = *s.step.fired_rule;
    } else {
      line["rule"] = nullptr;
    }
    line["calls"] = s.step.checker_calls;
    out << line.dump() << "\n";
  }
  return out.str();
}

std::vector<SceneAction> actions_from_jsonl(const std::string& text) {
  std::vector<SceneAction> actions;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json doc;
    try {
      doc = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SyntaxError("trace line " + std::to_string(line_no) + ": " + e.what(), e.byte);
    }
    if (!doc.is_object() || !doc.contains("action") || !doc["action"].is_string()) {
      throw SchemaError("trace line " + std::to_string(line_no) +
                        " must be an object with an \"action\" string");
    }
    SceneAction sa;
    sa.action_text = doc["action"].get<std::string>();
    if (doc.contains("scene") && doc["scene"].is_string()) {
      sa.scene_text = doc["scene"].get<std::string>();
    }
    actions.push_back(std::move(sa));
  }
  return actions;
}

}  // namespace cfsm

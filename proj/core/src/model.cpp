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

#include "cfsm/model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <utility>

#include <json.hpp>

namespace cfsm {
namespace {

using ordered_json = nlohmann::ordered_json;

void reject_unknown_fields(const ordered_json& obj, std::initializer_list<std::string_view> known,
                           std::string_view where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw SchemaError("unknown field \"" + key + "\" in " + std::string(where));
    }
  }
}

const ordered_json& require(const ordered_json& obj, std::string_view key, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError("missing field \"" + std::string(key) + "\" in " + std::string(where));
  }
  return *it;
}

std::string require_string(const ordered_json& obj, std::string_view key, std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) {
    throw SyntaxError("field \"" + std::string(key) + "\" in " + std::string(where) +
                      " must be a string");
  }
  return v.get<std::string>();
}

ordered_json parse_json_document(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SyntaxError(e.what(), e.byte);
  }
}

std::size_t resolve_state(const MachineDefinition& m, const std::string& name,
                          std::string_view where) {
  auto id = m.find_state(name);
  if (!id) {
    throw SchemaError("undeclared state \"" + name + "\" referenced by " + std::string(where) +
                      " in machine \"" + m.machine_id + "\"");
  }
  return id->index;
}

MachineDefinition machine_from_json(const ordered_json& doc) {
  if (!doc.is_object()) throw SyntaxError("machine document must be a JSON object");
  reject_unknown_fields(doc, {"machine_id", "dimension", "perspective", "states", "initial", "rules"},
                        "machine");

  MachineDefinition m;
  m.machine_id = require_string(doc, "machine_id", "machine");
  m.dimension = require_string(doc, "dimension", "machine");
  const std::string perspective = require_string(doc, "perspective", "machine");
  auto p = perspective_from(perspective);
  if (!p) throw SchemaError("unknown perspective \"" + perspective + "\"");
  m.perspective = *p;

  const auto& states = require(doc, "states", "machine");
  if (!states.is_array()) throw SyntaxError("\"states\" must be an array of strings");
  for (const auto& s : states) {
    if (!s.is_string()) throw SyntaxError("\"states\" must be an array of strings");
    m.states.push_back(s.get<std::string>());
  }

  const std::string initial = require_string(doc, "initial", "machine");

  const auto& rules = require(doc, "rules", "machine");
  if (!rules.is_array()) throw SyntaxError("\"rules\" must be an array");
  for (const auto& r : rules) {
    if (!r.is_object()) throw SyntaxError("each rule must be an object");
    reject_unknown_fields(r, {"source", "priority", "guard"}, "rule");

    TransitionRule rule;
    const std::string source = require_string(r, "source", "rule");
    if (source != "*") rule.source = resolve_state(m, source, "rule source");

    const auto& priority = require(r, "priority", "rule");
    if (!priority.is_number_integer()) throw SyntaxError("rule \"priority\" must be an integer");
    rule.priority = priority.get<int>();

    const auto& guard = require(r, "guard", "rule");
    if (!guard.is_object()) throw SyntaxError("rule \"guard\" must be an object");
    reject_unknown_fields(guard, {"kind", "question", "target"}, "guard");
    const std::string kind = require_string(guard, "kind", "guard");
    auto k = guard_kind_from(kind);
    if (!k) throw SchemaError("unknown guard kind \"" + kind + "\"");
    rule.guard.kind = *k;
    if (auto q = guard.find("question"); q != guard.end()) {
      if (!q->is_string()) throw SyntaxError("guard \"question\" must be a string");
      rule.guard.question = q->get<std::string>();
    }
    rule.guard.target = resolve_state(m, require_string(guard, "target", "guard"), "guard target");
    m.rules.push_back(std::move(rule));
  }

  // "initial" is redundant with states[0] by invariant; a document that
  // disagrees with itself is rejected rather than silently repaired.
  if (m.states.empty() || initial != m.states.front()) {
    throw SchemaError("\"initial\" must name the first declared state (\"" +
                      std::string(kUnactivated) + "\")");
  }

  auto diagnostics = validate_machine(m);
  if (!diagnostics.empty()) throw SchemaError(diagnostics.front().message);
  return m;
}

ordered_json machine_to_json(const MachineDefinition& m) {
  ordered_json doc;
  doc["machine_id"] = m.machine_id;
  doc["dimension"] = m.dimension;
  doc["perspective"] = std::string(to_string(m.perspective));
  doc["states"] = m.states;
  doc["initial"] = m.states.empty() ? std::string(kUnactivated) : m.states.front();
  ordered_json rules = ordered_json::array();
  for (const auto& r : m.rules) {
    ordered_json rule;
    rule["source"] = r.source ? m.states.at(*r.source) : std::string("*");
    rule["priority"] = r.priority;
    ordered_json guard;
    guard["kind"] = std::string(to_string(r.guard.kind));
    if (r.guard.kind == GuardKind::kQuestion || r.guard.kind == GuardKind::kDefaultTarget) {
      guard["question"] = r.guard.question;
    }
    guard["target"] = m.states.at(r.guard.target);
    rule["guard"] = std::move(guard);
    rules.push_back(std::move(rule));
  }
  doc["rules"] = std::move(rules);
  return doc;
}

}  // namespace

std::string_view to_string(GuardKind kind) {
  switch (kind) {
    case GuardKind::kQuestion: return "question";
    case GuardKind::kDefaultTarget: return "default-target";
    case GuardKind::kAlways: return "always";
    case GuardKind::kNever: return "never";
  }
  return "question";
}

std::optional<GuardKind> guard_kind_from(std::string_view text) {
  if (text == "question") return GuardKind::kQuestion;
  if (text == "default-target") return GuardKind::kDefaultTarget;
  if (text == "always") return GuardKind::kAlways;
  if (text == "never") return GuardKind::kNever;
  return std::nullopt;
}

std::string_view to_string(Perspective p) {
  switch (p) {
    case Perspective::kActive: return "active";
    case Perspective::kPassive: return "passive";
    case Perspective::kShared: return "shared";
  }
  return "shared";
}

std::optional<Perspective> perspective_from(std::string_view text) {
  if (text == "active") return Perspective::kActive;
  if (text == "passive") return Perspective::kPassive;
  if (text == "shared") return Perspective::kShared;
  return std::nullopt;
}

std::optional<StateId> MachineDefinition::find_state(std::string_view name) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == name) return StateId{i, states[i]};
  }
  return std::nullopt;
}

std::vector<const TransitionRule*> MachineDefinition::rules_for(std::size_t source) const {
  std::vector<const TransitionRule*> own, wild, fallback;
  for (const auto& r : rules) {
    const bool applies = r.is_wildcard() || *r.source == source;
    if (!applies) continue;
    if (r.guard.kind == GuardKind::kDefaultTarget) {
      fallback.push_back(&r);
    } else if (r.is_wildcard()) {
      wild.push_back(&r);
    } else {
      own.push_back(&r);
    }
  }
  auto by_priority = [](const TransitionRule* a, const TransitionRule* b) {
    return a->priority < b->priority;
  };
  std::stable_sort(own.begin(), own.end(), by_priority);
  std::stable_sort(wild.begin(), wild.end(), by_priority);
  // Fallback checks run last, ordered by target declaration order; a state's
  // own fallback precedes a wildcard one for the same target.
  std::stable_sort(fallback.begin(), fallback.end(),
                   [&](const TransitionRule* a, const TransitionRule* b) {
                     if (a->guard.target != b->guard.target) return a->guard.target < b->guard.target;
                     if (a->is_wildcard() != b->is_wildcard()) return !a->is_wildcard();
                     return a->priority < b->priority;
                   });
  std::vector<const TransitionRule*> ordered;
  ordered.reserve(own.size() + wild.size() + fallback.size());
  ordered.insert(ordered.end(), own.begin(), own.end());
  ordered.insert(ordered.end(), wild.begin(), wild.end());
  ordered.insert(ordered.end(), fallback.begin(), fallback.end());
  return ordered;
}

std::size_t MachineDefinition::max_guard_fanout() const {
  std::size_t fanout = 0;
  for (std::size_t s = 0; s < states.size(); ++s) {
    fanout = std::max(fanout, rules_for(s).size());
  }
  return fanout;
}

std::string rule_ref(const MachineDefinition& machine, const TransitionRule& rule) {
  std::string source = rule.source ? machine.states.at(*rule.source) : std::string("*");
  return source + "#" + std::to_string(rule.priority);
}

const MachineDefinition* CharacterStateModel::find_machine(std::string_view machine_id) const {
  for (const auto& m : machines) {
    if (m.machine_id == machine_id) return &m;
  }
  return nullptr;
}

std::vector<Diagnostic> validate_machine(const MachineDefinition& m) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string message) {
    out.push_back({m.machine_id, Severity::kError, std::move(message)});
  };

  if (m.states.size() < 2) {
    error("machine must declare at least the two reserved states");
  }
  if (!m.states.empty() && m.states.front() != kUnactivated) {
    error("first state must be \"" + std::string(kUnactivated) + "\", got \"" + m.states.front() +
          "\"");
  }
  if (!m.states.empty() && m.states.back() != kOther) {
    error("last state must be \"" + std::string(kOther) + "\", got \"" + m.states.back() + "\"");
  }

  std::set<std::string_view> seen;
  for (const auto& name : m.states) {
    if (name.empty()) error("state names must be non-empty");
    if (name == "*") error("state name \"*\" is reserved for the wildcard source");
    if (!seen.insert(name).second) error("duplicate state name \"" + name + "\"");
  }

  // priority uniqueness per source (the wildcard is its own source bucket)
  std::map<std::pair<bool, std::size_t>, std::set<int>> priorities;
  for (const auto& r : m.rules) {
    if (r.source && *r.source >= m.states.size()) {
      error("rule source index " + std::to_string(*r.source) + " out of range");
      continue;
    }
    if (r.guard.target >= m.states.size()) {
      error("guard target index " + std::to_string(r.guard.target) + " out of range");
      continue;
    }
    const bool needs_question =
        r.guard.kind == GuardKind::kQuestion || r.guard.kind == GuardKind::kDefaultTarget;
    if (needs_question && r.guard.question.empty()) {
      error("rule " + rule_ref(m, r) + " requires a non-empty question");
    }
    if (!needs_question && !r.guard.question.empty()) {
      error("rule " + rule_ref(m, r) + " must not carry a question for guard kind \"" +
            std::string(to_string(r.guard.kind)) + "\"");
    }
    auto key = std::make_pair(r.is_wildcard(), r.source.value_or(0));
    if (!priorities[key].insert(r.priority).second) {
      error("duplicate priority " + std::to_string(r.priority) + " for source \"" +
            (r.source ? m.states.at(*r.source) : std::string("*")) + "\"");
    }
  }
  return out;
}

std::vector<Diagnostic> validate_model(const CharacterStateModel& model) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string machine_id, std::string message) {
    out.push_back({std::move(machine_id), Severity::kError, std::move(message)});
  };

  if (model.character_id.empty()) error("", "character_id must be non-empty");
  if (model.relevance_question.empty()) error("", "relevance_question must be non-empty");
  if (model.activity_question.empty()) error("", "activity_question must be non-empty");

  std::set<std::string_view> ids;
  std::map<std::pair<std::string, Perspective>, std::string> dimension_slots;
  for (const auto& m : model.machines) {
    auto machine_diags = validate_machine(m);
    out.insert(out.end(), machine_diags.begin(), machine_diags.end());

    if (!ids.insert(m.machine_id).second) {
      error(m.machine_id, "duplicate machine_id \"" + m.machine_id + "\"");
    }
    auto slot = std::make_pair(m.dimension, m.perspective);
    auto [it, inserted] = dimension_slots.emplace(slot, m.machine_id);
    if (!inserted) {
      error(m.machine_id, "machines \"" + it->second + "\" and \"" + m.machine_id +
                              "\" both model dimension \"" + m.dimension + "\" with perspective \"" +
                              std::string(to_string(m.perspective)) + "\"");
    }
  }
  return out;
}

MachineDefinition parse_machine(const std::string& text) {
  return machine_from_json(parse_json_document(text));
}

std::string serialize_machine(const MachineDefinition& machine) {
  return machine_to_json(machine).dump(2) + "\n";
}

CharacterStateModel parse_model(const std::string& text) {
  const ordered_json doc = parse_json_document(text);
  if (!doc.is_object()) throw SyntaxError("character model must be a JSON object");
  reject_unknown_fields(doc, {"character_id", "relevance_question", "activity_question", "machines"},
                        "character model");
  CharacterStateModel model;
  model.character_id = require_string(doc, "character_id", "character model");
  model.relevance_question = require_string(doc, "relevance_question", "character model");
  model.activity_question = require_string(doc, "activity_question", "character model");
  const auto& machines = require(doc, "machines", "character model");
  if (!machines.is_array()) throw SyntaxError("\"machines\" must be an array");
  for (const auto& m : machines) model.machines.push_back(machine_from_json(m));

  auto diagnostics = validate_model(model);
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::kError) throw SchemaError(d.message);
  }
  return model;
}

std::string serialize_model(const CharacterStateModel& model) {
  ordered_json doc;
  doc["character_id"] = model.character_id;
  doc["relevance_question"] = model.relevance_question;
  doc["activity_question"] = model.activity_question;
  ordered_json machines = ordered_json::array();
  for (const auto& m : model.machines) machines.push_back(machine_to_json(m));
  doc["machines"] = std::move(machines);
  return doc.dump(2) + "\n";
}

}  // namespace cfsm

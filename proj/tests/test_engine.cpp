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

#include <doctest.h>

#include <cmath>

#include "cfsm/engine.hpp"
#include "cfsm/synthbench.hpp"
#include "support.hpp"

using namespace cfsm;

namespace {

SceneAction act(const std::string& text) { return SceneAction{"", text, std::nullopt}; }

// Independent second transcription of the Westeros adjacency, kept as a flat
// edge list. The engine's table must agree cell-for-cell.
struct Edge {
  const char* from;
  const char* dir;
  const char* to;
};
const Edge kWesterosEdges[] = {
    {"the north", "south", "the riverlands"},
    {"the north", "southwest", "the iron islands"},
    {"the north", "southeast", "the vale"},
    {"the iron islands", "northeast", "the north"},
    {"the iron islands", "east", "the riverlands"},
    {"the iron islands", "southeast", "the westerlands"},
    {"the riverlands", "north", "the north"},
    {"the riverlands", "west", "the iron islands"},
    {"the riverlands", "east", "the vale"},
    {"the riverlands", "southwest", "the westerlands"},
    {"the riverlands", "southeast", "the crownlands"},
    {"the vale", "northwest", "the north"},
    {"the vale", "west", "the riverlands"},
    {"the vale", "southwest", "the crownlands"},
    {"the westerlands", "northwest", "the iron islands"},
    {"the westerlands", "northeast", "the riverlands"},
    {"the westerlands", "south", "the reach"},
    {"the crownlands", "northwest", "the riverlands"},
    {"the crownlands", "northeast", "the vale"},
    {"the crownlands", "southwest", "the reach"},
    {"the crownlands", "south", "the stormlands"},
    {"the reach", "north", "the westerlands"},
    {"the reach", "northeast", "the crownlands"},
    {"the reach", "east", "the stormlands"},
    {"the reach", "south", "dorne"},
    {"the stormlands", "north", "the crownlands"},
    {"the stormlands", "west", "the reach"},
    {"the stormlands", "southwest", "dorne"},
    {"dorne", "north", "the reach"},
    {"dorne", "northeast", "the stormlands"},
};

}  // namespace

TEST_CASE("mario: small plus a super mushroom becomes super") {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  const EngineStep step = get_next_state(machine, *machine.find_state("small"),
                                         act("get a super mushroom"), oracle);
  CHECK(step.next.name == "super");
  CHECK(step.fired_rule.has_value());
  CHECK(step.checker_calls >= 1);
}

TEST_CASE("no matching guard self-loops without a fired rule") {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  const EngineStep step = get_next_state(machine, *machine.find_state("fire"),
                                         act("whistles a tune"), oracle);
  CHECK(step.next.name == "fire");
  CHECK_FALSE(step.fired_rule.has_value());
}

TEST_CASE("westeros table equals the independent adjacency transcription") {
  const auto table = synth::builtin_table(synth::kWesteros);

  // every listed edge is in the table
  for (const Edge& e : kWesterosEdges) {
    const auto s = table.state_index(e.from);
    const auto a = table.action_index(std::string("travel ") + e.dir);
    REQUIRE(s.has_value());
    REQUIRE(a.has_value());
    CHECK(table.states[table.next_index(*s, *a)] == e.to);
  }
  // every non-self cell of the table is in the edge list (no extras)
  for (std::size_t s = 0; s < table.states.size(); ++s) {
    for (std::size_t a = 0; a < table.actions.size(); ++a) {
      const std::size_t t = table.next_index(s, a);
      if (t == s) continue;
      const bool listed = std::any_of(std::begin(kWesterosEdges), std::end(kWesterosEdges),
                                      [&](const Edge& e) {
                                        return table.states[s] == e.from &&
                                               table.actions[a] == std::string("travel ") + e.dir &&
                                               table.states[t] == e.to;
                                      });
      CHECK_MESSAGE(listed, table.states[s], " --", table.actions[a], "--> ", table.states[t]);
    }
  }
}

TEST_CASE("westeros: dorne travel north reaches the reach through the engine") {
  const auto table = synth::builtin_table(synth::kWesteros);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  const EngineStep step =
      get_next_state(machine, *machine.find_state("dorne"), act("travel north"), oracle);
  CHECK(step.next.name == "the reach");

  // compass ambiguity guard: north moves must not fire northeast rules
  const EngineStep ne =
      get_next_state(machine, *machine.find_state("dorne"), act("travel northeast"), oracle);
  CHECK(ne.next.name == "the stormlands");
}

TEST_CASE("first-true-wins: later guards are not evaluated") {
  MachineDefinition m;
  m.machine_id = "ordered";
  m.dimension = "ability";
  m.perspective = Perspective::kShared;
  m.states = {"Unactivated", "a", "b", "Other"};
  for (int p = 0; p < 3; ++p) {
    TransitionRule r;
    r.source = 1;
    r.priority = p;
    r.guard.kind = GuardKind::kQuestion;
    r.guard.question = "q" + std::to_string(p) + "?";
    r.guard.target = 2;
    m.rules.push_back(r);
  }
  REQUIRE(validate_machine(m).empty());

  ScriptedChecker scripted(std::vector<ScriptedRule>{{"", "q1", false, Label::kTrue, std::log(0.9)}});
  test::RecordingChecker recorder(scripted);
  const EngineStep step = get_next_state(m, m.state(1), act("event"), recorder);
  CHECK(step.next.index == 2);
  CHECK(step.checker_calls == 2);  // q0 answered false, q1 fired
  REQUIRE(recorder.log.size() == 2);
  CHECK(recorder.log[0].question == "q0?");
  CHECK(recorder.log[1].question == "q1?");
  CHECK(*step.fired_rule == "a#1");
}

TEST_CASE("unknown verdicts are decisively false for the deterministic engine") {
  MachineDefinition m;
  m.machine_id = "u";
  m.dimension = "ability";
  m.perspective = Perspective::kShared;
  m.states = {"Unactivated", "a", "Other"};
  TransitionRule r;
  r.source = 1;
  r.priority = 0;
  r.guard.kind = GuardKind::kQuestion;
  r.guard.question = "ambiguous?";
  r.guard.target = 2;
  m.rules.push_back(r);

  ScriptedChecker scripted(std::vector<ScriptedRule>{{"", "ambiguous", false, Label::kUnknown, std::log(0.5)}});
  const EngineStep step = get_next_state(m, m.state(1), act("event"), scripted);
  CHECK(step.next.index == 1);  // self-loop, no firing
  CHECK(step.checker_calls == 1);
}

TEST_CASE("always fires without a call; never neither fires nor calls") {
  MachineDefinition m;
  m.machine_id = "an";
  m.dimension = "ability";
  m.perspective = Perspective::kShared;
  m.states = {"Unactivated", "a", "b", "Other"};
  TransitionRule never;
  never.source = 1;
  never.priority = 0;
  never.guard.kind = GuardKind::kNever;
  never.guard.target = 3;
  TransitionRule always;
  always.source = 1;
  always.priority = 1;
  always.guard.kind = GuardKind::kAlways;
  always.guard.target = 2;
  m.rules = {never, always};

  ScriptedChecker scripted(std::vector<ScriptedRule>{});
  test::RecordingChecker recorder(scripted);
  const EngineStep step = get_next_state(m, m.state(1), act("event"), recorder);
  CHECK(step.next.index == 2);
  CHECK(step.checker_calls == 0);
  CHECK(recorder.log.empty());
}

TEST_CASE("default-target fallbacks run last, in target declaration order") {
  MachineDefinition m;
  m.machine_id = "fb";
  m.dimension = "ability";
  m.perspective = Perspective::kShared;
  m.states = {"Unactivated", "a", "b", "c", "Other"};
  TransitionRule q;  // specific rule that will not fire
  q.source = 1;
  q.priority = 0;
  q.guard.kind = GuardKind::kQuestion;
  q.guard.question = "nope?";
  q.guard.target = 2;
  TransitionRule fb_c;  // fallback toward the later state, authored first
  fb_c.source = 1;
  fb_c.priority = 1;
  fb_c.guard.kind = GuardKind::kDefaultTarget;
  fb_c.guard.question = "now c?";
  fb_c.guard.target = 3;
  TransitionRule fb_b;
  fb_b.source = 1;
  fb_b.priority = 2;
  fb_b.guard.kind = GuardKind::kDefaultTarget;
  fb_b.guard.question = "now b?";
  fb_b.guard.target = 2;
  m.rules = {q, fb_c, fb_b};

  // both fallbacks would answer true; target order must pick b (index 2)
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"", "now", false, Label::kTrue, std::log(0.9)}});
  test::RecordingChecker recorder(scripted);
  const EngineStep step = get_next_state(m, m.state(1), act("event"), recorder);
  CHECK(step.next.index == 2);
  REQUIRE(recorder.log.size() == 2);  // "nope?" then the b fallback
  CHECK(recorder.log[1].question == "now b?");
}

TEST_CASE("wildcard rules run after the state's own rules") {
  const std::string doc = R"({
    "machine_id": "wild", "dimension": "ability", "perspective": "shared",
    "states": ["Unactivated", "small", "super", "miss", "Other"],
    "initial": "Unactivated",
    "rules": [
      {"source": "small", "priority": 0,
       "guard": {"kind": "question", "question": "goomba hit?", "target": "miss"}},
      {"source": "*", "priority": 0,
       "guard": {"kind": "question", "question": "goomba hit?", "target": "small"}}
    ]
  })";
  const MachineDefinition m = parse_machine(doc);
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"goomba", "goomba", false, Label::kTrue, std::log(0.9)}});

  // small's own rule wins over the wildcard
  CHECK(get_next_state(m, *m.find_state("small"), act("goomba strikes"), scripted).next.name ==
        "miss");
  // super has no own rule, so the wildcard catches the hit
  CHECK(get_next_state(m, *m.find_state("super"), act("goomba strikes"), scripted).next.name ==
        "small");
}

TEST_CASE("foreign state is rejected") {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));
  CHECK_THROWS_AS(get_next_state(machine, StateId{99, "nowhere"}, act("x"), oracle), SchemaError);
}

// ---- step_character routing ------------------------------------------------

namespace {

CharacterStateModel routing_model() {
  CharacterStateModel model;
  model.character_id = "hero";
  model.relevance_question = "Does this involve hero?";
  model.activity_question = "Is hero the actor?";

  auto machine = [](const char* id, Perspective p) {
    MachineDefinition m;
    m.machine_id = id;
    m.dimension = id;
    m.perspective = p;
    m.states = {"Unactivated", "hot", "Other"};
    TransitionRule r;
    r.source = 0;
    r.priority = 0;
    r.guard.kind = GuardKind::kQuestion;
    r.guard.question = std::string("does the event heat ") + id + "?";
    r.guard.target = 1;
    m.rules = {r};
    return m;
  };
  model.machines = {machine("active-dim", Perspective::kActive),
                    machine("passive-dim", Perspective::kPassive),
                    machine("shared-dim", Perspective::kShared)};
  return model;
}

std::map<std::string, StateId> initial_states(const CharacterStateModel& model) {
  std::map<std::string, StateId> states;
  for (const auto& m : model.machines) states.emplace(m.machine_id, m.initial());
  return states;
}

}  // namespace

TEST_CASE("irrelevant actions skip every machine with exactly one call") {
  const CharacterStateModel model = routing_model();
  ScriptedChecker scripted(std::vector<ScriptedRule>{});  // everything answers false
  test::RecordingChecker recorder(scripted);

  const CharacterStep step =
      step_character(model, initial_states(model), act("someone else sneezes"), recorder);
  CHECK(step.total_checker_calls() == 1);
  CHECK(recorder.log.size() == 1);
  for (const auto& [id, s] : step.steps) {
    CHECK(s.routing == Routing::kSkippedIrrelevant);
    CHECK(s.next == s.prior);
    CHECK_FALSE(s.fired_rule.has_value());
    CHECK(s.checker_calls == 0);
  }
}

TEST_CASE("relevant active actions advance active and shared machines only") {
  const CharacterStateModel model = routing_model();
  std::vector<ScriptedRule> rules = {
      {"", "involve hero", false, Label::kTrue, std::log(0.9)},
      {"", "the actor", false, Label::kTrue, std::log(0.9)},
      {"", "heat", false, Label::kTrue, std::log(0.9)},
  };
  ScriptedChecker scripted(rules);

  const CharacterStep step =
      step_character(model, initial_states(model), act("hero lights a fire"), scripted);
  CHECK(step.steps.at("active-dim").next.name == "hot");
  CHECK(step.steps.at("active-dim").routing == Routing::kActive);
  CHECK(step.steps.at("passive-dim").next.name == "Unactivated");
  CHECK(step.steps.at("passive-dim").routing == Routing::kSkippedIrrelevant);
  CHECK(step.steps.at("shared-dim").next.name == "hot");
  CHECK(step.steps.at("shared-dim").routing == Routing::kShared);
  CHECK(step.routing_calls == 2);
}

TEST_CASE("relevant passive actions route to passive machines") {
  const CharacterStateModel model = routing_model();
  std::vector<ScriptedRule> rules = {
      {"", "involve hero", false, Label::kTrue, std::log(0.9)},
      // activity question answers false -> passive role
      {"", "heat", false, Label::kTrue, std::log(0.9)},
  };
  ScriptedChecker scripted(rules);

  const CharacterStep step =
      step_character(model, initial_states(model), act("a fire warms hero"), scripted);
  CHECK(step.steps.at("active-dim").routing == Routing::kSkippedIrrelevant);
  CHECK(step.steps.at("passive-dim").next.name == "hot");
  CHECK(step.steps.at("passive-dim").routing == Routing::kPassive);
  CHECK(step.steps.at("shared-dim").next.name == "hot");
}

TEST_CASE("character step call budget: at most 2 + sum of guards") {
  const CharacterStateModel model = routing_model();
  std::vector<ScriptedRule> rules = {
      {"", "involve hero", false, Label::kTrue, std::log(0.9)},
      {"", "the actor", false, Label::kTrue, std::log(0.9)},
  };
  ScriptedChecker scripted(rules);
  test::RecordingChecker recorder(scripted);

  const CharacterStep step =
      step_character(model, initial_states(model), act("hero waits"), recorder);
  std::size_t guard_sum = 0;
  for (const auto& m : model.machines) guard_sum += m.rules_for(0).size();
  CHECK(step.total_checker_calls() <= 2 + guard_sum);
  CHECK(step.total_checker_calls() == recorder.log.size());
}

TEST_CASE("step_character requires a state for every machine") {
  const CharacterStateModel model = routing_model();
  std::map<std::string, StateId> incomplete;
  incomplete.emplace("active-dim", model.machines[0].initial());
  ScriptedChecker scripted(std::vector<ScriptedRule>{});
  CHECK_THROWS_AS(step_character(model, incomplete, act("x"), scripted), SchemaError);
}

// ---- run_trace ---------------------------------------------------------------

TEST_CASE("empty action list returns the initial state with zero calls") {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  const TraceRecord record = run_trace(machine, *machine.find_state("small"), {}, oracle);
  CHECK(record.terminal.name == "small");
  CHECK(record.total_checker_calls == 0);
  CHECK(record.steps.empty());
}

TEST_CASE("length-10 random mario paths agree with the table-walk oracle") {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> action_idx;
    std::vector<SceneAction> actions;
    for (int i = 0; i < 10; ++i) {
      action_idx.push_back(rng.next_below(table.actions.size()));
      actions.push_back(act(table.actions[action_idx.back()]));
    }
    const TraceRecord record = run_trace(machine, *machine.find_state("small"), actions, oracle);
    const std::size_t expected = synth::walk(table, *table.state_index("small"), action_idx);
    CHECK(record.terminal.name == table.states[expected]);
  }
}

TEST_CASE("checker calls grow linearly with path length") {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));
  const std::size_t max_guards = machine.max_guard_fanout();

  Rng rng(1234);
  double mean5 = 0.0, mean10 = 0.0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    for (int length : {5, 10}) {
      std::vector<SceneAction> actions;
      for (int i = 0; i < length; ++i) {
        actions.push_back(act(table.actions[rng.next_below(table.actions.size())]));
      }
      const TraceRecord record = run_trace(machine, machine.state(1), actions, oracle);
      CHECK(record.total_checker_calls <= static_cast<std::size_t>(length) * (2 + max_guards));
      (length == 5 ? mean5 : mean10) += static_cast<double>(record.total_checker_calls);
    }
  }
  mean5 /= trials;
  mean10 /= trials;
  CHECK(mean10 <= 2.0 * mean5 + static_cast<double>(max_guards));
}

TEST_CASE("determinism: identical runs produce identical serialized traces") {
  const auto table = synth::builtin_table(synth::kCodEnemy);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  std::vector<SceneAction> actions;
  Rng rng(5);
  for (int i = 0; i < 8; ++i) actions.push_back(act(table.actions[rng.next_below(5)]));

  const TraceRecord a = run_trace(machine, machine.state(1), actions, oracle);
  const TraceRecord b = run_trace(machine, machine.state(1), actions, oracle);
  CHECK(trace_to_jsonl(a) == trace_to_jsonl(b));
}

TEST_CASE("markov property: suffix replay from an intermediate state matches") {
  const auto table = synth::builtin_table(synth::kWesteros);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  Rng rng(6);
  std::vector<SceneAction> actions;
  for (int i = 0; i < 10; ++i) actions.push_back(act(table.actions[rng.next_below(8)]));

  const TraceRecord full = run_trace(machine, machine.state(1), actions, oracle);
  for (std::size_t split = 1; split < actions.size(); ++split) {
    const StateId mid = full.steps[split - 1].step.next;
    const std::vector<SceneAction> suffix(actions.begin() + static_cast<long>(split),
                                          actions.end());
    const TraceRecord replay = run_trace(machine, mid, suffix, oracle);
    CHECK(replay.terminal == full.terminal);
  }
}

TEST_CASE("checker failure aborts the trace with the partial record attached") {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));
  test::FailingChecker failing(oracle, 4);  // a handful of calls, then outage

  std::vector<SceneAction> actions(6, act("get a fire flower"));
  try {
    run_trace(machine, machine.state(1), actions, failing);
    FAIL("expected TraceError");
  } catch (const TraceError& e) {
    CHECK(e.partial().steps.size() < actions.size());
    CHECK(e.partial().machine_id == machine.machine_id);
  }
}

TEST_CASE("trace jsonl round-trips action inputs") {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  std::vector<SceneAction> actions = {act("get a super mushroom"), act("get a fire flower")};
  const TraceRecord record = run_trace(machine, machine.state(1), actions, oracle);
  const std::string jsonl = trace_to_jsonl(record);

  const auto parsed = actions_from_jsonl(jsonl);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].action_text == "get a super mushroom");
  CHECK(parsed[1].action_text == "get a fire flower");

  CHECK(jsonl.find("\"rule\":") != std::string::npos);
  CHECK(jsonl.find("\"calls\":") != std::string::npos);
}

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

#include "cfsm/synthbench.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <json.hpp>

#include "cfsm/engine.hpp"
#include "cfsm/rng.hpp"

namespace cfsm::synth {
namespace {

using ordered_json = nlohmann::ordered_json;

struct TableBuilder {
  GroundTruthTable table;
  explicit TableBuilder(std::string name, std::vector<std::string> states,
                        std::vector<std::string> actions) {
    table.name = std::move(name);
    table.states = std::move(states);
    table.actions = std::move(actions);
    // default every cell to a self-loop; moves overwrite
    table.next.resize(table.states.size() * table.actions.size());
    for (std::size_t s = 0; s < table.states.size(); ++s) {
      for (std::size_t a = 0; a < table.actions.size(); ++a) {
        table.next[s * table.actions.size() + a] = s;
      }
    }
  }
  TableBuilder& move(std::string_view from, std::string_view action, std::string_view to) {
    const auto s = table.state_index(from);
    const auto a = table.action_index(action);
    const auto t = table.state_index(to);
    if (!s || !a || !t) throw SchemaError("bad move in builtin table " + table.name);
    table.next[*s * table.actions.size() + *a] = *t;
    return *this;
  }
  TableBuilder& initial(std::string_view state) {
    table.initial = *table.state_index(state);
    return *this;
  }
};

GroundTruthTable make_mario() {
  // get a fire flower powers small Mario up to super first; fire form needs a
  // second flower. Any hit in a powered form drops back to small; a hit while
  // small is a miss, which absorbs everything.
  TableBuilder b("mario", {"small", "super", "fire", "miss"},
                 {"get a super mushroom", "get a fire flower", "hit by a goomba"});
  b.move("small", "get a super mushroom", "super")
      .move("small", "get a fire flower", "super")
      .move("small", "hit by a goomba", "miss")
      .move("super", "get a fire flower", "fire")
      .move("super", "hit by a goomba", "small")
      .move("fire", "hit by a goomba", "small")
      .initial("small");
  return b.table;
}

GroundTruthTable make_cod_enemy() {
  TableBuilder b("cod-enemy", {"idle", "alert", "engaged", "retreat", "death"},
                 {"stay hidden", "make noise", "reveal position", "sustain fire",
                  "eliminate the enemy"});
  b.move("idle", "make noise", "alert")
      .move("idle", "reveal position", "engaged")
      .move("idle", "sustain fire", "engaged")
      .move("idle", "eliminate the enemy", "death")
      .move("alert", "stay hidden", "idle")
      .move("alert", "reveal position", "engaged")
      .move("alert", "sustain fire", "engaged")
      .move("alert", "eliminate the enemy", "death")
      .move("engaged", "stay hidden", "alert")
      .move("engaged", "sustain fire", "retreat")
      .move("engaged", "eliminate the enemy", "death")
      .move("retreat", "stay hidden", "idle")
      .move("retreat", "make noise", "alert")
      .move("retreat", "reveal position", "engaged")
      .move("retreat", "eliminate the enemy", "death")
      .initial("idle");
  return b.table;
}

GroundTruthTable make_westeros() {
  // Region adjacency under eight compass moves; invalid directions keep the
  // traveller in place. Every defined move has its reverse defined, which the
  // adjacency-symmetry oracle in the tests relies on.
  TableBuilder b("westeros",
                 {"the westerlands", "the riverlands", "the vale", "the crownlands",
                  "the stormlands", "the reach", "dorne", "the north", "the iron islands"},
                 {"travel north", "travel northeast", "travel east", "travel southeast",
                  "travel south", "travel southwest", "travel west", "travel northwest"});
  b.move("the north", "travel south", "the riverlands")
      .move("the north", "travel southwest", "the iron islands")
      .move("the north", "travel southeast", "the vale")
      .move("the iron islands", "travel northeast", "the north")
      .move("the iron islands", "travel east", "the riverlands")
      .move("the iron islands", "travel southeast", "the westerlands")
      .move("the riverlands", "travel north", "the north")
      .move("the riverlands", "travel west", "the iron islands")
      .move("the riverlands", "travel east", "the vale")
      .move("the riverlands", "travel southwest", "the westerlands")
      .move("the riverlands", "travel southeast", "the crownlands")
      .move("the vale", "travel northwest", "the north")
      .move("the vale", "travel west", "the riverlands")
      .move("the vale", "travel southwest", "the crownlands")
      .move("the westerlands", "travel northwest", "the iron islands")
      .move("the westerlands", "travel northeast", "the riverlands")
      .move("the westerlands", "travel south", "the reach")
      .move("the crownlands", "travel northwest", "the riverlands")
      .move("the crownlands", "travel northeast", "the vale")
      .move("the crownlands", "travel southwest", "the reach")
      .move("the crownlands", "travel south", "the stormlands")
      .move("the reach", "travel north", "the westerlands")
      .move("the reach", "travel northeast", "the crownlands")
      .move("the reach", "travel east", "the stormlands")
      .move("the reach", "travel south", "dorne")
      .move("the stormlands", "travel north", "the crownlands")
      .move("the stormlands", "travel west", "the reach")
      .move("the stormlands", "travel southwest", "dorne")
      .move("dorne", "travel north", "the reach")
      .move("dorne", "travel northeast", "the stormlands")
      .initial("the westerlands");
  return b.table;
}

}  // namespace

bool GroundTruthTable::is_absorbing(std::size_t state) const {
  for (std::size_t a = 0; a < actions.size(); ++a) {
    if (next_index(state, a) != state) return false;
  }
  return true;
}

std::optional<std::size_t> GroundTruthTable::state_index(std::string_view name) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> GroundTruthTable::action_index(std::string_view name) const {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] == name) return i;
  }
  return std::nullopt;
}

void GroundTruthTable::assert_valid() const {
  if (states.empty() || actions.empty()) throw SchemaError("table must have states and actions");
  if (next.size() != states.size() * actions.size()) {
    throw SchemaError("table " + name + " is not total");
  }
  for (std::size_t cell : next) {
    if (cell >= states.size()) throw SchemaError("table " + name + " has dangling cells");
  }
  if (initial >= states.size()) throw SchemaError("table " + name + " has bad initial state");
}

GroundTruthTable builtin_table(std::string_view fsm) {
  GroundTruthTable table;
  if (fsm == kMario) {
    table = make_mario();
  } else if (fsm == kCodEnemy) {
    table = make_cod_enemy();
  } else if (fsm == kWesteros) {
    table = make_westeros();
  } else {
    throw UnknownBenchmark("unknown benchmark FSM \"" + std::string(fsm) + "\"");
  }
  table.assert_valid();
  return table;
}

std::vector<std::string> builtin_names() {
  return {std::string(kMario), std::string(kCodEnemy), std::string(kWesteros)};
}

std::string guard_question(const std::string& action) {
  return "Does the observed action state that the character experienced '" + action + "'?";
}

std::string cell_question(const std::string& source, const std::string& target) {
  return "Given this action, does the character move from '" + source + "' to '" + target + "'?";
}

MachineDefinition to_machine(const GroundTruthTable& table) {
  MachineDefinition m;
  m.machine_id = table.name;
  m.dimension = "ability";
  m.perspective = Perspective::kShared;
  m.states.push_back(std::string(kUnactivated));
  for (const auto& s : table.states) m.states.push_back(s);
  m.states.push_back(std::string(kOther));

  for (std::size_t s = 0; s < table.states.size(); ++s) {
    int priority = 0;
    for (std::size_t a = 0; a < table.actions.size(); ++a) {
      const std::size_t t = table.next_index(s, a);
      if (t == s) continue;  // self-loop cells need no rule
      TransitionRule rule;
      rule.source = s + 1;  // shifted past Unactivated
      rule.priority = priority++;
      rule.guard.kind = GuardKind::kQuestion;
      rule.guard.question = guard_question(table.actions[a]);
      rule.guard.target = t + 1;
      m.rules.push_back(std::move(rule));
    }
  }
  return m;
}

std::vector<ScriptedRule> oracle_rules(const GroundTruthTable& table, double true_logprob) {
  std::vector<ScriptedRule> rules;
  for (const auto& action : table.actions) {
    ScriptedRule rule;
    rule.action_pattern = action;
    rule.question_pattern = "'" + action + "'";
    rule.anchor = true;
    rule.label = Label::kTrue;
    rule.logprob = true_logprob;
    rules.push_back(std::move(rule));
  }
  return rules;
}

QuestionBank to_question_bank(const MachineDefinition& machine) {
  const std::size_t n = machine.state_count();
  QuestionBank bank;
  bank.mode = BankMode::kGrid;
  bank.n = n;
  bank.grid.assign(n * n, "");
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      bank.grid[t * n + s] = cell_question(machine.states[s], machine.states[t]);
    }
  }
  return bank;
}

std::vector<ScriptedRule> bank_oracle_rules(const GroundTruthTable& table,
                                            const MachineDefinition& machine, double true_logprob,
                                            double false_logprob) {
  std::vector<ScriptedRule> rules;
  for (std::size_t s = 0; s < table.states.size(); ++s) {
    for (std::size_t a = 0; a < table.actions.size(); ++a) {
      const std::size_t t = table.next_index(s, a);
      ScriptedRule rule;
      rule.action_pattern = table.actions[a];
      rule.question_pattern =
          "from '" + machine.states[s + 1] + "' to '" + machine.states[t + 1] + "'";
      rule.anchor = true;
      rule.label = Label::kTrue;
      rule.logprob = true_logprob;
      rules.push_back(std::move(rule));
    }
  }
  // Everything else (wrong cells, reserved rows) falls to a catch-all false
  // rule so the false logit is explicit rather than the checker default.
  ScriptedRule fallback;
  fallback.question_pattern = "'";
  fallback.label = Label::kFalse;
  fallback.logprob = false_logprob;
  rules.push_back(std::move(fallback));
  return rules;
}

std::size_t walk(const GroundTruthTable& table, std::size_t initial,
                 const std::vector<std::size_t>& actions) {
  std::size_t state = initial;
  for (std::size_t a : actions) state = table.next_index(state, a);
  return state;
}

namespace {

SynthTrace random_trace(const GroundTruthTable& table, std::size_t length, Rng rng) {
  SynthTrace trace;
  trace.initial = table.initial;
  trace.actions.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    trace.actions.push_back(rng.next_below(table.actions.size()));
  }
  trace.terminal = walk(table, trace.initial, trace.actions);
  return trace;
}

std::uint64_t pool_tag(const BenchmarkConfig& cfg, std::size_t length) {
  return Rng::hash_tag(cfg.fsm) ^ Rng::mix(length);
}

}  // namespace

std::vector<SynthTrace> generate_pool(const GroundTruthTable& table, const BenchmarkConfig& cfg,
                                      std::size_t length) {
  std::vector<SynthTrace> pool;
  pool.reserve(cfg.pool_size);
  const std::uint64_t tag = pool_tag(cfg, length);
  for (std::size_t i = 0; i < cfg.pool_size; ++i) {
    pool.push_back(random_trace(table, length, Rng::child(cfg.seed, tag, i)));
  }
  return pool;
}

std::vector<std::set<std::size_t>> reachable_sets(const GroundTruthTable& table,
                                                  std::size_t initial, std::size_t max_len) {
  std::vector<std::set<std::size_t>> sets;
  sets.push_back({initial});
  for (std::size_t t = 1; t <= max_len; ++t) {
    std::set<std::size_t> next_set;
    for (std::size_t s : sets.back()) {
      for (std::size_t a = 0; a < table.actions.size(); ++a) {
        next_set.insert(table.next_index(s, a));
      }
    }
    sets.push_back(std::move(next_set));
  }
  return sets;
}

BalancedSample balanced_sample(const GroundTruthTable& table, std::vector<SynthTrace> pool,
                               const BenchmarkConfig& cfg, std::size_t length) {
  BalancedSample out;
  if (cfg.per_terminal == 0) {
    for (const auto& s : table.states) out.per_terminal_counts[s] = 0;
    return out;
  }

  std::vector<std::vector<SynthTrace>> by_terminal(table.states.size());
  for (auto& trace : pool) by_terminal[trace.terminal].push_back(std::move(trace));

  const auto reachable = reachable_sets(table, table.initial, length);
  const std::set<std::size_t>& terminal_set = reachable[length];

  // Top-up pass: keep drawing fresh random traces (separate stream from the
  // pool's) while some reachable terminal is short, within the attempt bound.
  std::size_t deficit = 0;
  for (std::size_t s = 0; s < table.states.size(); ++s) {
    if (terminal_set.contains(s) && by_terminal[s].size() < cfg.per_terminal) {
      deficit += cfg.per_terminal - by_terminal[s].size();
    }
  }
  const std::uint64_t topup_tag = pool_tag(cfg, length) ^ 0x70557055ULL;
  const std::size_t attempt_bound = cfg.top_up_factor * cfg.pool_size;
  for (std::size_t attempt = 0; deficit > 0 && attempt < attempt_bound; ++attempt) {
    SynthTrace trace = random_trace(table, length, Rng::child(cfg.seed, topup_tag, attempt));
    auto& bucket = by_terminal[trace.terminal];
    if (terminal_set.contains(trace.terminal) && bucket.size() < cfg.per_terminal) {
      bucket.push_back(std::move(trace));
      --deficit;
    }
  }

  for (std::size_t s = 0; s < table.states.size(); ++s) {
    auto& bucket = by_terminal[s];
    const std::size_t take = std::min<std::size_t>(cfg.per_terminal, bucket.size());
    for (std::size_t i = 0; i < take; ++i) out.traces.push_back(std::move(bucket[i]));
    out.per_terminal_counts[table.states[s]] = take;
    if (take < cfg.per_terminal) {
      out.shortfall[table.states[s]] = cfg.per_terminal - take;
    }
  }
  return out;
}

std::string render_rules_text(const GroundTruthTable& table) {
  std::ostringstream out;
  out << "Transition rules (v1) for \"" << table.name << "\":\n";
  out << "States: ";
  for (std::size_t s = 0; s < table.states.size(); ++s) {
    out << (s ? ", " : "") << table.states[s];
  }
  out << "\n";
  for (std::size_t s = 0; s < table.states.size(); ++s) {
    for (std::size_t a = 0; a < table.actions.size(); ++a) {
      const std::size_t t = table.next_index(s, a);
      if (t == s) continue;
      out << "- in state \"" << table.states[s] << "\", action \"" << table.actions[a]
          << "\" leads to \"" << table.states[t] << "\"\n";
    }
  }
  out << "Any other combination leaves the state unchanged.\n";
  return out.str();
}

Prediction TableWalkPredictor::predict(const PredictorInput& input) {
  auto state = table_.state_index(input.initial);
  if (!state) throw PredictorError("unknown initial state \"" + input.initial + "\"");
  for (const auto& action : input.actions) {
    auto a = table_.action_index(action);
    if (!a) throw PredictorError("unknown action \"" + action + "\"");
    state = table_.next_index(*state, *a);
  }
  return {table_.states[*state], 0};
}

CfsmPredictor::CfsmPredictor(const GroundTruthTable& table)
    : machine_(to_machine(table)), checker_(oracle_rules(table)) {}

Prediction CfsmPredictor::predict(const PredictorInput& input) {
  auto initial = machine_.find_state(input.initial);
  if (!initial) throw PredictorError("unknown initial state \"" + input.initial + "\"");
  std::vector<SceneAction> actions;
  actions.reserve(input.actions.size());
  for (const auto& a : input.actions) actions.push_back(SceneAction{"", a, std::nullopt});
  const TraceRecord record = run_trace(machine_, *initial, actions, checker_);
  return {record.terminal.name, record.total_checker_calls};
}

Prediction RemotePredictor::predict(const PredictorInput& input) {
  std::ostringstream prompt;
  prompt << input.rules_text << "\nInitial state: " << input.initial << "\nActions, in order:\n";
  for (const auto& a : input.actions) prompt << "- " << a << "\n";
  prompt << "Reply with the final state name only.";
  ChatResponse response;
  try {
    response = client_->complete_user(prompt.str());
  } catch (const Error& e) {
    throw PredictorError(e.what());
  }
  // take the last non-empty line, trimmed
  std::string line;
  std::istringstream in(response.content);
  std::string candidate;
  while (std::getline(in, line)) {
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    candidate = line.substr(begin, end - begin + 1);
  }
  if (candidate.empty()) throw PredictorError("empty predictor reply");
  return {candidate, std::nullopt};
}

EvalResult evaluate_predictor(const BalancedSample& sample, const GroundTruthTable& table,
                              std::size_t length, FinalStatePredictor& predictor) {
  EvalResult result;
  result.fsm = table.name;
  result.length = length;
  result.predictor = predictor.name();

  const std::string rules_text = render_rules_text(table);
  std::map<std::string, std::size_t> correct;
  std::size_t correct_total = 0;
  double forwards_total = 0.0;
  std::size_t forwards_known = 0;

  for (const auto& trace : sample.traces) {
    PredictorInput input;
    input.rules_text = rules_text;
    input.initial = table.states[trace.initial];
    for (std::size_t a : trace.actions) input.actions.push_back(table.actions[a]);
    const std::string truth = table.states[trace.terminal];
    ++result.per_state_count[truth];

    std::string predicted;
    try {
      Prediction p = predictor.predict(input);
      predicted = p.state;
      if (p.forwards) {
        forwards_total += static_cast<double>(*p.forwards);
        ++forwards_known;
      }
    } catch (const PredictorError&) {
      ++result.predictor_errors;  // incorrect-with-flag; the run continues
      continue;
    }
    if (predicted == truth) {
      ++correct[truth];
      ++correct_total;
    }
  }

  for (const auto& [state, count] : result.per_state_count) {
    result.per_state_accuracy[state] =
        count == 0 ? 0.0 : static_cast<double>(correct[state]) / static_cast<double>(count);
  }
  result.overall_accuracy = sample.traces.empty()
                                ? 0.0
                                : static_cast<double>(correct_total) /
                                      static_cast<double>(sample.traces.size());
  result.mean_forwards =
      forwards_known == 0 ? 0.0 : forwards_total / static_cast<double>(forwards_known);
  return result;
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

std::string eval_results_csv(const std::vector<EvalResult>& results) {
  std::ostringstream out;
  out << "fsm,length,predictor,state,count,accuracy,mean_forwards\n";
  for (const auto& r : results) {
    for (const auto& [state, count] : r.per_state_count) {
      out << r.fsm << "," << r.length << "," << r.predictor << "," << state << "," << count << ","
          << format_double(r.per_state_accuracy.at(state)) << "," << format_double(r.mean_forwards)
          << "\n";
    }
    std::size_t total = 0;
    for (const auto& [state, count] : r.per_state_count) total += count;
    out << r.fsm << "," << r.length << "," << r.predictor << ",overall," << total << ","
        << format_double(r.overall_accuracy) << "," << format_double(r.mean_forwards) << "\n";
  }
  return out.str();
}

std::string pool_to_jsonl(const GroundTruthTable& table, const std::vector<SynthTrace>& pool) {
  std::ostringstream out;
  for (const auto& trace : pool) {
    ordered_json line;
    line["initial"] = table.states[trace.initial];
    ordered_json actions = ordered_json::array();
    for (std::size_t a : trace.actions) actions.push_back(table.actions[a]);
    line["actions"] = std::move(actions);
    line["terminal"] = table.states[trace.terminal];
    out << line.dump() << "\n";
  }
  return out.str();
}

}  // namespace cfsm::synth

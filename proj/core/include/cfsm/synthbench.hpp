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

#ifndef CFSM_SYNTHBENCH_HPP_
#define CFSM_SYNTHBENCH_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cfsm/chat_client.hpp"
#include "cfsm/checker.hpp"
#include "cfsm/model.hpp"
#include "cfsm/pfsm.hpp"

namespace cfsm::synth {

// Ground-truth transition table: total over (state, action), self-loop where
// an action has no effect. Absorbing states map every action to themselves.
struct GroundTruthTable {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<std::size_t> next;  // [state * actions.size() + action]
  std::size_t initial = 0;

  std::size_t next_index(std::size_t state, std::size_t action) const {
    return next[state * actions.size() + action];
  }
  bool is_absorbing(std::size_t state) const;
  std::optional<std::size_t> state_index(std::string_view name) const;
  std::optional<std::size_t> action_index(std::string_view name) const;

  // Totality and index closure; throws SchemaError on violation.
  void assert_valid() const;
};

inline constexpr std::string_view kMario = "mario";
inline constexpr std::string_view kCodEnemy = "cod-enemy";
inline constexpr std::string_view kWesteros = "westeros";

// The three transcribed machines. Throws UnknownBenchmark for other names.
GroundTruthTable builtin_table(std::string_view fsm);
std::vector<std::string> builtin_names();

// CFSM machine for a table: reserved states wrapped around the domain states,
// one question guard per state/action pair that moves (self-loop cells need
// no rule).
MachineDefinition to_machine(const GroundTruthTable& table);

// Guard question wording for "did the character do <action>?"; shared between
// machine construction and the scripted oracle.
std::string guard_question(const std::string& action);

// Scripted oracle answering the guard questions: one anchored rule per
// action, true when both the action text and the question name it. The false
// side is the checker's no-match default.
std::vector<ScriptedRule> oracle_rules(const GroundTruthTable& table,
                                       double true_logprob = kDefaultTrueLogprob);

// Full-grid question bank over the wrapped machine: cell (target, source)
// asks whether the action moves the character from source to target.
std::string cell_question(const std::string& source, const std::string& target);
QuestionBank to_question_bank(const MachineDefinition& machine);

// Scripted oracle for the grid questions: for each (state, action) pair one
// rule answering true on the table's target cell.
std::vector<ScriptedRule> bank_oracle_rules(const GroundTruthTable& table,
                                            const MachineDefinition& machine,
                                            double true_logprob = kDefaultTrueLogprob,
                                            double false_logprob = kDefaultFalseLogprob);

struct BenchmarkConfig {
  std::string fsm{kMario};
  std::size_t pool_size = 10000;
  std::size_t per_terminal = 100;
  int length_min = 1;
  int length_max = 10;
  std::uint64_t seed = 0;
  // Balanced sampling tops up under-represented terminals with extra targeted
  // generation, bounded by top_up_factor * pool_size attempts per length.
  std::size_t top_up_factor = 20;
};

// A generated path: initial state, uniformly random actions, and the
// table-walk terminal. Indices refer to the table.
struct SynthTrace {
  std::size_t initial = 0;
  std::vector<std::size_t> actions;
  std::size_t terminal = 0;
};

std::size_t walk(const GroundTruthTable& table, std::size_t initial,
                 const std::vector<std::size_t>& actions);

// pool_size random-policy traces of the given length from the table's initial
// state. Fully determined by (cfg.seed, cfg.fsm, length); per-trace streams
// are split counter-style, so generation order cannot leak between traces.
std::vector<SynthTrace> generate_pool(const GroundTruthTable& table, const BenchmarkConfig& cfg,
                                      std::size_t length);

// States reachable after exactly `t` actions from `initial`, t = 0..max_len.
std::vector<std::set<std::size_t>> reachable_sets(const GroundTruthTable& table,
                                                  std::size_t initial, std::size_t max_len);

struct BalancedSample {
  std::vector<SynthTrace> traces;
  std::map<std::string, std::size_t> per_terminal_counts;
  // Requested-but-unavailable counts per state; never silently padded.
  std::map<std::string, std::size_t> shortfall;
};

// Samples up to cfg.per_terminal traces per reachable terminal state, without
// replacement, topping up rare terminals by bounded targeted generation.
// Unreachable terminals (by exact-length reachability) report their full
// shortfall without any generation attempts.
BalancedSample balanced_sample(const GroundTruthTable& table, std::vector<SynthTrace> pool,
                               const BenchmarkConfig& cfg, std::size_t length);

struct PredictorInput {
  std::string rules_text;
  std::string initial;
  std::vector<std::string> actions;
};

struct Prediction {
  std::string state;
  std::optional<std::size_t> forwards;
};

// Final-state predictor over rendered transition rules. Implementations that
// throw PredictorError are scored as incorrect for that trace, flagged, and
// the run continues.
class FinalStatePredictor {
 public:
  virtual ~FinalStatePredictor() = default;
  virtual Prediction predict(const PredictorInput& input) = 0;
  virtual std::string name() const = 0;
};

// Fixed, versioned text rendering of a table's transition rules, so runs with
// LLM predictors stay comparable across backends.
std::string render_rules_text(const GroundTruthTable& table);

// Ground truth itself; 1.0 accuracy by construction.
class TableWalkPredictor : public FinalStatePredictor {
 public:
  explicit TableWalkPredictor(const GroundTruthTable& table) : table_(table) {}
  Prediction predict(const PredictorInput& input) override;
  std::string name() const override { return "table"; }

 private:
  const GroundTruthTable& table_;
};

// The CFSM engine over the transcribed machine with the scripted oracle;
// forwards are the engine's checker calls.
class CfsmPredictor : public FinalStatePredictor {
 public:
  explicit CfsmPredictor(const GroundTruthTable& table);
  Prediction predict(const PredictorInput& input) override;
  std::string name() const override { return "cfsm"; }

  const MachineDefinition& machine() const { return machine_; }

 private:
  MachineDefinition machine_;
  ScriptedChecker checker_;
};

class ConstantPredictor : public FinalStatePredictor {
 public:
  explicit ConstantPredictor(std::string state) : state_(std::move(state)) {}
  Prediction predict(const PredictorInput&) override { return {state_, 0}; }
  std::string name() const override { return "constant:" + state_; }

 private:
  std::string state_;
};

// Prompts a chat backend with the rendered rules, initial state and action
// list; the reply's last line must name a state.
class RemotePredictor : public FinalStatePredictor {
 public:
  explicit RemotePredictor(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}
  Prediction predict(const PredictorInput& input) override;
  std::string name() const override { return "remote"; }

 private:
  std::shared_ptr<ChatClient> client_;
};

struct EvalResult {
  std::string fsm;
  std::size_t length = 0;
  std::string predictor;
  std::map<std::string, std::size_t> per_state_count;   // by true terminal
  std::map<std::string, double> per_state_accuracy;     // by true terminal
  double overall_accuracy = 0.0;
  double mean_forwards = 0.0;
  std::size_t predictor_errors = 0;
};

EvalResult evaluate_predictor(const BalancedSample& sample, const GroundTruthTable& table,
                              std::size_t length, FinalStatePredictor& predictor);

// CSV with columns fsm,length,predictor,state,count,accuracy,mean_forwards;
// one row per terminal state plus an "overall" row per result.
std::string eval_results_csv(const std::vector<EvalResult>& results);

// Pool I/O: one JSON object per line {"initial", "actions", "terminal"}.
std::string pool_to_jsonl(const GroundTruthTable& table, const std::vector<SynthTrace>& pool);

}  // namespace cfsm::synth

#endif  // CFSM_SYNTHBENCH_HPP_

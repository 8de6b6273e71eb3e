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

#ifndef CFSM_PFSM_HPP_
#define CFSM_PFSM_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "cfsm/checker.hpp"
#include "cfsm/engine.hpp"
#include "cfsm/model.hpp"
#include "cfsm/rng.hpp"

namespace cfsm {

// Probability vector on the (n-1)-simplex: entries non-negative, summing to 1
// within 1e-9. Value type, freely copyable between threads.
class StateDistribution {
 public:
  explicit StateDistribution(std::vector<double> probs);

  static StateDistribution one_hot(std::size_t n, std::size_t index);
  static StateDistribution uniform(std::size_t n);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

inline constexpr double kSimplexTolerance = 1e-9;

// Per-step logit matrix: entry (next, current) scores the move from state
// `current` to state `next` given the observed action. Row-major.
struct TransitionMatrix {
  std::size_t n = 0;
  std::vector<double> logits;  // n*n, [next * n + current]

  static TransitionMatrix zero(std::size_t n) {
    return TransitionMatrix{n, std::vector<double>(n * n, 0.0)};
  }
  double& at(std::size_t next, std::size_t current) { return logits[next * n + current]; }
  double at(std::size_t next, std::size_t current) const { return logits[next * n + current]; }
};

struct SpecialQuestion {
  std::size_t source = 0;
  std::size_t target = 0;
  std::string question;
};

enum class BankMode { kGrid, kSparse };

std::string_view to_string(BankMode mode);

// The transition questions for one machine. Grid mode carries one question
// per (next, current) cell; sparse mode carries one default question per
// target state plus k special-case (source, target) overrides.
struct QuestionBank {
  BankMode mode = BankMode::kSparse;
  std::size_t n = 0;
  std::vector<std::string> grid;      // n*n, [target * n + source]; grid mode
  std::vector<std::string> defaults;  // n, indexed by target; sparse mode
  std::vector<SpecialQuestion> specials;

  std::size_t question_count() const {
    return mode == BankMode::kGrid ? n * n : n + specials.size();
  }
};

// Structural checks: grid size, defaults size, special indices in range and
// (source, target) pairs unique.
std::vector<std::string> validate_bank(const QuestionBank& bank);

// Bank file schema ({"mode", "defaults"?, "grid"?, "specials"?}); states are
// referenced by name against `machine`.
QuestionBank parse_question_bank(const std::string& text, const MachineDefinition& machine);
std::string serialize_question_bank(const QuestionBank& bank, const MachineDefinition& machine);

struct MatrixBuild {
  TransitionMatrix matrix;
  std::size_t checker_calls = 0;
};

// Fills the logit matrix from checker verdicts. Grid mode asks every cell's
// question (n^2 calls). Sparse mode asks the n default questions once,
// broadcasts each answer across its target row, then overwrites the k special
// cells (n+k calls). An "unknown" verdict contributes logit log(0.5) so
// uninformative evidence pulls toward uniform rather than toward false.
MatrixBuild build_matrix(const QuestionBank& bank, const SceneAction& action,
                         ConditionChecker& checker);

// Column-stochastic softmax of W: softmax applied independently to each
// column (per current state), computed with max-subtraction. Returned in the
// same row-major (next, current) layout.
std::vector<double> column_softmax(const TransitionMatrix& matrix);

// One probabilistic step: P' = softmax(W) . P. Column-wise softmax is the
// axis for which the product provably stays on the simplex. Throws
// DimensionMismatch when sizes disagree.
StateDistribution update_distribution(const StateDistribution& dist,
                                      const TransitionMatrix& matrix);

// Most probable state; ties break toward the lowest index, so a dead tie
// grounds conservatively in "Unactivated".
std::size_t ground_index(const StateDistribution& dist);
StateId ground_state(const StateDistribution& dist, const MachineDefinition& machine);

// Draws state k with probability p_k; reproducible for a given rng state.
std::size_t sample_index(const StateDistribution& dist, Rng& rng);

enum class Grounding { kArgmax, kSample };

struct PTraceStep {
  StateDistribution dist;
  StateId grounded;
  std::size_t checker_calls = 0;  // 0 for the initial entry
};

// Folds build_matrix + update_distribution over the actions. The output
// starts with the initial distribution and its grounding, then appends one
// entry per action. Construction failures surface as PTraceError with the
// partial trajectory attached.
std::vector<PTraceStep> run_ptrace(const MachineDefinition& machine, const QuestionBank& bank,
                                   const StateDistribution& initial,
                                   const std::vector<SceneAction>& actions,
                                   ConditionChecker& checker, Grounding grounding, Rng& rng);

class PTraceError : public Error {
 public:
  PTraceError(const std::string& what, std::vector<PTraceStep> partial)
      : Error(what), partial_(std::move(partial)) {}
  const std::vector<PTraceStep>& partial() const { return partial_; }

 private:
  std::vector<PTraceStep> partial_;
};

// Grid bank derived from a machine's own guards: cell (target, source) uses
// the question of the rule source -> target when one exists, else a
// target-conditioned default. Lets CPFSM strategies run on any codified
// machine without a separately authored bank.
QuestionBank derive_grid_bank(const MachineDefinition& machine);

// Trajectory records in the engine's trace schema with "dist" appended.
std::string ptrace_to_jsonl(const std::vector<SceneAction>& actions,
                            const std::vector<PTraceStep>& trajectory);

}  // namespace cfsm

#endif  // CFSM_PFSM_HPP_

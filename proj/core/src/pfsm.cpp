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

#include "cfsm/pfsm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cfsm {
namespace {

using ordered_json = nlohmann::ordered_json;

double verdict_logit(const Verdict& v) {
  return v.label == Label::kUnknown ? kLogHalf : v.true_logprob;
}

std::size_t resolve_state(const MachineDefinition& machine, const std::string& name,
                          std::string_view where) {
  auto id = machine.find_state(name);
  if (!id) {
    throw SchemaError("question bank references undeclared state \"" + name + "\" in " +
                      std::string(where));
  }
  return id->index;
}

}  // namespace

StateDistribution::StateDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw DimensionMismatch("state distribution must be non-empty");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw DimensionMismatch("state distribution entries must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw DimensionMismatch("state distribution must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

StateDistribution StateDistribution::one_hot(std::size_t n, std::size_t index) {
  std::vector<double> p(n, 0.0);
  p.at(index) = 1.0;
  return StateDistribution(std::move(p));
}

StateDistribution StateDistribution::uniform(std::size_t n) {
  return StateDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

std::string_view to_string(BankMode mode) {
  return mode == BankMode::kGrid ? "grid" : "sparse";
}

std::vector<std::string> validate_bank(const QuestionBank& bank) {
  std::vector<std::string> problems;
  if (bank.n == 0) problems.push_back("bank dimension must be positive");
  if (bank.mode == BankMode::kGrid) {
    if (bank.grid.size() != bank.n * bank.n) {
      problems.push_back("grid mode requires exactly n*n questions");
    }
  } else {
    if (bank.defaults.size() != bank.n) {
      problems.push_back("sparse mode requires exactly n default questions");
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& s : bank.specials) {
    if (s.source >= bank.n || s.target >= bank.n) {
      problems.push_back("special question indices out of range");
      continue;
    }
    if (s.question.empty()) problems.push_back("special questions must be non-empty");
    if (!cells.insert({s.source, s.target}).second) {
      problems.push_back("duplicate special cell (source " + std::to_string(s.source) +
                         ", target " + std::to_string(s.target) + ")");
    }
  }
  return problems;
}

QuestionBank parse_question_bank(const std::string& text, const MachineDefinition& machine) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SyntaxError(std::string("question bank is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw SyntaxError("question bank must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "mode" && key != "defaults" && key != "grid" && key != "specials") {
      throw SchemaError("unknown field \"" + key + "\" in question bank");
    }
  }

  QuestionBank bank;
  bank.n = machine.state_count();
  const std::string mode = doc.value("mode", "");
  if (mode == "grid") {
    bank.mode = BankMode::kGrid;
  } else if (mode == "sparse") {
    bank.mode = BankMode::kSparse;
  } else {
    throw SchemaError("question bank mode must be \"grid\" or \"sparse\"");
  }

  if (bank.mode == BankMode::kGrid) {
    if (!doc.contains("grid") || !doc["grid"].is_array()) {
      throw SchemaError("grid mode requires a \"grid\" array");
    }
    bank.grid.assign(bank.n * bank.n, "");
    const auto& rows = doc["grid"];
    if (rows.size() != bank.n) throw SchemaError("grid must have n rows (target-major)");
    for (std::size_t t = 0; t < bank.n; ++t) {
      if (!rows[t].is_array() || rows[t].size() != bank.n) {
        throw SchemaError("grid row " + std::to_string(t) + " must have n entries");
      }
      for (std::size_t s = 0; s < bank.n; ++s) {
        if (!rows[t][s].is_string()) throw SchemaError("grid cells must be strings");
        bank.grid[t * bank.n + s] = rows[t][s].get<std::string>();
      }
    }
  } else {
    if (!doc.contains("defaults") || !doc["defaults"].is_array()) {
      throw SchemaError("sparse mode requires a \"defaults\" array");
    }
    for (const auto& q : doc["defaults"]) {
      if (!q.is_string()) throw SchemaError("default questions must be strings");
      bank.defaults.push_back(q.get<std::string>());
    }
  }

  if (doc.contains("specials")) {
    if (!doc["specials"].is_array()) throw SchemaError("\"specials\" must be an array");
    for (const auto& s : doc["specials"]) {
      if (!s.is_object()) throw SchemaError("each special must be an object");
      SpecialQuestion special;
      special.source = resolve_state(machine, s.value("source", ""), "special source");
      special.target = resolve_state(machine, s.value("target", ""), "special target");
      if (!s.contains("question") || !s["question"].is_string()) {
        throw SchemaError("special cells must carry a \"question\" string");
      }
      special.question = s["question"].get<std::string>();
      bank.specials.push_back(std::move(special));
    }
  }

  auto problems = validate_bank(bank);
  if (!problems.empty()) throw SchemaError(problems.front());
  return bank;
}

std::string serialize_question_bank(const QuestionBank& bank, const MachineDefinition& machine) {
  ordered_json doc;
  doc["mode"] = std::string(to_string(bank.mode));
  if (bank.mode == BankMode::kGrid) {
    ordered_json rows = ordered_json::array();
    for (std::size_t t = 0; t < bank.n; ++t) {
      ordered_json row = ordered_json::array();
      for (std::size_t s = 0; s < bank.n; ++s) row.push_back(bank.grid[t * bank.n + s]);
      rows.push_back(std::move(row));
    }
    doc["grid"] = std::move(rows);
  } else {
    doc["defaults"] = bank.defaults;
  }
  if (!bank.specials.empty()) {
    ordered_json specials = ordered_json::array();
    for (const auto& s : bank.specials) {
      ordered_json cell;
      cell["source"] = machine.states.at(s.source);
      cell["target"] = machine.states.at(s.target);
      cell["question"] = s.question;
      specials.push_back(std::move(cell));
    }
    doc["specials"] = std::move(specials);
  }
  return doc.dump(2) + "\n";
}

MatrixBuild build_matrix(const QuestionBank& bank, const SceneAction& action,
                         ConditionChecker& checker) {
  auto problems = validate_bank(bank);
  if (!problems.empty()) throw SchemaError(problems.front());

  MatrixBuild out{TransitionMatrix::zero(bank.n), 0};
  auto ask = [&](const std::string& question) {
    ++out.checker_calls;
    return verdict_logit(checker.check(Query{action.scene_text, action.action_text, question}));
  };

  if (bank.mode == BankMode::kGrid) {
    for (std::size_t t = 0; t < bank.n; ++t) {
      for (std::size_t s = 0; s < bank.n; ++s) {
        out.matrix.at(t, s) = ask(bank.grid[t * bank.n + s]);
      }
    }
    return out;
  }

  // Sparse: one answer per target state, broadcast across its row, then the
  // special cells overwrite their own answers.
  for (std::size_t t = 0; t < bank.n; ++t) {
    const double logit = ask(bank.defaults[t]);
    for (std::size_t s = 0; s < bank.n; ++s) out.matrix.at(t, s) = logit;
  }
  for (const auto& special : bank.specials) {
    out.matrix.at(special.target, special.source) = ask(special.question);
  }
  return out;
}

std::vector<double> column_softmax(const TransitionMatrix& matrix) {
  const std::size_t n = matrix.n;
  std::vector<double> stochastic(n * n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double max_logit = matrix.at(0, s);
    for (std::size_t t = 1; t < n; ++t) max_logit = std::max(max_logit, matrix.at(t, s));
    double denom = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double e = std::exp(matrix.at(t, s) - max_logit);
      stochastic[t * n + s] = e;
      denom += e;
    }
    for (std::size_t t = 0; t < n; ++t) stochastic[t * n + s] /= denom;
  }
  return stochastic;
}

StateDistribution update_distribution(const StateDistribution& dist,
                                      const TransitionMatrix& matrix) {
  if (matrix.n != dist.size()) {
    throw DimensionMismatch("matrix dimension " + std::to_string(matrix.n) +
                            " does not match distribution size " + std::to_string(dist.size()));
  }
  for (double logit : matrix.logits) {
    if (!std::isfinite(logit)) throw DimensionMismatch("transition logits must be finite");
  }
  const std::size_t n = matrix.n;
  const std::vector<double> stochastic = column_softmax(matrix);
  std::vector<double> next(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) acc += stochastic[t * n + s] * dist[s];
    next[t] = acc;
  }
  return StateDistribution(std::move(next));
}

std::size_t ground_index(const StateDistribution& dist) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) best = i;
  }
  return best;
}

StateId ground_state(const StateDistribution& dist, const MachineDefinition& machine) {
  if (dist.size() != machine.state_count()) {
    throw DimensionMismatch("distribution size does not match machine state count");
  }
  return machine.state(ground_index(dist));
}

std::size_t sample_index(const StateDistribution& dist, Rng& rng) {
  const double draw = rng.next_double();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    cumulative += dist[i];
    if (draw < cumulative) return i;
  }
  return dist.size() - 1;  // guard against trailing rounding slack
}

std::vector<PTraceStep> run_ptrace(const MachineDefinition& machine, const QuestionBank& bank,
                                   const StateDistribution& initial,
                                   const std::vector<SceneAction>& actions,
                                   ConditionChecker& checker, Grounding grounding, Rng& rng) {
  if (initial.size() != machine.state_count()) {
    throw DimensionMismatch("initial distribution size does not match machine state count");
  }
  auto ground = [&](const StateDistribution& dist) {
    const std::size_t index =
        grounding == Grounding::kArgmax ? ground_index(dist) : sample_index(dist, rng);
    return machine.state(index);
  };

  std::vector<PTraceStep> trajectory;
  trajectory.push_back(PTraceStep{initial, ground(initial), 0});
  StateDistribution current = initial;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    std::size_t calls = 0;
    try {
      MatrixBuild build = build_matrix(bank, actions[i], checker);
      calls = build.checker_calls;
      current = update_distribution(current, build.matrix);
    } catch (const CheckerError& e) {
      throw PTraceError("probabilistic trace aborted at step " + std::to_string(i + 1) + ": " +
                            e.what(),
                        std::move(trajectory));
    }
    trajectory.push_back(PTraceStep{current, ground(current), calls});
  }
  return trajectory;
}

QuestionBank derive_grid_bank(const MachineDefinition& machine) {
  const std::size_t n = machine.state_count();
  QuestionBank bank;
  bank.mode = BankMode::kGrid;
  bank.n = n;
  bank.grid.assign(n * n, "");
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      bank.grid[t * n + s] = t == s
          ? "Does the character remain in state \"" + machine.states[s] + "\" after this action?"
          : "Is the character now best described as \"" + machine.states[t] + "\"?";
    }
  }
  // When several rules share a (source, target) cell, the one that fires
  // first in evaluation order supplies the question.
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<bool> cell_set(n, false);
    for (const TransitionRule* rule : machine.rules_for(s)) {
      if (rule->guard.question.empty()) continue;
      const std::size_t t = rule->guard.target;
      if (!cell_set[t]) {
        bank.grid[t * n + s] = rule->guard.question;
        cell_set[t] = true;
      }
    }
  }
  return bank;
}

std::string ptrace_to_jsonl(const std::vector<SceneAction>& actions,
                            const std::vector<PTraceStep>& trajectory) {
  std::ostringstream out;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    ordered_json line;
    line["t"] = i;
    line["action"] = i - 1 < actions.size() ? actions[i - 1].action_text : "";
    line["scene"] = i - 1 < actions.size() ? actions[i - 1].scene_text : "";
    line["prior"] = trajectory[i - 1].grounded.name;
    line["next"] = trajectory[i].grounded.name;
    line["rule"] = nullptr;
    line["calls"] = trajectory[i].checker_calls;
    line["dist"] = trajectory[i].dist.probs();
    out << line.dump() << "\n";
  }
  return out.str();
}

}  // namespace cfsm

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
//
// Shared test fixtures: recording/failing checkers, random machine and rule
// generators, and the independent oracles the spec-level checks compare
// against. Oracles here deliberately re-implement the semantics in the
// plainest possible way and never call the engine's own evaluation helpers.

#ifndef CFSM_TESTS_SUPPORT_HPP_
#define CFSM_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cfsm/checker.hpp"
#include "cfsm/engine.hpp"
#include "cfsm/model.hpp"
#include "cfsm/pfsm.hpp"
#include "cfsm/rng.hpp"
#include "cfsm/synthbench.hpp"

namespace cfsm::test {

// Forwards to an inner checker while logging every query.
class RecordingChecker : public ConditionChecker {
 public:
  explicit RecordingChecker(ConditionChecker& inner) : inner_(inner) {}
  Verdict check(const Query& q) override {
    log.push_back(q);
    return inner_.check(q);
  }
  std::string backend_id() const override { return inner_.backend_id(); }

  std::vector<Query> log;

 private:
  ConditionChecker& inner_;
};

// Answers `fail_after` queries, then throws RemoteError.
class FailingChecker : public ConditionChecker {
 public:
  FailingChecker(ConditionChecker& inner, std::size_t fail_after)
      : inner_(inner), fail_after_(fail_after) {}
  Verdict check(const Query& q) override {
    if (calls_ >= fail_after_) throw RemoteError("backend unavailable");
    ++calls_;
    return inner_.check(q);
  }
  std::string backend_id() const override { return inner_.backend_id(); }

 private:
  ConditionChecker& inner_;
  std::size_t fail_after_;
  std::size_t calls_ = 0;
};

// ---- random machine / rule-table generation ------------------------------

inline const std::vector<std::string>& name_pool() {
  static const std::vector<std::string> pool = {"alpha", "beta", "gamma", "delta"};
  return pool;
}

inline std::string question_token(std::size_t i) { return "q" + std::to_string(i); }
inline std::string action_token(std::size_t i) { return "t" + std::to_string(i); }

// Random machine with up to 6 states (reserved pair included) and up to 8
// rules; guard questions reference question tokens q0..q9.
inline MachineDefinition random_machine(Rng& rng) {
  MachineDefinition m;
  m.machine_id = "m" + std::to_string(rng.next_below(100000));
  m.dimension = rng.next_below(2) ? "personality" : "ability";
  m.perspective = static_cast<Perspective>(rng.next_below(3));
  m.states.push_back(std::string(kUnactivated));
  const std::size_t domain = rng.next_below(4) + 1;  // 1..4 domain states
  for (std::size_t i = 0; i < domain; ++i) m.states.push_back(name_pool()[i]);
  m.states.push_back(std::string(kOther));

  const std::size_t rule_count = rng.next_below(9);  // 0..8
  std::map<std::pair<bool, std::size_t>, int> next_priority;
  for (std::size_t i = 0; i < rule_count; ++i) {
    TransitionRule rule;
    const bool wildcard = rng.next_below(10) == 0;
    if (!wildcard) rule.source = rng.next_below(m.states.size());
    auto key = std::make_pair(wildcard, rule.source.value_or(0));
    rule.priority = next_priority[key];
    next_priority[key] = rule.priority + 1 + static_cast<int>(rng.next_below(3));  // gaps allowed
    const std::uint64_t kind = rng.next_below(10);
    if (kind < 7) {
      rule.guard.kind = GuardKind::kQuestion;
      rule.guard.question = "does the event mention " + question_token(rng.next_below(10)) + "?";
    } else if (kind < 8) {
      rule.guard.kind = GuardKind::kDefaultTarget;
      rule.guard.question = "is the character now " + m.states[rng.next_below(m.states.size())] + "?";
    } else if (kind < 9) {
      rule.guard.kind = GuardKind::kNever;
    } else {
      rule.guard.kind = GuardKind::kAlways;
    }
    rule.guard.target = rng.next_below(m.states.size());
    m.rules.push_back(std::move(rule));
  }
  return m;
}

// Random coherent scripted table over the q/t token vocabulary.
inline std::vector<ScriptedRule> random_rule_table(Rng& rng) {
  std::vector<ScriptedRule> rules;
  const std::size_t count = rng.next_below(12);
  for (std::size_t i = 0; i < count; ++i) {
    ScriptedRule rule;
    if (rng.next_below(4) != 0) rule.action_pattern = action_token(rng.next_below(10));
    if (rule.action_pattern.empty() || rng.next_below(2) == 0) {
      rule.question_pattern = question_token(rng.next_below(10));
    }
    rule.anchor = true;
    switch (rng.next_below(3)) {
      case 0:
        rule.label = Label::kTrue;
        rule.logprob = std::log(0.5 + 0.5 * rng.next_double());
        break;
      case 1:
        rule.label = Label::kFalse;
        rule.logprob = std::log(0.5 * rng.next_double() + 1e-9);
        break;
      default:
        rule.label = Label::kUnknown;
        rule.logprob = std::log(0.5);
        break;
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

inline SceneAction random_action(Rng& rng) {
  // action text names 1..3 action tokens and 0..2 question tokens
  std::string text = "event";
  const std::size_t actions = 1 + rng.next_below(3);
  for (std::size_t i = 0; i < actions; ++i) text += " " + action_token(rng.next_below(10));
  const std::size_t qs = rng.next_below(3);
  for (std::size_t i = 0; i < qs; ++i) text += " " + question_token(rng.next_below(10));
  return SceneAction{"", text, std::nullopt};
}

// ---- independent oracles ---------------------------------------------------

// Straight-line guard simulator: re-implements the documented evaluation
// order with plain loops and the checker as the only shared component.
inline std::size_t oracle_next_state(const MachineDefinition& m, std::size_t state,
                                     const SceneAction& action, ConditionChecker& checker) {
  auto ask = [&](const TransitionRule& r) {
    if (r.guard.kind == GuardKind::kAlways) return true;
    if (r.guard.kind == GuardKind::kNever) return false;
    const Verdict v = checker.check(Query{action.scene_text, action.action_text, r.guard.question});
    return v.label == Label::kTrue;
  };

  std::vector<const TransitionRule*> own, wild, fallback;
  for (const auto& r : m.rules) {
    if (r.source.has_value() && *r.source != state) continue;
    if (r.guard.kind == GuardKind::kDefaultTarget) {
      fallback.push_back(&r);
    } else if (r.source.has_value()) {
      own.push_back(&r);
    } else {
      wild.push_back(&r);
    }
  }
  std::sort(own.begin(), own.end(),
            [](auto* a, auto* b) { return a->priority < b->priority; });
  std::sort(wild.begin(), wild.end(),
            [](auto* a, auto* b) { return a->priority < b->priority; });
  std::sort(fallback.begin(), fallback.end(), [](auto* a, auto* b) {
    if (a->guard.target != b->guard.target) return a->guard.target < b->guard.target;
    if (a->source.has_value() != b->source.has_value()) return a->source.has_value();
    return a->priority < b->priority;
  });
  for (auto* r : own) {
    if (ask(*r)) return r->guard.target;
  }
  for (auto* r : wild) {
    if (ask(*r)) return r->guard.target;
  }
  for (auto* r : fallback) {
    if (ask(*r)) return r->guard.target;
  }
  return state;
}

inline std::size_t oracle_terminal(const MachineDefinition& m, std::size_t initial,
                                   const std::vector<SceneAction>& actions,
                                   ConditionChecker& checker) {
  std::size_t state = initial;
  for (const auto& a : actions) state = oracle_next_state(m, state, a, checker);
  return state;
}

// Breadth-first exact-length reachability, written against the raw table.
inline std::set<std::size_t> oracle_reachable_at(const synth::GroundTruthTable& table,
                                                 std::size_t length) {
  std::set<std::size_t> frontier = {table.initial};
  for (std::size_t step = 0; step < length; ++step) {
    std::set<std::size_t> next;
    for (std::size_t s : frontier) {
      for (std::size_t a = 0; a < table.actions.size(); ++a) {
        next.insert(table.next[s * table.actions.size() + a]);
      }
    }
    frontier.swap(next);
  }
  return frontier;
}

// Long-hand column softmax + matrix-vector product in extended precision.
inline std::vector<double> oracle_softmax_product(const TransitionMatrix& w,
                                                  const std::vector<double>& p) {
  const std::size_t n = w.n;
  std::vector<long double> out(n, 0.0L);
  for (std::size_t col = 0; col < n; ++col) {
    long double max_logit = w.at(0, col);
    for (std::size_t row = 1; row < n; ++row) {
      max_logit = std::max<long double>(max_logit, w.at(row, col));
    }
    long double denom = 0.0L;
    std::vector<long double> numer(n);
    for (std::size_t row = 0; row < n; ++row) {
      numer[row] = std::exp(static_cast<long double>(w.at(row, col)) - max_logit);
      denom += numer[row];
    }
    for (std::size_t row = 0; row < n; ++row) {
      out[row] += numer[row] / denom * static_cast<long double>(p[col]);
    }
  }
  return std::vector<double>(out.begin(), out.end());
}

}  // namespace cfsm::test

#endif  // CFSM_TESTS_SUPPORT_HPP_

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

#include <benchmark/benchmark.h>

#include "cfsm/pfsm.hpp"
#include "cfsm/rng.hpp"
#include "cfsm/synthbench.hpp"

namespace {

using namespace cfsm;

void BM_UpdateDistribution(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  TransitionMatrix w = TransitionMatrix::zero(n);
  for (double& logit : w.logits) logit = rng.next_double() * 8.0 - 4.0;
  StateDistribution p = StateDistribution::uniform(n);
  for (auto _ : state) {
    p = update_distribution(p, w);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_UpdateDistribution)->Arg(4)->Arg(11)->Arg(32);

void BM_BuildMatrixSparse(benchmark::State& state) {
  QuestionBank bank;
  bank.mode = BankMode::kSparse;
  bank.n = 8;
  for (std::size_t t = 0; t < bank.n; ++t) {
    bank.defaults.push_back("is target " + std::to_string(t) + " next?");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    bank.specials.push_back({i, i + 1, "special case " + std::to_string(i) + "?"});
  }
  ScriptedChecker checker(std::vector<ScriptedRule>{{"", "next", false, Label::kFalse,
                                                     kDefaultFalseLogprob}});
  const SceneAction action{"", "some event text", std::nullopt};
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_matrix(bank, action, checker));
  }
}
BENCHMARK(BM_BuildMatrixSparse);

void BM_BuildMatrixGrid(benchmark::State& state) {
  const auto table = synth::builtin_table(synth::kWesteros);
  const MachineDefinition machine = synth::to_machine(table);
  const QuestionBank bank = synth::to_question_bank(machine);
  ScriptedChecker checker(
      synth::bank_oracle_rules(table, machine, std::log(0.99), std::log(0.01)));
  const SceneAction action{"", "travel north", std::nullopt};
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_matrix(bank, action, checker));
  }
}
BENCHMARK(BM_BuildMatrixGrid);

}  // namespace

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

#include "cfsm/engine.hpp"
#include "cfsm/rng.hpp"
#include "cfsm/synthbench.hpp"

namespace {

using namespace cfsm;

void BM_GetNextState(benchmark::State& state) {
  const auto table = synth::builtin_table(synth::kWesteros);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));
  const StateId dorne = *machine.find_state("dorne");
  const SceneAction action{"", "travel north", std::nullopt};

  for (auto _ : state) {
    benchmark::DoNotOptimize(get_next_state(machine, dorne, action, oracle));
  }
}
BENCHMARK(BM_GetNextState);

void BM_RunTraceLength10(benchmark::State& state) {
  const auto table = synth::builtin_table(synth::kMario);
  const MachineDefinition machine = synth::to_machine(table);
  ScriptedChecker oracle(synth::oracle_rules(table));

  Rng rng(1);
  std::vector<SceneAction> actions;
  for (int i = 0; i < 10; ++i) {
    actions.push_back({"", table.actions[rng.next_below(table.actions.size())], std::nullopt});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_trace(machine, machine.state(1), actions, oracle));
  }
}
BENCHMARK(BM_RunTraceLength10);

}  // namespace

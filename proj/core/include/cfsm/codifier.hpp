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

#ifndef CFSM_CODIFIER_HPP_
#define CFSM_CODIFIER_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cfsm/chat_client.hpp"
#include "cfsm/model.hpp"
#include "cfsm/pfsm.hpp"
#include "cfsm/prompt.hpp"

namespace cfsm {

struct CharacterProfile {
  std::string character_id;
  std::vector<std::string> paragraphs;
};

CharacterProfile parse_profile(const std::string& text);
std::string serialize_profile(const CharacterProfile& profile);

// Accounting for one codification run. question_count is the literal number
// of distinct questions in the produced artifact; for sparse banks that is
// n + k, for grid banks n^2. llm_calls equals drafts requested.
struct CodificationReport {
  std::optional<MachineDefinition> machine;
  std::optional<QuestionBank> bank;
  std::size_t question_count = 0;
  std::size_t llm_calls = 0;
  std::size_t rejected_drafts = 0;
  BankMode mode = BankMode::kGrid;
};

struct CodifierOptions {
  std::size_t draft_budget = 3;  // total drafts per operation, including repairs
};

// State enumeration: asks the client for a JSON array of state names, keeps
// them deduplicated in arrival order, and forces the reserved pair around
// them regardless of what the model returned. Malformed or empty drafts are
// re-requested until the budget runs out (ExtractionError).
std::vector<std::string> extract_states(const CharacterProfile& profile, ChatClient& client,
                                        const PromptTemplate& extract_template,
                                        const CodifierOptions& options = {});

// Transition codification against the closed schema: the model must emit a
// definition document, parse_machine is the arbiter, and every rejection is
// quoted back in a repair round (all prior diagnostics included) until the
// draft budget runs out (CodificationError).
CodificationReport codify_machine(const CharacterProfile& profile,
                                  const std::vector<std::string>& states, ChatClient& client,
                                  const PromptTemplate& codify_template,
                                  const CodifierOptions& options = {});

// Sparse bank codification: n templated default questions (one per state,
// reserved pair included) plus the model's k special-case rules, duplicate
// (source, target) cells collapsed keeping the first.
CodificationReport codify_sparse(const CharacterProfile& profile,
                                 const std::vector<std::string>& states, ChatClient& client,
                                 const PromptTemplate& codify_template,
                                 const CodifierOptions& options = {});

// The templated default question for sparse mode. `gloss` is the state's
// profile-derived description; empty means the bare state name is used.
std::string default_question_for(const std::string& state, const std::string& gloss);

// Routing questions for a character model, rendered from the relevance and
// activity templates.
std::string render_routing_question(const PromptTemplate& routing_template,
                                    const std::string& character_id);

}  // namespace cfsm

#endif  // CFSM_CODIFIER_HPP_

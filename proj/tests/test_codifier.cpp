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

#include "cfsm/codifier.hpp"

using namespace cfsm;

namespace {

CharacterProfile demo_profile() {
  return {"haruhi", {"Haruhi leads the SOS Brigade.", "She turns confrontational when defied."}};
}

PromptTemplate extract_tpl() {
  return PromptTemplate::from_text(TemplateName::kExtract,
                                   "Character {{character}}\nProfile: {{profile}}\nList states.");
}

PromptTemplate codify_grid_tpl() {
  return PromptTemplate::from_text(
      TemplateName::kCodifyGrid,
      "Character {{character}}\nProfile: {{profile}}\nStates: {{states}}\nEmit the machine.");
}

PromptTemplate codify_sparse_tpl() {
  return PromptTemplate::from_text(
      TemplateName::kCodifySparse,
      "Character {{character}}\nProfile: {{profile}}\nStates: {{states}}\nEmit glosses/specials.");
}

std::string valid_machine_doc() {
  return R"({
    "machine_id": "haruhi-mood",
    "dimension": "personality",
    "perspective": "active",
    "states": ["Unactivated", "directing", "confrontational", "Other"],
    "initial": "Unactivated",
    "rules": [
      {"source": "Unactivated", "priority": 0,
       "guard": {"kind": "question", "question": "Is Haruhi taking charge?", "target": "directing"}},
      {"source": "directing", "priority": 0,
       "guard": {"kind": "question", "question": "Is Haruhi's authority challenged?", "target": "confrontational"}}
    ]
  })";
}

}  // namespace

TEST_CASE("extraction dedupes and forces the reserved pair") {
  CannedChatClient client({R"(["angry", "calm", "angry"])"});
  const auto states = extract_states(demo_profile(), client, extract_tpl());
  CHECK(states == std::vector<std::string>{"Unactivated", "angry", "calm", "Other"});
}

TEST_CASE("extraction is idempotent when the model emits reserved names") {
  CannedChatClient client({R"(["Unactivated", "angry", "Other", "calm"])"});
  const auto states = extract_states(demo_profile(), client, extract_tpl());
  CHECK(states == std::vector<std::string>{"Unactivated", "angry", "calm", "Other"});
}

TEST_CASE("a fixed three-state reply yields a five-state vocabulary") {
  CannedChatClient client({R"(Here you go:
```json
["directing", "confrontational", "bored"]
```)"});
  const auto states = extract_states(demo_profile(), client, extract_tpl());
  CHECK(states.size() == 5);
  CHECK(states.front() == "Unactivated");
  CHECK(states.back() == "Other");
}

TEST_CASE("malformed extraction drafts are retried within the budget") {
  CannedChatClient client({"no json here", R"([])", R"(["calm"])"});
  const auto states = extract_states(demo_profile(), client, extract_tpl());
  CHECK(states == std::vector<std::string>{"Unactivated", "calm", "Other"});
  CHECK(client.calls() == 3);
}

TEST_CASE("extraction surfaces ExtractionError after the budget") {
  CannedChatClient client({"junk", "junk", "junk"});
  CHECK_THROWS_AS(extract_states(demo_profile(), client, extract_tpl()), ExtractionError);
  CHECK(client.calls() == 3);
}

TEST_CASE("codify_machine accepts a clean first draft") {
  CannedChatClient client({valid_machine_doc()});
  const std::vector<std::string> states = {"Unactivated", "directing", "confrontational", "Other"};
  const CodificationReport report =
      codify_machine(demo_profile(), states, client, codify_grid_tpl());
  REQUIRE(report.machine.has_value());
  CHECK(report.rejected_drafts == 0);
  CHECK(report.llm_calls == 1);
  CHECK(report.mode == BankMode::kGrid);
  CHECK(report.question_count == 2);  // two distinct guard questions
  CHECK(validate_machine(*report.machine).empty());
}

TEST_CASE("a dangling state triggers one repair round quoting the diagnostics") {
  std::string broken = valid_machine_doc();
  const std::string needle = "\"target\": \"confrontational\"";
  broken.replace(broken.find(needle), needle.size(), "\"target\": \"furious\"");

  CannedChatClient client({broken, valid_machine_doc()});
  const std::vector<std::string> states = {"Unactivated", "directing", "confrontational", "Other"};
  const CodificationReport report =
      codify_machine(demo_profile(), states, client, codify_grid_tpl());
  REQUIRE(report.machine.has_value());
  CHECK(report.rejected_drafts == 1);
  CHECK(report.llm_calls == 2);

  // the repair request quotes the rejection reason back to the model
  REQUIRE(client.requests().size() == 2);
  const std::string& repair_prompt = client.requests()[1][0].content;
  CHECK(repair_prompt.find("furious") != std::string::npos);
  CHECK(repair_prompt.find("rejected") != std::string::npos);
}

TEST_CASE("three garbage drafts exhaust the budget with all diagnostics kept") {
  CannedChatClient client({"garbage one", "garbage two", "garbage three"});
  const std::vector<std::string> states = {"Unactivated", "directing", "Other"};
  try {
    codify_machine(demo_profile(), states, client, codify_grid_tpl());
    FAIL("expected CodificationError");
  } catch (const CodificationError& e) {
    CHECK(e.diagnostics().size() == 3);
  }
  CHECK(client.calls() == 3);
}

TEST_CASE("codify_machine rejects drafts that change the state set") {
  std::string wrong_states = valid_machine_doc();
  // model sneaks in an extra state; two identical bad drafts then give up
  const std::string needle = "\"confrontational\",";
  wrong_states.replace(wrong_states.find(needle), needle.size(), "\"confrontational\", \"smug\",");
  CannedChatClient client({wrong_states, wrong_states});
  const std::vector<std::string> states = {"Unactivated", "directing", "confrontational", "Other"};
  CHECK_THROWS_AS(
      codify_machine(demo_profile(), states, client, codify_grid_tpl(), CodifierOptions{2}),
      CodificationError);
}

TEST_CASE("sparse codification: n defaults plus k specials") {
  CannedChatClient client({R"({
    "glosses": {"directing": "ordering the brigade around"},
    "specials": [
      {"source": "directing", "target": "confrontational", "question": "Is she defied?"},
      {"source": "Unactivated", "target": "directing", "question": "Does she take charge?"},
      {"source": "confrontational", "target": "Other", "question": "Does the scene end?"}
    ]
  })"});
  const std::vector<std::string> states = {"Unactivated", "directing", "confrontational", "Other"};
  const CodificationReport report =
      codify_sparse(demo_profile(), states, client, codify_sparse_tpl());
  REQUIRE(report.bank.has_value());
  CHECK(report.mode == BankMode::kSparse);
  CHECK(report.question_count == 4 + 3);
  CHECK(report.bank->defaults.size() == 4);
  CHECK(report.bank->specials.size() == 3);
  // glosses are interpolated into the templated default
  CHECK(report.bank->defaults[1] ==
        default_question_for("directing", "ordering the brigade around"));
  CHECK(report.bank->defaults[0] == default_question_for("Unactivated", ""));
  CHECK(validate_bank(*report.bank).empty());
}

TEST_CASE("duplicate special cells collapse keeping the first") {
  CannedChatClient client({R"({
    "specials": [
      {"source": "a", "target": "Other", "question": "first?"},
      {"source": "a", "target": "Other", "question": "second?"}
    ]
  })"});
  const std::vector<std::string> states = {"Unactivated", "a", "Other"};
  const CodificationReport report =
      codify_sparse(demo_profile(), states, client, codify_sparse_tpl());
  REQUIRE(report.bank.has_value());
  CHECK(report.bank->specials.size() == 1);
  CHECK(report.bank->specials[0].question == "first?");
  CHECK(report.question_count == 3 + 1);
}

TEST_CASE("sparse specials referencing unknown states trigger repair") {
  CannedChatClient client({R"({"specials": [{"source": "ghost", "target": "a", "question": "q?"}]})",
                           R"({"specials": []})"});
  const std::vector<std::string> states = {"Unactivated", "a", "Other"};
  const CodificationReport report =
      codify_sparse(demo_profile(), states, client, codify_sparse_tpl());
  CHECK(report.rejected_drafts == 1);
  CHECK(report.llm_calls == 2);
  CHECK(report.question_count == 3);
}

TEST_CASE("sparse question count scales as n + k while grid is n squared") {
  // n=5 with k=3 means 8 questions against the 25 of a grid
  std::vector<std::string> states = {"Unactivated", "a", "b", "c", "Other"};
  CannedChatClient client({R"({
    "specials": [
      {"source": "a", "target": "b", "question": "q1?"},
      {"source": "b", "target": "c", "question": "q2?"},
      {"source": "c", "target": "a", "question": "q3?"}
    ]
  })"});
  const CodificationReport report =
      codify_sparse(demo_profile(), states, client, codify_sparse_tpl());
  CHECK(report.question_count == 8);
  CHECK(states.size() * states.size() == 25);
}

TEST_CASE("profiles parse and validate") {
  const CharacterProfile p = parse_profile(R"({"character_id": "x", "paragraphs": ["a", "b"]})");
  CHECK(p.character_id == "x");
  CHECK(p.paragraphs.size() == 2);
  CHECK(parse_profile(serialize_profile(p)).character_id == "x");

  CHECK_THROWS_AS(parse_profile(R"({"character_id": "x", "paragraphs": []})"), SchemaError);
  CHECK_THROWS_AS(parse_profile(R"({"character_id": "x", "paragraphs": [""]})"), SchemaError);
  CHECK_THROWS_AS(parse_profile(R"({"character_id": "x"})"), SchemaError);
  CHECK_THROWS_AS(parse_profile(R"({"character_id": "x", "paragraphs": ["a"], "zz": 1})"),
                  SchemaError);
}

TEST_CASE("prompt templates load from the shipped directory and render") {
  const std::filesystem::path dir = CFSM_PROMPTS_DIR;
  for (TemplateName name :
       {TemplateName::kExtract, TemplateName::kCodifyGrid, TemplateName::kCodifySparse,
        TemplateName::kRelevance, TemplateName::kActivity, TemplateName::kDiscriminate}) {
    CHECK_NOTHROW(PromptTemplate::load(name, dir));
  }
  const PromptTemplate relevance = PromptTemplate::load(TemplateName::kRelevance, dir);
  const std::string question = render_routing_question(relevance, "Kyon");
  CHECK(question.find("Kyon") != std::string::npos);
  CHECK(question.find("{{") == std::string::npos);
}

TEST_CASE("templates missing required placeholders are rejected") {
  CHECK_THROWS_AS(PromptTemplate::from_text(TemplateName::kExtract, "no placeholders at all"),
                  SchemaError);
  CHECK_THROWS_AS(
      PromptTemplate::from_text(TemplateName::kDiscriminate, "only {{text}} present"),
      SchemaError);
}

TEST_CASE("canned codification is deterministic end to end") {
  const std::vector<std::string> fixtures = {R"(["directing", "confrontational"])",
                                             valid_machine_doc()};
  auto run = [&] {
    CannedChatClient client(fixtures);
    const auto states = extract_states(demo_profile(), client, extract_tpl());
    const auto report = codify_machine(demo_profile(), states, client, codify_grid_tpl());
    return serialize_machine(*report.machine);
  };
  CHECK(run() == run());
}

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

#include "cfsm/codifier.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cfsm {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Models often wrap structured output in markdown fences or prose; recover
// the first JSON value of the expected kind.
std::string extract_json_payload(const std::string& content, char open, char close) {
  const std::size_t begin = content.find(open);
  const std::size_t end = content.rfind(close);
  if (begin == std::string::npos || end == std::string::npos || end < begin) {
    throw SyntaxError(std::string("no JSON payload delimited by '") + open + "'...'" + close +
                      "' in model output");
  }
  return content.substr(begin, end - begin + 1);
}

std::string repair_preamble(const std::vector<std::string>& diagnostics) {
  std::ostringstream out;
  out << "\n\nYour previous draft(s) were rejected for these reasons:\n";
  for (std::size_t i = 0; i < diagnostics.size(); ++i) {
    out << (i + 1) << ". " << diagnostics[i] << "\n";
  }
  out << "Emit a corrected document that fixes every issue above.\n";
  return out.str();
}

std::string states_line(const std::vector<std::string>& states) {
  std::string out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i) out += ", ";
    out += "\"" + states[i] + "\"";
  }
  return out;
}

}  // namespace

CharacterProfile parse_profile(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SyntaxError(std::string("profile is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw SyntaxError("profile must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "character_id" && key != "paragraphs") {
      throw SchemaError("unknown field \"" + key + "\" in profile");
    }
  }
  CharacterProfile profile;
  if (!doc.contains("character_id") || !doc["character_id"].is_string()) {
    throw SchemaError("profile requires a \"character_id\" string");
  }
  profile.character_id = doc["character_id"].get<std::string>();
  if (!doc.contains("paragraphs") || !doc["paragraphs"].is_array()) {
    throw SchemaError("profile requires a \"paragraphs\" array");
  }
  for (const auto& p : doc["paragraphs"]) {
    if (!p.is_string()) throw SchemaError("profile paragraphs must be strings");
    profile.paragraphs.push_back(p.get<std::string>());
  }
  const bool any_content = std::any_of(profile.paragraphs.begin(), profile.paragraphs.end(),
                                       [](const std::string& p) { return !p.empty(); });
  if (!any_content) throw SchemaError("profile requires at least one non-empty paragraph");
  return profile;
}

std::string serialize_profile(const CharacterProfile& profile) {
  ordered_json doc;
  doc["character_id"] = profile.character_id;
  doc["paragraphs"] = profile.paragraphs;
  return doc.dump(2) + "\n";
}

std::vector<std::string> extract_states(const CharacterProfile& profile, ChatClient& client,
                                        const PromptTemplate& extract_template,
                                        const CodifierOptions& options) {
  const std::string prompt = extract_template.render(
      {{"character", profile.character_id}, {"profile", join(profile.paragraphs, "\n\n")}});

  std::vector<std::string> failures;
  for (std::size_t draft = 0; draft < options.draft_budget; ++draft) {
    const ChatResponse response = client.complete_user(prompt);
    try {
      const ordered_json doc =
          ordered_json::parse(extract_json_payload(response.content, '[', ']'));
      if (!doc.is_array()) throw SyntaxError("state list must be a JSON array");
      std::vector<std::string> names;
      std::set<std::string> seen;
      for (const auto& s : doc) {
        if (!s.is_string()) throw SyntaxError("state names must be strings");
        const std::string name = s.get<std::string>();
        if (name.empty() || name == kUnactivated || name == kOther) continue;
        if (seen.insert(name).second) names.push_back(name);
      }
      if (names.empty()) throw SchemaError("model returned no domain states");
      names.insert(names.begin(), std::string(kUnactivated));
      names.push_back(std::string(kOther));
      return names;
    } catch (const Error& e) {
      failures.push_back(e.what());
    }
  }
  throw ExtractionError("state extraction failed after " + std::to_string(options.draft_budget) +
                        " drafts; last: " + (failures.empty() ? "none" : failures.back()));
}

CodificationReport codify_machine(const CharacterProfile& profile,
                                  const std::vector<std::string>& states, ChatClient& client,
                                  const PromptTemplate& codify_template,
                                  const CodifierOptions& options) {
  if (states.size() < 2 || states.front() != kUnactivated || states.back() != kOther) {
    throw SchemaError("codify_machine requires the reserved pair around the domain states");
  }
  const std::string base_prompt =
      codify_template.render({{"character", profile.character_id},
                              {"profile", join(profile.paragraphs, "\n\n")},
                              {"states", states_line(states)}});

  CodificationReport report;
  report.mode = BankMode::kGrid;
  std::vector<std::string> diagnostics;
  for (std::size_t draft = 0; draft < options.draft_budget; ++draft) {
    const std::string prompt =
        diagnostics.empty() ? base_prompt : base_prompt + repair_preamble(diagnostics);
    const ChatResponse response = client.complete_user(prompt);
    ++report.llm_calls;
    try {
      MachineDefinition machine =
          parse_machine(extract_json_payload(response.content, '{', '}'));
      if (machine.states != states) {
        throw SchemaError("machine must declare exactly the states [" + states_line(states) +
                          "] in that order");
      }
      std::set<std::string> questions;
      for (const auto& rule : machine.rules) {
        if (!rule.guard.question.empty()) questions.insert(rule.guard.question);
      }
      report.machine = std::move(machine);
      report.question_count = questions.size();
      return report;
    } catch (const Error& e) {
      diagnostics.push_back(e.what());
      ++report.rejected_drafts;
    }
  }
  throw CodificationError("machine codification failed after " +
                              std::to_string(options.draft_budget) + " drafts",
                          diagnostics);
}

std::string default_question_for(const std::string& state, const std::string& gloss) {
  if (gloss.empty()) {
    return "Given this action, is the character now best described as \"" + state + "\"?";
  }
  return "Given this action, is the character now best described as \"" + state + "\" (" + gloss +
         ")?";
}

CodificationReport codify_sparse(const CharacterProfile& profile,
                                 const std::vector<std::string>& states, ChatClient& client,
                                 const PromptTemplate& codify_template,
                                 const CodifierOptions& options) {
  if (states.size() < 2 || states.front() != kUnactivated || states.back() != kOther) {
    throw SchemaError("codify_sparse requires the reserved pair around the domain states");
  }
  auto state_index = [&](const std::string& name) -> std::size_t {
    auto it = std::find(states.begin(), states.end(), name);
    if (it == states.end()) {
      throw SchemaError("special rule references undeclared state \"" + name + "\"");
    }
    return static_cast<std::size_t>(it - states.begin());
  };

  const std::string base_prompt =
      codify_template.render({{"character", profile.character_id},
                              {"profile", join(profile.paragraphs, "\n\n")},
                              {"states", states_line(states)}});

  CodificationReport report;
  report.mode = BankMode::kSparse;
  std::vector<std::string> diagnostics;
  for (std::size_t draft = 0; draft < options.draft_budget; ++draft) {
    const std::string prompt =
        diagnostics.empty() ? base_prompt : base_prompt + repair_preamble(diagnostics);
    const ChatResponse response = client.complete_user(prompt);
    ++report.llm_calls;
    try {
      const ordered_json doc =
          ordered_json::parse(extract_json_payload(response.content, '{', '}'));
      if (!doc.is_object()) throw SyntaxError("sparse codification output must be a JSON object");

      std::map<std::string, std::string> glosses;
      if (doc.contains("glosses")) {
        if (!doc["glosses"].is_object()) throw SchemaError("\"glosses\" must be an object");
        for (const auto& [state, gloss] : doc["glosses"].items()) {
          if (!gloss.is_string()) throw SchemaError("glosses must be strings");
          state_index(state);  // referential check
          glosses[state] = gloss.get<std::string>();
        }
      }

      QuestionBank bank;
      bank.mode = BankMode::kSparse;
      bank.n = states.size();
      for (const auto& state : states) {
        auto it = glosses.find(state);
        bank.defaults.push_back(
            default_question_for(state, it == glosses.end() ? "" : it->second));
      }

      std::set<std::pair<std::size_t, std::size_t>> cells;
      if (doc.contains("specials")) {
        if (!doc["specials"].is_array()) throw SchemaError("\"specials\" must be an array");
        for (const auto& s : doc["specials"]) {
          if (!s.is_object() || !s.contains("source") || !s.contains("target") ||
              !s.contains("question") || !s["question"].is_string()) {
            throw SchemaError("each special needs source, target and question");
          }
          SpecialQuestion special;
          special.source = state_index(s["source"].get<std::string>());
          special.target = state_index(s["target"].get<std::string>());
          special.question = s["question"].get<std::string>();
          if (special.question.empty()) throw SchemaError("special questions must be non-empty");
          // duplicate cells collapse keeping the first
          if (cells.insert({special.source, special.target}).second) {
            bank.specials.push_back(std::move(special));
          }
        }
      }

      report.question_count = bank.question_count();
      report.bank = std::move(bank);
      return report;
    } catch (const Error& e) {
      diagnostics.push_back(e.what());
      ++report.rejected_drafts;
    }
  }
  throw CodificationError("sparse codification failed after " +
                              std::to_string(options.draft_budget) + " drafts",
                          diagnostics);
}

std::string render_routing_question(const PromptTemplate& routing_template,
                                    const std::string& character_id) {
  return routing_template.render({{"character", character_id}});
}

}  // namespace cfsm

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

#ifndef CFSM_PROMPT_HPP_
#define CFSM_PROMPT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cfsm {

enum class TemplateName {
  kExtract,
  kCodifyGrid,
  kCodifySparse,
  kRelevance,
  kActivity,
  kDiscriminate,
};

std::string_view to_string(TemplateName name);

// Placeholders each orchestration step substitutes; loading rejects a body
// that lacks any of them.
const std::vector<std::string>& required_placeholders(TemplateName name);

// Prompt text with {{placeholder}} markers. Templates ship as plain-text data
// files so prompt wording can be edited without rebuilding.
struct PromptTemplate {
  TemplateName name = TemplateName::kDiscriminate;
  std::string body;

  bool has_placeholder(std::string_view placeholder) const;

  // Substitutes every {{key}} occurrence; unknown placeholders are left
  // verbatim so partially rendered prompts are visible in logs.
  std::string render(const std::map<std::string, std::string>& values) const;

  // Builds a validated template from literal text. Throws SchemaError if a
  // required placeholder is missing.
  static PromptTemplate from_text(TemplateName name, std::string body);

  // Loads "<dir>/<name>.txt", e.g. prompts/discriminate.txt.
  static PromptTemplate load(TemplateName name, const std::filesystem::path& dir);
};

}  // namespace cfsm

#endif  // CFSM_PROMPT_HPP_

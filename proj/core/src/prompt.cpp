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

#include "cfsm/prompt.hpp"

#include <fstream>
#include <sstream>

#include "cfsm/errors.hpp"

namespace cfsm {

std::string_view to_string(TemplateName name) {
  switch (name) {
    case TemplateName::kExtract: return "extract";
    case TemplateName::kCodifyGrid: return "codify-grid";
    case TemplateName::kCodifySparse: return "codify-sparse";
    case TemplateName::kRelevance: return "relevance";
    case TemplateName::kActivity: return "activity";
    case TemplateName::kDiscriminate: return "discriminate";
  }
  return "discriminate";
}

const std::vector<std::string>& required_placeholders(TemplateName name) {
  static const std::vector<std::string> extract = {"character", "profile"};
  static const std::vector<std::string> codify = {"character", "profile", "states"};
  static const std::vector<std::string> routing = {"character"};
  static const std::vector<std::string> discriminate = {"text", "question"};
  switch (name) {
    case TemplateName::kExtract: return extract;
    case TemplateName::kCodifyGrid:
    case TemplateName::kCodifySparse: return codify;
    case TemplateName::kRelevance:
    case TemplateName::kActivity: return routing;
    case TemplateName::kDiscriminate: return discriminate;
  }
  return discriminate;
}

bool PromptTemplate::has_placeholder(std::string_view placeholder) const {
  return body.find("{{" + std::string(placeholder) + "}}") != std::string::npos;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out = body;
  for (const auto& [key, value] : values) {
    const std::string marker = "{{" + key + "}}";
    std::size_t pos = 0;
    while ((pos = out.find(marker, pos)) != std::string::npos) {
      out.replace(pos, marker.size(), value);
      pos += value.size();
    }
  }
  return out;
}

PromptTemplate PromptTemplate::from_text(TemplateName name, std::string body) {
  PromptTemplate t{name, std::move(body)};
  for (const auto& placeholder : required_placeholders(name)) {
    if (!t.has_placeholder(placeholder)) {
      throw SchemaError("prompt template \"" + std::string(to_string(name)) +
                        "\" is missing required placeholder {{" + placeholder + "}}");
    }
  }
  return t;
}

PromptTemplate PromptTemplate::load(TemplateName name, const std::filesystem::path& dir) {
  const auto path = dir / (std::string(to_string(name)) + ".txt");
  std::ifstream in(path);
  if (!in) throw Error("cannot open prompt template " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_text(name, buffer.str());
}

}  // namespace cfsm

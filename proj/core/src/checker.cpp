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

#include "cfsm/checker.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

namespace cfsm {
namespace {

using nlohmann::json;

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// First whitespace-delimited word of `content`, lowercased and stripped of
// surrounding punctuation; empty when no word exists.
std::string first_answer_word(const std::string& content) {
  std::size_t begin = 0;
  while (begin < content.size() && !is_word_char(content[begin])) ++begin;
  std::size_t end = begin;
  while (end < content.size() && is_word_char(content[end])) ++end;
  return to_lower(std::string_view(content).substr(begin, end - begin));
}

std::string normalize_token(const std::string& token) {
  std::string out;
  for (char c : token) {
    if (is_word_char(c)) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kTrue: return "true";
    case Label::kFalse: return "false";
    case Label::kUnknown: return "unknown";
  }
  return "unknown";
}

std::optional<Label> label_from(std::string_view text) {
  if (text == "true") return Label::kTrue;
  if (text == "false") return Label::kFalse;
  if (text == "unknown") return Label::kUnknown;
  return std::nullopt;
}

bool verdict_coherent(const Verdict& v, double tolerance) {
  if (v.true_logprob > 0.0) return false;
  if (v.label == Label::kTrue) return v.true_logprob >= kLogHalf - tolerance;
  if (v.label == Label::kFalse) return v.true_logprob <= kLogHalf + tolerance;
  return true;
}

bool pattern_matches(std::string_view text, std::string_view pattern, bool anchor) {
  if (pattern.empty()) return true;
  const std::string haystack = to_lower(text);
  const std::string needle = to_lower(pattern);
  std::size_t pos = haystack.find(needle);
  while (pos != std::string::npos) {
    if (!anchor) return true;
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) return true;
    pos = haystack.find(needle, pos + 1);
  }
  return false;
}

ScriptedChecker::ScriptedChecker(std::vector<ScriptedRule> rules, double no_match_logprob)
    : rules_(std::move(rules)), no_match_logprob_(no_match_logprob) {
  for (const auto& r : rules_) {
    if (r.action_pattern.empty() && r.question_pattern.empty()) {
      throw SchemaError("scripted rule needs an action_pattern or a question_pattern");
    }
    if (!verdict_coherent(Verdict{r.label, r.logprob, VerdictSource::kScripted})) {
      throw SchemaError("scripted rule label \"" + std::string(to_string(r.label)) +
                        "\" is incoherent with logprob " + std::to_string(r.logprob));
    }
  }
}

Verdict ScriptedChecker::check(const Query& query) {
  for (const auto& r : rules_) {
    if (!pattern_matches(query.action, r.action_pattern, r.anchor)) continue;
    if (!pattern_matches(query.question, r.question_pattern, r.anchor)) continue;
    return Verdict{r.label, r.logprob, VerdictSource::kScripted};
  }
  return Verdict{Label::kFalse, no_match_logprob_, VerdictSource::kScripted};
}

ScriptedChecker ScriptedChecker::from_json(const std::string& text, double no_match_logprob) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("scripted rule file is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_array()) throw SchemaError("scripted rule file must be a JSON array");
  std::vector<ScriptedRule> rules;
  for (const auto& r : doc) {
    if (!r.is_object()) throw SchemaError("each scripted rule must be an object");
    ScriptedRule rule;
    if (r.contains("action_pattern")) rule.action_pattern = r["action_pattern"].get<std::string>();
    if (r.contains("question_pattern")) rule.question_pattern = r["question_pattern"].get<std::string>();
    if (r.contains("anchor")) rule.anchor = r["anchor"].get<bool>();
    auto label = label_from(r.value("label", ""));
    if (!label) throw SchemaError("scripted rule has no valid label");
    rule.label = *label;
    if (!r.contains("logprob") || !r["logprob"].is_number()) {
      throw SchemaError("scripted rule has no numeric logprob");
    }
    rule.logprob = r["logprob"].get<double>();
    rules.push_back(std::move(rule));
  }
  return ScriptedChecker(std::move(rules), no_match_logprob);
}

ScriptedChecker ScriptedChecker::from_file(const std::filesystem::path& path,
                                           double no_match_logprob) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scripted rule file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str(), no_match_logprob);
}

std::string ScriptedChecker::rules_to_json(const std::vector<ScriptedRule>& rules) {
  json doc = json::array();
  for (const auto& r : rules) {
    json rule;
    if (!r.action_pattern.empty()) rule["action_pattern"] = r.action_pattern;
    if (!r.question_pattern.empty()) rule["question_pattern"] = r.question_pattern;
    if (r.anchor) rule["anchor"] = true;
    rule["label"] = std::string(to_string(r.label));
    rule["logprob"] = r.logprob;
    doc.push_back(std::move(rule));
  }
  return doc.dump(2) + "\n";
}

Verdict SampledChecker::check(const Query& query) {
  const Verdict inner = inner_.check(query);
  double draw;
  {
    std::lock_guard lock(mutex_);
    draw = rng_.next_double();
  }
  if (draw < std::exp(inner.true_logprob)) {
    return Verdict{Label::kTrue, config_.true_logprob, inner.source};
  }
  return Verdict{Label::kFalse, config_.false_logprob, inner.source};
}

CacheStore::CacheStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // cold store
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json record = json::parse(line);
      auto label = label_from(record.value("label", ""));
      if (!label || !record.contains("key") || !record.contains("logprob")) continue;
      entries_[record["key"].get<std::string>()] =
          Verdict{*label, record["logprob"].get<double>(), VerdictSource::kCache};
    } catch (const json::parse_error&) {
      // tolerate torn/corrupt lines from interrupted writers
      continue;
    }
  }
}

std::optional<Verdict> CacheStore::get(const std::string& key) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  Verdict v = it->second;
  v.source = VerdictSource::kCache;
  return v;
}

void CacheStore::put(const std::string& key, const Verdict& verdict) {
  std::lock_guard lock(mutex_);
  entries_[key] = verdict;
  if (!persist_ok_) return;
  std::ofstream out(path_, std::ios::app);
  if (!out) {
    persist_ok_ = false;
    std::cerr << "cfsm: cache store " << path_ << " is not writable; continuing without persistence\n";
    return;
  }
  json record;
  record["key"] = key;
  record["label"] = std::string(to_string(verdict.label));
  record["logprob"] = verdict.true_logprob;
  out << record.dump() << "\n";
}

std::size_t CacheStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::string cache_key(std::string_view backend_id, const Query& query) {
  std::string material;
  auto append_field = [&material](std::string_view field) {
    std::uint64_t length = field.size();
    for (int i = 0; i < 8; ++i) {
      material.push_back(static_cast<char>((length >> (8 * i)) & 0xFF));
    }
    material.append(field);
  };
  append_field(backend_id);
  append_field(query.question);
  append_field(query.scene);
  append_field(query.action);

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  EVP_Digest(material.data(), material.size(), digest, &digest_len, EVP_sha256(), nullptr);

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(digest_len * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

Verdict CachedChecker::check(const Query& query) {
  const std::string key = cache_key(inner_.backend_id(), query);
  if (auto hit = store_.get(key)) return *hit;
  Verdict fresh = inner_.check(query);
  store_.put(key, fresh);
  return fresh;
}

RemoteChecker::RemoteChecker(std::shared_ptr<ChatClient> client, PromptTemplate discriminate,
                             LabelCalibration calibration)
    : client_(std::move(client)),
      discriminate_(std::move(discriminate)),
      calibration_(calibration),
      on_protocol_error_([](const std::string& content) {
        std::cerr << "cfsm: discriminator reply not parseable as yes/no/unknown: \"" << content
                  << "\"\n";
      }) {}

std::string RemoteChecker::backend_id() const { return client_->id(); }

void RemoteChecker::set_protocol_error_handler(std::function<void(const std::string&)> handler) {
  on_protocol_error_ = std::move(handler);
}

Verdict RemoteChecker::check(const Query& query) {
  const std::string text =
      query.scene.empty() ? query.action : query.scene + "\n" + query.action;
  const std::string prompt =
      discriminate_.render({{"text", text}, {"question", query.question}});
  const ChatResponse response = client_->complete_user(prompt);

  const std::string word = first_answer_word(response.content);
  Label label;
  if (word == "yes" || word == "true") {
    label = Label::kTrue;
  } else if (word == "no" || word == "false") {
    label = Label::kFalse;
  } else if (word == "unknown" || word == "unsure") {
    label = Label::kUnknown;
  } else {
    on_protocol_error_(response.content);
    return Verdict{Label::kUnknown, calibration_.unknown_logprob, VerdictSource::kRemote};
  }

  double true_logprob;
  std::optional<double> answer_token_lp;
  for (const auto& tok : response.token_logprobs) {
    if (normalize_token(tok.token) == word) {
      answer_token_lp = tok.logprob;
      break;
    }
  }
  if (label == Label::kUnknown) {
    true_logprob = calibration_.unknown_logprob;
  } else if (answer_token_lp) {
    if (label == Label::kTrue) {
      // P(true) = P(answer token); clamp into coherence with the label.
      true_logprob = std::max(std::min(*answer_token_lp, 0.0), kLogHalf);
    } else {
      // P(true) = 1 - P(answer token).
      const double p_no = std::exp(std::min(*answer_token_lp, 0.0));
      const double p_true = std::max(1.0 - p_no, 1e-12);
      true_logprob = std::min(std::log(p_true), kLogHalf);
    }
  } else {
    true_logprob =
        label == Label::kTrue ? calibration_.true_logprob : calibration_.false_logprob;
  }
  return Verdict{label, true_logprob, VerdictSource::kRemote};
}

}  // namespace cfsm

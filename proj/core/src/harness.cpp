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

#include "cfsm/harness.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfsm/pfsm.hpp"
#include "cfsm/rng.hpp"

namespace cfsm::harness {
namespace {

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  bool in_space = true;  // also trims leading space
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// Closing quote/bracket glyphs that may trail a sentence terminator. The
// UTF-8 pairs cover the typographic right double/single quotes.
std::size_t closing_run(const std::string& text, std::size_t pos) {
  std::size_t end = pos;
  while (end < text.size()) {
    const char c = text[end];
    if (c == '"' || c == '\'' || c == ')' || c == ']') {
      ++end;
      continue;
    }
    if (end + 2 < text.size() && static_cast<unsigned char>(c) == 0xE2 &&
        static_cast<unsigned char>(text[end + 1]) == 0x80) {
      const unsigned char third = static_cast<unsigned char>(text[end + 2]);
      if (third == 0x99 || third == 0x9D) {  // ’ ”
        end += 3;
        continue;
      }
    }
    break;
  }
  return end;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_terminator(text[i])) {
      // consume any run of terminators ("..." / "?!") plus closing quotes
      std::size_t end = i + 1;
      while (end < text.size() && is_terminator(text[end])) ++end;
      end = closing_run(text, end);
      const std::string sentence = normalize_whitespace(text.substr(begin, end - begin));
      if (!sentence.empty()) sentences.push_back(sentence);
      begin = end;
      i = end;
    } else {
      ++i;
    }
  }
  const std::string tail = normalize_whitespace(text.substr(begin));
  if (!tail.empty()) sentences.push_back(tail);
  return sentences;
}

}  // namespace

std::string assemble_prompt(const PromptContext& context, const SceneAction& action) {
  std::ostringstream out;
  out << context.global_instruction << "\n\n" << context.character_instruction << "\n";
  if (!context.grounded_states.empty()) {
    out << "\nCurrent state:\n";
    for (const auto& [machine_id, state] : context.grounded_states) {
      out << "- " << machine_id << ": " << state << "\n";
    }
  }
  out << "\nScene: " << action.scene_text << "\nAction: " << action.action_text
      << "\nRespond in character.\n";
  return out.str();
}

StepBatch segment_scene(const std::string& text, std::size_t sentences_per_step) {
  if (sentences_per_step == 0) throw Error("sentences_per_step must be >= 1");
  StepBatch batch;
  batch.sentences_per_step = sentences_per_step;
  const std::vector<std::string> sentences = split_sentences(text);
  for (std::size_t i = 0; i < sentences.size(); i += sentences_per_step) {
    std::string merged;
    for (std::size_t j = i; j < std::min(i + sentences_per_step, sentences.size()); ++j) {
      if (!merged.empty()) merged += " ";
      merged += sentences[j];
    }
    batch.segments.push_back(SceneAction{"", merged, std::nullopt});
  }
  return batch;
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kDeterministic: return "deterministic";
    case StrategyKind::kSampledStateDist: return "sampled-state-dist";
    case StrategyKind::kRandomStateDist: return "random-state-dist";
    case StrategyKind::kSampledChecker: return "sampled-checker";
    case StrategyKind::kGeneratorTemperature: return "generator-temperature";
  }
  return "deterministic";
}

std::optional<StrategyKind> strategy_from(std::string_view name) {
  if (name == "deterministic") return StrategyKind::kDeterministic;
  if (name == "sampled-state-dist" || name == "sampled-dist") return StrategyKind::kSampledStateDist;
  if (name == "random-state-dist" || name == "random-dist") return StrategyKind::kRandomStateDist;
  if (name == "sampled-checker") return StrategyKind::kSampledChecker;
  if (name == "generator-temperature" || name == "gen-temp") {
    return StrategyKind::kGeneratorTemperature;
  }
  return std::nullopt;
}

std::optional<double> StubJudge::score(const std::string& candidate) {
  return static_cast<double>(Rng::hash_tag(candidate) % 10001) / 100.0;
}

std::optional<double> RemoteJudge::score(const std::string& candidate) {
  std::ostringstream prompt;
  prompt << "Reference:\n" << reference_ << "\n\nCandidate:\n" << candidate
         << "\n\nDoes the candidate entail the reference? Reply with exactly one word: "
            "entailment, neutral, or contradiction.";
  try {
    const ChatResponse response = client_->complete_user(prompt.str());
    std::string word;
    for (char c : response.content) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else if (!word.empty()) {
        break;
      }
    }
    if (word == "entailment" || word == "entailed") return 100.0;
    if (word == "neutral") return 50.0;
    if (word == "contradiction" || word == "contradicted") return 0.0;
    return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;  // missing score; the run continues
  }
}

std::string render_trajectory(const CharacterStateModel& model, const Episode& episode,
                              const std::vector<std::map<std::string, StateId>>& states_per_step,
                              const ExplorationStrategy& strategy) {
  std::ostringstream out;
  out << "trajectory v1 | character: " << model.character_id << "\n";
  if (strategy.kind == StrategyKind::kGeneratorTemperature) {
    out << "generator temperature: " << strategy.temperature << "\n";
  }
  for (std::size_t t = 0; t < states_per_step.size(); ++t) {
    out << "step " << (t + 1) << " | action: "
        << (t < episode.actions.size() ? episode.actions[t].action_text : "") << " | states:";
    for (const auto& machine : model.machines) {
      auto it = states_per_step[t].find(machine.machine_id);
      out << " " << machine.machine_id << "="
          << (it == states_per_step[t].end() ? "?" : it->second.name) << ";";
    }
    out << "\n";
  }
  return out.str();
}

BestKResult run_bestk(const Episode& episode, const CharacterStateModel& model,
                      const ExplorationStrategy& strategy, int k, Judge& judge,
                      ConditionChecker& checker, std::uint64_t master_seed) {
  if (k < 1) throw Error("run_bestk requires k >= 1");
  if (strategy.kind == StrategyKind::kGeneratorTemperature && strategy.temperature < 0.0) {
    throw Error("generator-temperature strategy requires temperature >= 0");
  }

  // Derived banks for distribution strategies, one per machine.
  std::map<std::string, QuestionBank> banks;
  if (strategy.kind == StrategyKind::kSampledStateDist) {
    for (const auto& machine : model.machines) {
      banks.emplace(machine.machine_id, derive_grid_bank(machine));
    }
  }

  const std::string tag(to_string(strategy.kind));
  BestKResult result;
  result.k = k;

  for (int j = 0; j < k; ++j) {
    Rng state_rng = Rng::child(master_seed, tag + "/state", static_cast<std::uint64_t>(j));
    SampledChecker sampled(checker,
                           Rng::child(master_seed, tag + "/checker", static_cast<std::uint64_t>(j)));
    ConditionChecker& rollout_checker =
        strategy.kind == StrategyKind::kSampledChecker ? static_cast<ConditionChecker&>(sampled)
                                                       : checker;

    std::map<std::string, StateId> grounded;
    std::map<std::string, StateDistribution> dists;
    for (const auto& machine : model.machines) {
      grounded.emplace(machine.machine_id, machine.initial());
      if (strategy.kind == StrategyKind::kSampledStateDist) {
        dists.emplace(machine.machine_id,
                      StateDistribution::one_hot(machine.state_count(), 0));
      }
    }

    std::vector<std::map<std::string, StateId>> states_per_step;
    for (const auto& action : episode.actions) {
      switch (strategy.kind) {
        case StrategyKind::kDeterministic:
        case StrategyKind::kGeneratorTemperature:
        case StrategyKind::kSampledChecker: {
          CharacterStep step = step_character(model, grounded, action, rollout_checker);
          for (auto& [id, engine_step] : step.steps) grounded[id] = engine_step.next;
          break;
        }
        case StrategyKind::kRandomStateDist: {
          // complete random state sampling over the full state set,
          // reserved states included
          for (const auto& machine : model.machines) {
            grounded[machine.machine_id] =
                machine.state(state_rng.next_below(machine.state_count()));
          }
          break;
        }
        case StrategyKind::kSampledStateDist: {
          // same relevance/activity routing as the deterministic engine
          const Verdict relevance = rollout_checker.check(
              Query{action.scene_text, action.action_text, model.relevance_question});
          if (relevance.label != Label::kTrue) break;  // all machines hold
          const Verdict activity = rollout_checker.check(
              Query{action.scene_text, action.action_text, model.activity_question});
          const Perspective role = activity.label == Label::kTrue ? Perspective::kActive
                                                                  : Perspective::kPassive;
          for (const auto& machine : model.machines) {
            const bool routed = machine.perspective == Perspective::kShared ||
                                machine.perspective == role;
            if (!routed) continue;
            auto& dist = dists.at(machine.machine_id);
            MatrixBuild build =
                build_matrix(banks.at(machine.machine_id), action, rollout_checker);
            dist = update_distribution(dist, build.matrix);
            grounded[machine.machine_id] = machine.state(sample_index(dist, state_rng));
          }
          break;
        }
      }
      states_per_step.push_back(grounded);
    }

    const std::string candidate =
        render_trajectory(model, episode, states_per_step, strategy);
    std::optional<double> score;
    try {
      score = judge.score(candidate);
    } catch (const Error&) {
      score = std::nullopt;
    }
    result.per_sample_scores.push_back(score);
  }

  bool any = false;
  double best = 0.0;
  for (const auto& s : result.per_sample_scores) {
    if (s && (!any || *s > best)) {
      best = *s;
      any = true;
    }
  }
  if (!any) throw JudgeError("judge produced no scores for any of the " + std::to_string(k) +
                             " samples");
  result.best = best;
  return result;
}

std::string series_to_plotdata(const std::vector<Series>& series) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& s : series) {
    nlohmann::ordered_json entry;
    entry["label"] = s.label;
    entry["x"] = s.x;
    entry["y"] = s.y;
    list.push_back(std::move(entry));
  }
  doc["series"] = std::move(list);
  return doc.dump(2) + "\n";
}

std::string bestk_csv(const std::string& strategy, const std::vector<BestKResult>& sweep) {
  std::ostringstream out;
  out << "strategy,k,sample,score\n";
  for (const auto& result : sweep) {
    for (std::size_t j = 0; j < result.per_sample_scores.size(); ++j) {
      out << strategy << "," << result.k << "," << (j + 1) << ",";
      if (result.per_sample_scores[j]) out << *result.per_sample_scores[j];
      out << "\n";
    }
    out << strategy << "," << result.k << ",best," << result.best << "\n";
  }
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace cfsm::harness

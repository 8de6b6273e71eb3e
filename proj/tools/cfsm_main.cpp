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

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfsm/codifier.hpp"
#include "cfsm/engine.hpp"
#include "cfsm/harness.hpp"
#include "cfsm/model.hpp"
#include "cfsm/pfsm.hpp"
#include "cfsm/synthbench.hpp"

namespace {

using namespace cfsm;
using nlohmann::ordered_json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
  } else {
    harness::write_file(out_path, content);
  }
}

std::optional<std::string> env_value(const char* name) {
  const char* value = std::getenv(name);
  if (value && *value) return std::string(value);
  return std::nullopt;
}

// Config file: {"checker": {...}, "seed": int, "cache_path": str}.
// Precedence everywhere: CLI flags > environment > config file.
struct Settings {
  RemoteClientConfig checker;
  std::uint64_t seed = 0;
  std::string cache_path = "cfsm-cache.jsonl";
  std::string prompts_dir = "prompts";

  void load_config_file(const std::string& path) {
    const ordered_json doc = ordered_json::parse(slurp(path));
    if (doc.contains("seed")) seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("cache_path")) cache_path = doc["cache_path"].get<std::string>();
    if (doc.contains("checker")) {
      const auto& c = doc["checker"];
      if (c.contains("endpoint")) checker.endpoint = c["endpoint"].get<std::string>();
      if (c.contains("path")) checker.path = c["path"].get<std::string>();
      if (c.contains("model")) checker.model = c["model"].get<std::string>();
      if (c.contains("api_key")) checker.api_key = c["api_key"].get<std::string>();
      if (c.contains("api_key_env")) {
        if (auto key = env_value(c["api_key_env"].get<std::string>().c_str())) {
          checker.api_key = *key;
        }
      }
      if (c.contains("temperature")) checker.temperature = c["temperature"].get<double>();
      if (c.contains("logprobs")) checker.want_logprobs = c["logprobs"].get<bool>();
      if (c.contains("max_attempts")) checker.max_attempts = c["max_attempts"].get<int>();
      if (c.contains("backoff_ms")) {
        checker.initial_backoff = std::chrono::milliseconds(c["backoff_ms"].get<long>());
      }
      if (c.contains("timeout_ms")) {
        checker.timeout = std::chrono::milliseconds(c["timeout_ms"].get<long>());
      }
      if (c.contains("max_inflight")) {
        checker.max_inflight = c["max_inflight"].get<std::size_t>();
      }
    }
  }

  void apply_environment() {
    if (auto v = env_value("CHECKER_ENDPOINT")) checker.endpoint = *v;
    if (auto v = env_value("CHECKER_API_KEY")) checker.api_key = *v;
    if (auto v = env_value("CHECKER_MODEL")) checker.model = *v;
  }
};

// Owns whichever checker stack a "--checker" spec describes:
//   scripted:<rules.json> | remote | cached:<inner spec>
struct CheckerStack {
  std::unique_ptr<ScriptedChecker> scripted;
  std::shared_ptr<ChatClient> client;
  std::unique_ptr<RemoteChecker> remote;
  std::unique_ptr<CacheStore> store;
  std::unique_ptr<CachedChecker> cached;
  ConditionChecker* head = nullptr;
};

CheckerStack make_checker(const std::string& spec, const Settings& settings) {
  CheckerStack stack;
  if (spec.rfind("cached:", 0) == 0) {
    stack = make_checker(spec.substr(7), settings);
    stack.store = std::make_unique<CacheStore>(settings.cache_path);
    stack.cached = std::make_unique<CachedChecker>(*stack.head, *stack.store);
    stack.head = stack.cached.get();
    return stack;
  }
  if (spec.rfind("scripted:", 0) == 0) {
    stack.scripted = std::make_unique<ScriptedChecker>(
        ScriptedChecker::from_file(spec.substr(9)));
    stack.head = stack.scripted.get();
    return stack;
  }
  if (spec == "remote") {
    if (settings.checker.endpoint.empty() || settings.checker.model.empty()) {
      throw Error("remote checker needs an endpoint and a model "
                  "(flags, CHECKER_* environment, or config file)");
    }
    stack.client = std::make_shared<RemoteChatClient>(settings.checker);
    stack.remote = std::make_unique<RemoteChecker>(
        stack.client,
        PromptTemplate::load(TemplateName::kDiscriminate, settings.prompts_dir));
    stack.head = stack.remote.get();
    return stack;
  }
  throw Error("unknown checker spec \"" + spec + "\" (scripted:<rules.json>|remote|cached:...)");
}

// Chat client for codification: canned fixture or remote endpoint.
std::shared_ptr<ChatClient> make_chat_client(const std::string& client_cfg_path,
                                             const Settings& settings) {
  const ordered_json doc = ordered_json::parse(slurp(client_cfg_path));
  if (doc.contains("canned")) {
    std::vector<std::string> responses;
    for (const auto& r : doc["canned"]) responses.push_back(r.get<std::string>());
    return std::make_shared<CannedChatClient>(std::move(responses));
  }
  if (doc.contains("canned_file")) {
    return std::make_shared<CannedChatClient>(
        CannedChatClient::responses_from_json(slurp(doc["canned_file"].get<std::string>())));
  }
  RemoteClientConfig cfg = settings.checker;
  if (doc.contains("endpoint")) cfg.endpoint = doc["endpoint"].get<std::string>();
  if (doc.contains("model")) cfg.model = doc["model"].get<std::string>();
  if (doc.contains("api_key")) cfg.api_key = doc["api_key"].get<std::string>();
  if (doc.contains("api_key_env")) {
    if (auto key = env_value(doc["api_key_env"].get<std::string>().c_str())) cfg.api_key = *key;
  }
  if (cfg.endpoint.empty() || cfg.model.empty()) {
    throw Error("chat client config needs canned responses or an endpoint+model");
  }
  return std::make_shared<RemoteChatClient>(cfg);
}

int run_validate(const std::string& model_path) {
  const CharacterStateModel model = parse_model(slurp(model_path));
  const auto diagnostics = validate_model(model);
  for (const auto& d : diagnostics) {
    std::cout << (d.severity == Severity::kError ? "error" : "warning") << " ["
              << (d.machine_id.empty() ? "<model>" : d.machine_id) << "]: " << d.message << "\n";
  }
  if (diagnostics.empty()) {
    std::cout << "ok: " << model.character_id << " with " << model.machines.size()
              << " machine(s)\n";
    return 0;
  }
  return 1;
}

int run_run(const std::string& model_path, const std::string& trace_path,
            const std::string& checker_spec, const std::string& machine_id,
            const std::string& initial_name, const std::string& out_path,
            const Settings& settings) {
  const CharacterStateModel model = parse_model(slurp(model_path));
  const std::vector<SceneAction> actions = actions_from_jsonl(slurp(trace_path));
  CheckerStack stack = make_checker(checker_spec, settings);

  if (!machine_id.empty()) {
    const MachineDefinition* machine = model.find_machine(machine_id);
    if (!machine) throw Error("no machine \"" + machine_id + "\" in " + model_path);
    StateId initial = machine->initial();
    if (!initial_name.empty()) {
      auto state = machine->find_state(initial_name);
      if (!state) throw Error("no state \"" + initial_name + "\" in machine " + machine_id);
      initial = *state;
    }
    const TraceRecord record = run_trace(*machine, initial, actions, *stack.head);
    emit(trace_to_jsonl(record), out_path);
    return 0;
  }

  // whole character: one record per (step, machine), with a "machine" field
  std::map<std::string, StateId> current;
  for (const auto& m : model.machines) current.emplace(m.machine_id, m.initial());
  std::ostringstream out;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const CharacterStep step = step_character(model, current, actions[t], *stack.head);
    for (const auto& m : model.machines) {
      const EngineStep& s = step.steps.at(m.machine_id);
      ordered_json line;
      line["t"] = t + 1;
      line["machine"] = m.machine_id;
      line["action"] = actions[t].action_text;
      line["scene"] = actions[t].scene_text;
      line["prior"] = s.prior.name;
      line["next"] = s.next.name;
      if (s.fired_rule) line["rule"] = *s.fired_rule; else line["rule"] = nullptr;
      line["calls"] = s.checker_calls;
      line["routing"] = std::string(to_string(s.routing));
      out << line.dump() << "\n";
      current.at(m.machine_id) = s.next;
    }
  }
  emit(out.str(), out_path);
  return 0;
}

int run_ptrace_cmd(const std::string& model_path, const std::string& bank_path,
                   const std::string& mode_flag, const std::string& machine_id,
                   const std::string& trace_path, const std::string& checker_spec,
                   const std::string& grounding_name, const std::string& initial_name,
                   std::uint64_t seed, const std::string& out_path, const Settings& settings) {
  const CharacterStateModel model = parse_model(slurp(model_path));
  const MachineDefinition* machine =
      machine_id.empty() ? (model.machines.empty() ? nullptr : &model.machines.front())
                         : model.find_machine(machine_id);
  if (!machine) throw Error("no machine to trace (use --machine)");

  const QuestionBank bank = parse_question_bank(slurp(bank_path), *machine);
  if (!mode_flag.empty()) {
    const bool wants_grid = mode_flag == "grid";
    if (wants_grid != (bank.mode == BankMode::kGrid)) {
      throw Error("bank file is " + std::string(to_string(bank.mode)) + " but --mode says " +
                  mode_flag);
    }
  }

  const std::vector<SceneAction> actions = actions_from_jsonl(slurp(trace_path));
  CheckerStack stack = make_checker(checker_spec, settings);

  std::size_t initial_index = 0;
  if (!initial_name.empty()) {
    auto state = machine->find_state(initial_name);
    if (!state) throw Error("no state \"" + initial_name + "\" in machine");
    initial_index = state->index;
  }
  const Grounding grounding =
      grounding_name == "sample" ? Grounding::kSample : Grounding::kArgmax;
  Rng rng(Rng::mix(seed));
  const auto trajectory =
      run_ptrace(*machine, bank, StateDistribution::one_hot(machine->state_count(), initial_index),
                 actions, *stack.head, grounding, rng);
  emit(ptrace_to_jsonl(actions, trajectory), out_path);
  return 0;
}

int run_codify(const std::string& profile_path, const std::string& mode,
               const std::string& client_cfg, const std::string& out_path,
               const std::string& report_path, const Settings& settings) {
  const CharacterProfile profile = parse_profile(slurp(profile_path));
  auto client = make_chat_client(client_cfg, settings);
  const std::filesystem::path prompts(settings.prompts_dir);

  const auto states = extract_states(
      profile, *client, PromptTemplate::load(TemplateName::kExtract, prompts));

  CodificationReport report;
  std::string artifact;
  if (mode == "grid") {
    report = codify_machine(profile, states, *client,
                            PromptTemplate::load(TemplateName::kCodifyGrid, prompts));
    artifact = serialize_machine(*report.machine);
  } else if (mode == "sparse") {
    report = codify_sparse(profile, states, *client,
                           PromptTemplate::load(TemplateName::kCodifySparse, prompts));
    MachineDefinition skeleton;  // the states without rules, for bank resolution
    skeleton.machine_id = profile.character_id + "-states";
    skeleton.dimension = "other-label";
    skeleton.perspective = Perspective::kShared;
    skeleton.states = states;
    artifact = serialize_question_bank(*report.bank, skeleton);
  } else {
    throw Error("--mode must be grid or sparse");
  }
  emit(artifact, out_path);

  ordered_json summary;
  summary["character_id"] = profile.character_id;
  summary["mode"] = mode;
  summary["states"] = states;
  summary["question_count"] = report.question_count;
  summary["llm_calls"] = report.llm_calls;
  summary["rejected_drafts"] = report.rejected_drafts;
  const std::string report_text = summary.dump(2) + "\n";
  if (report_path.empty()) {
    std::cerr << report_text;
  } else {
    harness::write_file(report_path, report_text);
  }
  return 0;
}

int run_synth_gen(const std::string& fsm, std::size_t paths, std::size_t length,
                  std::uint64_t seed, const std::string& out_path) {
  const synth::GroundTruthTable table = synth::builtin_table(fsm);
  synth::BenchmarkConfig cfg;
  cfg.fsm = fsm;
  cfg.pool_size = paths;
  cfg.seed = seed;
  const auto pool = synth::generate_pool(table, cfg, length);
  emit(synth::pool_to_jsonl(table, pool), out_path);
  return 0;
}

std::pair<int, int> parse_length_range(const std::string& lengths) {
  const auto dots = lengths.find("..");
  if (dots == std::string::npos) {
    const int single = std::stoi(lengths);
    return {single, single};
  }
  return {std::stoi(lengths.substr(0, dots)), std::stoi(lengths.substr(dots + 2))};
}

int run_synth_eval(const std::string& fsm, const std::string& predictor_name,
                   const std::string& lengths, std::size_t per_terminal, std::size_t paths,
                   std::uint64_t seed, const std::string& out_path,
                   const std::string& plotdata_path, const Settings& settings) {
  const synth::GroundTruthTable table = synth::builtin_table(fsm);
  synth::BenchmarkConfig cfg;
  cfg.fsm = fsm;
  cfg.pool_size = paths;
  cfg.per_terminal = per_terminal;
  cfg.seed = seed;
  auto [length_min, length_max] = parse_length_range(lengths);
  cfg.length_min = length_min;
  cfg.length_max = length_max;

  std::unique_ptr<synth::FinalStatePredictor> predictor;
  std::shared_ptr<ChatClient> client;
  if (predictor_name == "cfsm") {
    predictor = std::make_unique<synth::CfsmPredictor>(table);
  } else if (predictor_name == "table") {
    predictor = std::make_unique<synth::TableWalkPredictor>(table);
  } else if (predictor_name == "remote") {
    if (settings.checker.endpoint.empty() || settings.checker.model.empty()) {
      throw Error("remote predictor needs an endpoint and a model");
    }
    client = std::make_shared<RemoteChatClient>(settings.checker);
    predictor = std::make_unique<synth::RemotePredictor>(client);
  } else {
    throw Error("--predictor must be cfsm, table or remote");
  }

  std::vector<synth::EvalResult> results;
  for (int length = cfg.length_min; length <= cfg.length_max; ++length) {
    auto pool = synth::generate_pool(table, cfg, static_cast<std::size_t>(length));
    const synth::BalancedSample sample =
        synth::balanced_sample(table, std::move(pool), cfg, static_cast<std::size_t>(length));
    results.push_back(synth::evaluate_predictor(sample, table, static_cast<std::size_t>(length),
                                                *predictor));
    for (const auto& [state, missing] : sample.shortfall) {
      std::cerr << "note: " << fsm << " length " << length << ": terminal \"" << state
                << "\" short by " << missing << "\n";
    }
  }
  emit(synth::eval_results_csv(results), out_path);

  if (!plotdata_path.empty()) {
    harness::Series series;
    series.label = predictor_name;
    for (const auto& r : results) {
      series.x.push_back(static_cast<double>(r.length));
      series.y.push_back(r.overall_accuracy);
    }
    harness::write_file(plotdata_path, harness::series_to_plotdata({series}));
  }
  return 0;
}

// Writes the shipped fixture set for one builtin FSM: the machine document,
// the guard-question oracle rules, the full-grid bank and its oracle rules.
int run_synth_export(const std::string& fsm, const std::string& dir) {
  const synth::GroundTruthTable table = synth::builtin_table(fsm);
  const MachineDefinition machine = synth::to_machine(table);
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  harness::write_file((base / "machine.json").string(), serialize_machine(machine));
  harness::write_file((base / "rules.json").string(),
                      ScriptedChecker::rules_to_json(synth::oracle_rules(table)));
  harness::write_file(
      (base / "bank.json").string(),
      serialize_question_bank(synth::to_question_bank(machine), machine));
  harness::write_file((base / "bank-rules.json").string(),
                      ScriptedChecker::rules_to_json(synth::bank_oracle_rules(
                          table, machine, std::log(0.99), std::log(0.01))));

  CharacterStateModel model;
  model.character_id = fsm;
  model.relevance_question = "Does this action involve the tracked character?";
  model.activity_question = "Is the tracked character the active agent of this action?";
  model.machines = {machine};
  harness::write_file((base / "model.json").string(), serialize_model(model));
  std::cerr << "wrote machine.json, rules.json, bank.json, bank-rules.json, model.json to " << dir
            << "\n";
  return 0;
}

int run_bestk_cmd(const std::string& model_path, const std::string& episode_path,
                  const std::string& text_path, std::size_t sentences_per_step,
                  const std::string& reference_path, int k, const std::string& strategy_name,
                  double temperature, const std::string& judge_name,
                  const std::string& checker_spec, std::uint64_t seed,
                  const std::string& out_path, const std::string& plotdata_path,
                  const Settings& settings) {
  const CharacterStateModel model = parse_model(slurp(model_path));

  harness::Episode episode;
  if (!episode_path.empty()) {
    episode.actions = actions_from_jsonl(slurp(episode_path));
  } else if (!text_path.empty()) {
    episode.actions = harness::segment_scene(slurp(text_path), sentences_per_step).segments;
  } else {
    throw Error("bestk needs --episode or --text");
  }
  if (!reference_path.empty()) episode.reference = slurp(reference_path);

  const auto strategy_kind = harness::strategy_from(strategy_name);
  if (!strategy_kind) throw Error("unknown strategy \"" + strategy_name + "\"");
  const harness::ExplorationStrategy strategy{*strategy_kind, temperature};

  CheckerStack stack = make_checker(checker_spec, settings);

  std::unique_ptr<harness::Judge> judge;
  std::shared_ptr<ChatClient> judge_client;
  if (judge_name == "stub") {
    judge = std::make_unique<harness::StubJudge>();
  } else if (judge_name == "remote") {
    if (settings.checker.endpoint.empty() || settings.checker.model.empty()) {
      throw Error("remote judge needs an endpoint and a model");
    }
    judge_client = std::make_shared<RemoteChatClient>(settings.checker);
    judge = std::make_unique<harness::RemoteJudge>(judge_client, episode.reference);
  } else {
    throw Error("--judge must be stub or remote");
  }

  const harness::BestKResult result =
      harness::run_bestk(episode, model, strategy, k, *judge, *stack.head, seed);
  emit(harness::bestk_csv(std::string(to_string(strategy.kind)), {result}), out_path);

  if (!plotdata_path.empty()) {
    // nested prefixes: best(k') is the running maximum of the first k' samples
    harness::Series series;
    series.label = std::string(to_string(strategy.kind));
    double running = 0.0;
    bool any = false;
    for (int i = 0; i < result.k; ++i) {
      if (result.per_sample_scores[i]) {
        running = any ? std::max(running, *result.per_sample_scores[i])
                      : *result.per_sample_scores[i];
        any = true;
      }
      series.x.push_back(static_cast<double>(i + 1));
      series.y.push_back(any ? running : 0.0);
    }
    harness::write_file(plotdata_path, harness::series_to_plotdata({series}));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Codified finite-state machines: validation, execution, codification and "
               "synthetic benchmarking"};
  app.require_subcommand(1);

  Settings settings;
  std::string config_path;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  std::string cache_flag, endpoint_flag, model_flag, api_key_flag, prompts_flag;
  app.add_option("--config", config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed_flag, "master seed for every random stream");
  app.add_option("--cache-path", cache_flag, "cache store path for cached: checkers");
  app.add_option("--endpoint", endpoint_flag, "chat-completions endpoint (scheme://host[:port])");
  app.add_option("--model-name", model_flag, "remote model name");
  app.add_option("--api-key", api_key_flag, "remote API key");
  app.add_option("--prompts", prompts_flag, "prompt template directory (default: prompts)");

  // validate
  std::string validate_model_path;
  auto* validate = app.add_subcommand("validate", "validate a character model file");
  validate->add_option("model", validate_model_path, "model.json")->required();

  // run
  std::string run_model, run_trace_path, run_checker = "scripted:rules.json";
  std::string run_machine, run_initial, run_out;
  auto* run = app.add_subcommand("run", "deterministic CFSM execution over a trace");
  run->add_option("--model", run_model, "character model file")->required();
  run->add_option("--trace", run_trace_path, "JSONL action input")->required();
  run->add_option("--checker", run_checker, "scripted:<rules.json>|remote|cached:<spec>");
  run->add_option("--machine", run_machine, "run a single machine (engine trace schema)");
  run->add_option("--initial", run_initial, "initial state for --machine runs");
  run->add_option("--out", run_out, "output path (default stdout)");

  // ptrace
  std::string pt_model, pt_bank, pt_mode, pt_machine, pt_trace, pt_checker = "remote";
  std::string pt_grounding = "argmax", pt_initial, pt_out;
  auto* ptrace = app.add_subcommand("ptrace", "probabilistic CPFSM execution over a trace");
  ptrace->add_option("--model", pt_model, "character model file")->required();
  ptrace->add_option("--bank", pt_bank, "question bank file")->required();
  ptrace->add_option("--mode", pt_mode, "assert the bank mode: grid|sparse");
  ptrace->add_option("--machine", pt_machine, "machine id (default: first)");
  ptrace->add_option("--trace", pt_trace, "JSONL action input")->required();
  ptrace->add_option("--checker", pt_checker, "scripted:<rules.json>|remote|cached:<spec>");
  ptrace->add_option("--grounding", pt_grounding, "argmax|sample");
  ptrace->add_option("--initial", pt_initial, "initial state (default: Unactivated)");
  ptrace->add_option("--out", pt_out, "output path (default stdout)");

  // codify
  std::string cod_profile, cod_mode = "grid", cod_client, cod_out, cod_report;
  auto* codify = app.add_subcommand("codify", "profile -> machine/bank via an LLM client");
  codify->add_option("--profile", cod_profile, "profile JSON file")->required();
  codify->add_option("--mode", cod_mode, "grid|sparse");
  codify->add_option("--client", cod_client, "client config JSON (canned or remote)")->required();
  codify->add_option("--out", cod_out, "artifact output path (default stdout)");
  codify->add_option("--report", cod_report, "accounting report path (default stderr)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "synthetic benchmark protocol");
  synth_cmd->require_subcommand(1);
  std::string sg_fsm = "mario", sg_out;
  std::size_t sg_paths = 10000, sg_length = 5;
  auto* synth_gen = synth_cmd->add_subcommand("gen", "generate a random-policy trace pool");
  synth_gen->add_option("--fsm", sg_fsm, "mario|cod-enemy|westeros");
  synth_gen->add_option("--paths", sg_paths, "pool size");
  synth_gen->add_option("--length", sg_length, "actions per trace");
  synth_gen->add_option("--out", sg_out, "output path (default stdout)");

  std::string se_fsm = "mario", se_predictor = "cfsm", se_lengths = "1..10", se_out, se_plot;
  std::size_t se_per_terminal = 100, se_paths = 10000;
  auto* synth_eval = synth_cmd->add_subcommand("eval", "balanced evaluation across lengths");
  synth_eval->add_option("--fsm", se_fsm, "mario|cod-enemy|westeros");
  synth_eval->add_option("--predictor", se_predictor, "cfsm|table|remote");
  synth_eval->add_option("--lengths", se_lengths, "range, e.g. 1..10");
  synth_eval->add_option("--per-terminal", se_per_terminal, "balanced sample size per terminal");
  synth_eval->add_option("--paths", se_paths, "pool size per length");
  synth_eval->add_option("--out", se_out, "results CSV path (default stdout)");
  synth_eval->add_option("--plotdata", se_plot, "plot-data JSON path");

  std::string sx_fsm = "mario", sx_dir = "data/mario";
  auto* synth_export = synth_cmd->add_subcommand("export", "write fixture files for a builtin FSM");
  synth_export->add_option("--fsm", sx_fsm, "mario|cod-enemy|westeros");
  synth_export->add_option("--dir", sx_dir, "output directory");

  // bestk
  std::string bk_model, bk_episode, bk_text, bk_reference, bk_strategy = "sampled-dist";
  std::string bk_judge = "stub", bk_checker = "scripted:rules.json", bk_out, bk_plot;
  int bk_k = 7;
  double bk_temperature = 0.0;
  std::size_t bk_sentences = 1;
  auto* bestk = app.add_subcommand("bestk", "Best@K exploration over a pluggable judge");
  bestk->add_option("--model", bk_model, "character model file")->required();
  bestk->add_option("--episode", bk_episode, "JSONL action episode");
  bestk->add_option("--text", bk_text, "plain-text scene to segment into steps");
  bestk->add_option("--sentences-per-step", bk_sentences, "segmentation batch size for --text");
  bestk->add_option("--reference", bk_reference, "reference text file for NLI-style judges");
  bestk->add_option("--k", bk_k, "number of rollouts");
  bestk->add_option("--strategy", bk_strategy,
                    "deterministic|sampled-dist|random-dist|sampled-checker|gen-temp");
  bestk->add_option("--temperature", bk_temperature, "generator temperature (gen-temp strategy)");
  bestk->add_option("--judge", bk_judge, "stub|remote");
  bestk->add_option("--checker", bk_checker, "scripted:<rules.json>|remote|cached:<spec>");
  bestk->add_option("--out", bk_out, "CSV output (default stdout)");
  bestk->add_option("--plotdata", bk_plot, "plot-data JSON path (best over k prefixes)");

  CLI11_PARSE(app, argc, argv);

  try {
    // precedence: config file first, then environment, then explicit flags
    if (!config_path.empty()) settings.load_config_file(config_path);
    settings.apply_environment();
    if (!endpoint_flag.empty()) settings.checker.endpoint = endpoint_flag;
    if (!model_flag.empty()) settings.checker.model = model_flag;
    if (!api_key_flag.empty()) settings.checker.api_key = api_key_flag;
    if (!cache_flag.empty()) settings.cache_path = cache_flag;
    if (!prompts_flag.empty()) settings.prompts_dir = prompts_flag;
    seed_set = seed_opt->count() > 0;
    if (seed_set) settings.seed = seed_flag;

    if (*validate) return run_validate(validate_model_path);
    if (*run) {
      return run_run(run_model, run_trace_path, run_checker, run_machine, run_initial, run_out,
                     settings);
    }
    if (*ptrace) {
      return run_ptrace_cmd(pt_model, pt_bank, pt_mode, pt_machine, pt_trace, pt_checker,
                            pt_grounding, pt_initial, settings.seed, pt_out, settings);
    }
    if (*codify) {
      return run_codify(cod_profile, cod_mode, cod_client, cod_out, cod_report, settings);
    }
    if (*synth_cmd) {
      if (*synth_gen) return run_synth_gen(sg_fsm, sg_paths, sg_length, settings.seed, sg_out);
      if (*synth_eval) {
        return run_synth_eval(se_fsm, se_predictor, se_lengths, se_per_terminal, se_paths,
                              settings.seed, se_out, se_plot, settings);
      }
      if (*synth_export) return run_synth_export(sx_fsm, sx_dir);
    }
    if (*bestk) {
      return run_bestk_cmd(bk_model, bk_episode, bk_text, bk_sentences, bk_reference, bk_k,
                           bk_strategy, bk_temperature, bk_judge, bk_checker, settings.seed,
                           bk_out, bk_plot, settings);
    }
  } catch (const std::exception& e) {
    std::cerr << "cfsm: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

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

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cfsm/checker.hpp"
#include "cfsm/rng.hpp"
#include "support.hpp"

using namespace cfsm;

namespace {

std::filesystem::path temp_cache_path(const char* stem) {
  auto path = std::filesystem::temp_directory_path() /
              (std::string("cfsm_test_") + stem + "_" + std::to_string(::getpid()) + ".jsonl");
  std::filesystem::remove(path);
  return path;
}

}  // namespace

TEST_CASE("scripted rule table lookup answers the fire flower question") {
  std::vector<ScriptedRule> rules = {
      {"super mushroom", "super mushroom", false, Label::kTrue, kDefaultTrueLogprob},
      {"fire flower", "fire flower", false, Label::kTrue, kDefaultTrueLogprob},
      {"goomba", "goomba", false, Label::kTrue, kDefaultTrueLogprob},
  };
  ScriptedChecker checker(rules);
  const Verdict v = checker.binary_question("Mario got a fire flower",
                                            "Did the character obtain a fire flower?");
  CHECK(v.label == Label::kTrue);
  CHECK(v.true_logprob == doctest::Approx(std::log(0.95)).epsilon(1e-12));
  CHECK(v.source == VerdictSource::kScripted);
}

TEST_CASE("empty rule set answers false with the no-match default") {
  ScriptedChecker checker(std::vector<ScriptedRule>{});
  const Verdict v = checker.binary_question("anything", "any question?");
  CHECK(v.label == Label::kFalse);
  CHECK(v.true_logprob == doctest::Approx(std::log(0.05)).epsilon(1e-12));
}

TEST_CASE("first matching rule wins") {
  std::vector<ScriptedRule> rules = {
      {"flower", "", false, Label::kTrue, std::log(0.9)},
      {"flower", "", false, Label::kFalse, std::log(0.1)},
  };
  ScriptedChecker checker(rules);
  CHECK(checker.binary_question("a flower", "?").label == Label::kTrue);
}

TEST_CASE("matching is case-insensitive") {
  ScriptedChecker checker(std::vector<ScriptedRule>{{"Fire Flower", "", false, Label::kTrue, std::log(0.9)}});
  CHECK(checker.binary_question("GOT A FIRE FLOWER", "?").label == Label::kTrue);
}

TEST_CASE("anchored patterns respect token boundaries") {
  CHECK(pattern_matches("travel northeast", "travel north", false));
  CHECK_FALSE(pattern_matches("travel northeast", "travel north", true));
  CHECK(pattern_matches("travel north", "travel north", true));
  CHECK(pattern_matches("they travel north.", "travel north", true));
  CHECK_FALSE(pattern_matches("northeast", "east", true));
  CHECK(pattern_matches("go east now", "east", true));
}

TEST_CASE("a rule with no pattern at all is rejected") {
  CHECK_THROWS_AS(ScriptedChecker(std::vector<ScriptedRule>{{"", "", false, Label::kTrue, std::log(0.9)}}), SchemaError);
}

TEST_CASE("incoherent rule files are rejected") {
  CHECK_THROWS_AS(ScriptedChecker(std::vector<ScriptedRule>{{"x", "", false, Label::kTrue, std::log(0.1)}}), SchemaError);
  CHECK_THROWS_AS(ScriptedChecker(std::vector<ScriptedRule>{{"x", "", false, Label::kFalse, std::log(0.9)}}), SchemaError);
  CHECK_THROWS_AS(ScriptedChecker(std::vector<ScriptedRule>{{"x", "", false, Label::kTrue, 0.5}}), SchemaError);
}

TEST_CASE("every scripted output is label/logit coherent on random tables") {
  Rng rng(77);
  for (int table = 0; table < 100; ++table) {
    ScriptedChecker checker(test::random_rule_table(rng));
    for (int q = 0; q < 20; ++q) {
      const SceneAction action = test::random_action(rng);
      const Verdict v = checker.binary_question(
          action.action_text, "does the event mention " + test::question_token(rng.next_below(10)) + "?");
      CHECK(verdict_coherent(v));
    }
  }
}

TEST_CASE("scripted rule files round-trip through JSON") {
  Rng rng(78);
  const auto rules = test::random_rule_table(rng);
  ScriptedChecker a(rules);
  ScriptedChecker b = ScriptedChecker::from_json(ScriptedChecker::rules_to_json(rules));
  for (int q = 0; q < 50; ++q) {
    const SceneAction action = test::random_action(rng);
    const std::string question =
        "does the event mention " + test::question_token(rng.next_below(10)) + "?";
    const Verdict va = a.binary_question(action.action_text, question);
    const Verdict vb = b.binary_question(action.action_text, question);
    CHECK(va.label == vb.label);
    CHECK(va.true_logprob == vb.true_logprob);
  }
}

TEST_CASE("cache returns the stored verdict with zero inner calls") {
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"flower", "", false, Label::kTrue, std::log(0.9)}});
  CountingChecker counted(scripted);
  CacheStore store(temp_cache_path("basic"));
  CachedChecker cached(counted, store);

  const Verdict first = cached.binary_question("a flower", "did it bloom?");
  CHECK(first.label == Label::kTrue);
  CHECK(first.source == VerdictSource::kScripted);
  CHECK(counted.calls() == 1);

  const Verdict second = cached.binary_question("a flower", "did it bloom?");
  CHECK(second.label == Label::kTrue);
  CHECK(second.source == VerdictSource::kCache);
  CHECK(second.true_logprob == first.true_logprob);
  CHECK(counted.calls() == 1);

  // one character of difference is a different key
  cached.binary_question("a flower", "did it bloom!");
  CHECK(counted.calls() == 2);
  std::filesystem::remove(store.path());
}

TEST_CASE("cold store: 1000 distinct calls then a full replay cost 1000 inner calls") {
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"t", "", false, Label::kTrue, std::log(0.9)}});
  CountingChecker counted(scripted);
  CacheStore store(temp_cache_path("bulk"));
  CachedChecker cached(counted, store);

  for (int round = 0; round < 2; ++round) {
    for (int i = 0; i < 1000; ++i) {
      cached.binary_question("t event " + std::to_string(i), "q" + std::to_string(i) + "?");
    }
  }
  CHECK(counted.calls() == 1000);
  CHECK(store.size() == 1000);
  std::filesystem::remove(store.path());
}

TEST_CASE("cache persists across store instances") {
  const auto path = temp_cache_path("persist");
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"flower", "", false, Label::kTrue, std::log(0.9)}});
  {
    CountingChecker counted(scripted);
    CacheStore store(path);
    CachedChecker cached(counted, store);
    cached.binary_question("a flower", "q?");
    CHECK(counted.calls() == 1);
  }
  {
    CountingChecker counted(scripted);
    CacheStore store(path);
    CachedChecker cached(counted, store);
    const Verdict v = cached.binary_question("a flower", "q?");
    CHECK(v.source == VerdictSource::kCache);
    CHECK(counted.calls() == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("an unwritable store degrades to pass-through") {
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"flower", "", false, Label::kTrue, std::log(0.9)}});
  CountingChecker counted(scripted);
  CacheStore store("/nonexistent-dir/cache.jsonl");
  CachedChecker cached(counted, store);
  const Verdict v = cached.binary_question("a flower", "q?");
  CHECK(v.label == Label::kTrue);
  // in-memory memoization still works within the process
  cached.binary_question("a flower", "q?");
  CHECK(counted.calls() == 1);
}

TEST_CASE("cache keys react to every field and to the backend id") {
  const Query q{"scene", "action", "question"};
  const std::string base = cache_key("scripted", q);
  CHECK(base == cache_key("scripted", q));
  CHECK(base != cache_key("remote/gpt", q));
  CHECK(base != cache_key("scripted", Query{"scene2", "action", "question"}));
  CHECK(base != cache_key("scripted", Query{"scene", "action2", "question"}));
  CHECK(base != cache_key("scripted", Query{"scene", "action", "question2"}));
  // length-prefixing keeps field boundaries unambiguous
  CHECK(cache_key("s", Query{"ab", "c", ""}) != cache_key("s", Query{"a", "bc", ""}));
  CHECK(base.size() == 64);
}

TEST_CASE("sampled checker with certain inner verdict is constant") {
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"x", "", false, Label::kTrue, 0.0}});  // log 1.0
  SampledChecker sampled(scripted, Rng(123));
  for (int i = 0; i < 200; ++i) {
    CHECK(sampled.binary_question("x", "?").label == Label::kTrue);
  }
}

TEST_CASE("sampled checker frequency tracks the inner probability") {
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"x", "", false, Label::kUnknown, std::log(0.5)}});
  // unknown keeps true_logprob = log 0.5, so sampling should be a fair coin
  SampledChecker sampled(scripted, Rng(42));
  int trues = 0;
  for (int i = 0; i < 10000; ++i) {
    if (sampled.binary_question("x", "?").label == Label::kTrue) ++trues;
  }
  const double freq = trues / 10000.0;
  CHECK(freq >= 0.48);
  CHECK(freq <= 0.52);
}

TEST_CASE("sampled checker replays identically for a fixed seed") {
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"x", "", false, Label::kUnknown, std::log(0.5)}});
  std::vector<Label> first, second;
  {
    SampledChecker sampled(scripted, Rng(7));
    for (int i = 0; i < 100; ++i) first.push_back(sampled.binary_question("x", "?").label);
  }
  {
    SampledChecker sampled(scripted, Rng(7));
    for (int i = 0; i < 100; ++i) second.push_back(sampled.binary_question("x", "?").label);
  }
  CHECK(first == second);
}

TEST_CASE("sampled labels carry the configured logits") {
  ScriptedChecker scripted(std::vector<ScriptedRule>{{"x", "", false, Label::kUnknown, std::log(0.5)}});
  SampledChecker sampled(scripted, Rng(11));
  for (int i = 0; i < 50; ++i) {
    const Verdict v = sampled.binary_question("x", "?");
    if (v.label == Label::kTrue) {
      CHECK(v.true_logprob == doctest::Approx(std::log(0.95)).epsilon(1e-12));
    } else {
      CHECK(v.true_logprob == doctest::Approx(std::log(0.05)).epsilon(1e-12));
    }
    CHECK(verdict_coherent(v));
  }
}

TEST_CASE("verdict coherence boundary") {
  CHECK(verdict_coherent({Label::kTrue, std::log(0.5), VerdictSource::kScripted}));
  CHECK(verdict_coherent({Label::kFalse, std::log(0.5), VerdictSource::kScripted}));
  CHECK_FALSE(verdict_coherent({Label::kTrue, std::log(0.4), VerdictSource::kScripted}));
  CHECK_FALSE(verdict_coherent({Label::kFalse, std::log(0.6), VerdictSource::kScripted}));
  CHECK_FALSE(verdict_coherent({Label::kTrue, 0.1, VerdictSource::kScripted}));
  CHECK(verdict_coherent({Label::kUnknown, std::log(0.99), VerdictSource::kScripted}));
}

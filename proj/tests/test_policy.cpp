// Copyright 2026 The sroskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "glob_oracle.hpp"
#include "sros/policy.hpp"

using sros::Errc;
using sros::Error;
using namespace sros::policy;
using sros::names::NamespacePath;
using sros::names::parse_path;

namespace {

bool compiles(const std::string& src) {
  try {
    compile_pattern(src);
    return true;
  } catch (const Error& e) {
    REQUIRE(e.code() == Errc::pattern_syntax);
    return false;
  }
}

bool matches(const std::string& pattern, const std::string& path) {
  return compile_pattern(pattern).matches(parse_path(path));
}

PolicyRule rule(Effect e, Action a, const std::string& pattern) {
  return PolicyRule{e, a, compile_pattern(pattern)};
}

}  // namespace

TEST_CASE("star stays within one segment") {
  CHECK(matches("/a/*", "/a/b"));
  CHECK(matches("/a/*", "/a/b_long_1"));
  CHECK_FALSE(matches("/a/*", "/a/b/c"));
  CHECK_FALSE(matches("/a/*", "/a"));
}

TEST_CASE("double star spans segments and may match nothing") {
  CHECK(matches("/a/**", "/a"));
  CHECK(matches("/a/**", "/a/b"));
  CHECK(matches("/a/**", "/a/b/c"));
  CHECK_FALSE(matches("/a/**", "/ab"));
  CHECK_FALSE(matches("/a/**", "/b/a"));
  // cross-check the whole language at depth <= 3 against the oracle
  for (const auto& path : glob_oracle::enumerate_paths({"a", "b", "c"}, 3)) {
    CHECK(compile_pattern("/a/**").matches_text(path) ==
          glob_oracle::ref_match("/a/**", path));
  }
}

TEST_CASE("universal pattern") {
  for (const auto& path : glob_oracle::enumerate_paths({"a", "b", "ab", "x1"}, 3)) {
    CHECK(compile_pattern("/**").matches_text(path));
  }
}

TEST_CASE("question mark is exactly one character") {
  CHECK(matches("/a/?x", "/a/bx"));
  CHECK_FALSE(matches("/a/?x", "/a/x"));
  CHECK_FALSE(matches("/a/?x", "/a/bbx"));
}

TEST_CASE("prefix glob inside a segment") {
  CHECK(matches("/tele*/cmd", "/teleop/cmd"));
  CHECK(matches("/tele*/cmd", "/tele/cmd"));
  CHECK_FALSE(matches("/tele*/cmd", "/telop/cmd"));
  CHECK_FALSE(matches("/tele*/cmd", "/teleop/sub/cmd"));
}

TEST_CASE("alternation") {
  auto p = compile_pattern("/a/{b,c}/d");
  std::set<std::string> hits;
  for (const auto& path : glob_oracle::enumerate_paths({"a", "b", "c", "d"}, 4)) {
    if (p.matches_text(path)) hits.insert(path);
    CHECK(p.matches_text(path) == glob_oracle::ref_match("/a/{b,c}/d", path));
  }
  CHECK(hits == std::set<std::string>{"/a/b/d", "/a/c/d"});
}

TEST_CASE("character classes") {
  CHECK(matches("/a/[bc]", "/a/b"));
  CHECK(matches("/a/[bc]", "/a/c"));
  CHECK_FALSE(matches("/a/[bc]", "/a/d"));
  CHECK(matches("/a/[a-c]x", "/a/bx"));
  CHECK_FALSE(matches("/a/[^bc]", "/a/b"));
  CHECK(matches("/a/[^bc]", "/a/z"));
}

TEST_CASE("pattern syntax errors") {
  CHECK_FALSE(compiles(""));
  CHECK_FALSE(compiles("/a[bc"));
  CHECK_FALSE(compiles("/a[]"));
  CHECK_FALSE(compiles("/a[b-a]"));
  CHECK_FALSE(compiles("/a{b,c"));
  CHECK_FALSE(compiles("/a{}"));
  CHECK_FALSE(compiles("/a{b,}"));
  CHECK_FALSE(compiles("/a{,b}"));
  CHECK_FALSE(compiles("/a b"));
  CHECK_FALSE(compiles("/a.b"));
  CHECK_FALSE(compiles("/a,b"));
  CHECK_FALSE(compiles("/a}b"));
  CHECK_FALSE(compiles("/a]b"));
  // nesting depth 4 is allowed, 5 is not
  CHECK(compiles("/{a,{b,{c,{d,e}}}}"));
  CHECK_FALSE(compiles("/{a,{b,{c,{d,{e,f}}}}}"));
}

TEST_CASE("compiled matcher agrees with the reference matcher") {
  glob_oracle::PatternGenerator gen{42};
  const auto paths = glob_oracle::enumerate_paths({"a", "b", "ab", "x1"}, 3);
  int checked = 0;
  for (int i = 0; i < 120; ++i) {
    const std::string src = gen.next();
    GlobPattern compiled;
    try {
      compiled = compile_pattern(src);
    } catch (const Error&) {
      continue;  // generator should not produce these; skip defensively
    }
    for (const auto& path : paths) {
      bool got = compiled.matches_text(path);
      bool want = glob_oracle::ref_match(src, path);
      if (got != want) {
        CAPTURE(src, path, got, want);
        REQUIRE(got == want);
      }
      ++checked;
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("subtree revocation") {
  PolicyProfile profile{parse_path("/node"),
                        {rule(Effect::allow, Action::topic_publish, "/a/**"),
                         rule(Effect::deny, Action::topic_publish, "/a/secret/**")}};
  auto decide = [&](const std::string& p) {
    return evaluate(profile, Action::topic_publish, parse_path(p));
  };
  CHECK(decide("/a/x").verdict == Effect::allow);
  CHECK(decide("/a").verdict == Effect::allow);
  CHECK(decide("/a/secret/x").verdict == Effect::deny);
  CHECK(decide("/a/secret").verdict == Effect::deny);
  CHECK(decide("/b").verdict == Effect::deny);
  CHECK(decide("/b").default_used);
  CHECK_FALSE(decide("/a/secret/x").default_used);
  REQUIRE(decide("/a/secret/x").matched.has_value());
  CHECK(decide("/a/secret/x").matched->text() == "deny topic_publish /a/secret/**");
}

TEST_CASE("empty profile denies everything by default") {
  PolicyProfile profile{parse_path("/node"), {}};
  for (Action a : kAllActions) {
    auto d = evaluate(profile, a, parse_path("/anything"));
    CHECK(d.verdict == Effect::deny);
    CHECK(d.default_used);
    CHECK_FALSE(d.matched.has_value());
  }
}

TEST_CASE("deny overrides allow regardless of order") {
  PolicyProfile profile{parse_path("/node"),
                        {rule(Effect::deny, Action::param_write, "/**"),
                         rule(Effect::allow, Action::param_write, "/p")}};
  auto d = evaluate(profile, Action::param_write, parse_path("/p"));
  CHECK(d.verdict == Effect::deny);
  // the same profile constructed in the opposite order decides identically
  PolicyProfile flipped{parse_path("/node"),
                        {rule(Effect::allow, Action::param_write, "/p"),
                         rule(Effect::deny, Action::param_write, "/**")}};
  CHECK(evaluate(flipped, Action::param_write, parse_path("/p")).verdict == Effect::deny);
}

TEST_CASE("actions are independent") {
  PolicyProfile profile{parse_path("/node"),
                        {rule(Effect::allow, Action::topic_publish, "/t")}};
  CHECK(evaluate(profile, Action::topic_publish, parse_path("/t")).verdict == Effect::allow);
  CHECK(evaluate(profile, Action::topic_subscribe, parse_path("/t")).verdict == Effect::deny);
}

TEST_CASE("deny dominance properties") {
  std::mt19937 rng{99};
  glob_oracle::PatternGenerator gen{7};
  const auto paths = glob_oracle::enumerate_paths({"a", "b", "ab", "x1"}, 3);
  std::uniform_int_distribution<int> action_d(1, 7), size_d(0, 5),
      path_d(0, static_cast<int>(paths.size()) - 1), coin(0, 1);

  auto random_profile = [&] {
    std::vector<PolicyRule> rules;
    int n = size_d(rng);
    for (int i = 0; i < n; ++i) {
      std::string src = gen.next();
      rules.push_back(rule(coin(rng) ? Effect::allow : Effect::deny,
                           static_cast<Action>(action_d(rng)), src));
    }
    return PolicyProfile{parse_path("/n"), rules};
  };

  for (int i = 0; i < 300; ++i) {
    auto base = random_profile();
    auto action = static_cast<Action>(action_d(rng));
    auto query = parse_path(paths[path_d(rng)]);
    auto extra_src = gen.next();

    // (a) adding a deny that matches the query forces deny
    {
      auto extra = rule(Effect::deny, action, extra_src);
      if (extra.scope.matches(query)) {
        auto rules = base.rules();
        rules.push_back(extra);
        PolicyProfile bigger{base.subject(), rules};
        CHECK(evaluate(bigger, action, query).verdict == Effect::deny);
      }
    }
    // (b) adding an allow cannot flip a decision already denied by a deny rule
    {
      auto before = evaluate(base, action, query);
      bool deny_rule_matched = before.verdict == Effect::deny && !before.default_used;
      if (deny_rule_matched) {
        auto rules = base.rules();
        rules.push_back(rule(Effect::allow, action, extra_src));
        PolicyProfile bigger{base.subject(), rules};
        CHECK(evaluate(bigger, action, query).verdict == Effect::deny);
      }
    }
  }
}

TEST_CASE("serialization renders the canonical form") {
  PolicyProfile p{parse_path("/talker"),
                  {rule(Effect::allow, Action::topic_publish, "/chatter")}};
  CHECK(serialize_profile(p) == "profile /talker\nallow topic_publish /chatter\n");
}

TEST_CASE("serialization orders deny first, then action, then pattern") {
  PolicyProfile p{parse_path("/n"),
                  {rule(Effect::allow, Action::topic_publish, "/b"),
                   rule(Effect::allow, Action::topic_publish, "/a"),
                   rule(Effect::deny, Action::param_write, "/z"),
                   rule(Effect::allow, Action::topic_subscribe, "/a")}};
  CHECK(serialize_profile(p) ==
        "profile /n\n"
        "deny param_write /z\n"
        "allow topic_publish /a\n"
        "allow topic_publish /b\n"
        "allow topic_subscribe /a\n");
}

TEST_CASE("duplicate rules collapse") {
  PolicyProfile p{parse_path("/n"),
                  {rule(Effect::allow, Action::param_read, "/a"),
                   rule(Effect::allow, Action::param_read, "/a")}};
  CHECK(p.rules().size() == 1);
}

TEST_CASE("parse accepts comments and blank lines") {
  auto p = parse_profile(
      "# a demo profile\n"
      "\n"
      "profile /talker\n"
      "  allow topic_publish /chatter\n"
      "# trailing comment\n");
  CHECK(p.subject().str() == "/talker");
  REQUIRE(p.rules().size() == 1);
  CHECK(p.rules()[0].text() == "allow topic_publish /chatter");
}

TEST_CASE("profile parse errors") {
  auto expect_syntax = [](const std::string& text) {
    try {
      parse_profile(text);
      FAIL("expected ProfileSyntax for: " << text);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::profile_syntax);
    }
  };
  expect_syntax("profile /x\nallow bogus /a\n");
  expect_syntax("allow topic_publish /a\n");                 // missing header
  expect_syntax("");                                         // empty
  expect_syntax("profile /x\npermit topic_publish /a\n");    // unknown effect
  expect_syntax("profile /x\nallow topic_publish /a[\n");    // bad pattern
  expect_syntax("profile /x\nallow topic_publish\n");        // missing pattern
  expect_syntax("profile /x\nprofile /y\n");                 // duplicate header
  expect_syntax("profile not_a_path\n");                     // bad subject
}

TEST_CASE("round-trip preserves evaluation") {
  std::mt19937 rng{123};
  glob_oracle::PatternGenerator gen{5};
  const auto paths = glob_oracle::enumerate_paths({"a", "b", "ab", "x1"}, 3);
  std::uniform_int_distribution<int> action_d(1, 7), size_d(0, 6), coin(0, 1);
  for (int i = 0; i < 50; ++i) {
    std::vector<PolicyRule> rules;
    for (int n = size_d(rng); n > 0; --n) {
      rules.push_back(rule(coin(rng) ? Effect::allow : Effect::deny,
                           static_cast<Action>(action_d(rng)), gen.next()));
    }
    PolicyProfile original{parse_path("/n"), rules};
    PolicyProfile reparsed = parse_profile(serialize_profile(original));
    CHECK(serialize_profile(reparsed) == serialize_profile(original));
    for (const auto& path : paths) {
      for (Action a : kAllActions) {
        auto q = parse_path(path);
        CHECK(evaluate(original, a, q).verdict == evaluate(reparsed, a, q).verdict);
      }
    }
  }
}

TEST_CASE("policy engine seam") {
  auto deny_overrides = make_policy_engine("default");
  auto off = make_policy_engine("off");
  PolicyProfile empty{parse_path("/n"), {}};
  CHECK(deny_overrides->evaluate(empty, Action::topic_publish, parse_path("/t")).verdict ==
        Effect::deny);
  CHECK(off->evaluate(empty, Action::topic_publish, parse_path("/t")).verdict ==
        Effect::allow);
  CHECK_THROWS_AS(make_policy_engine("bogus"), Error);
}

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

#ifndef SROS_POLICY_HPP_
#define SROS_POLICY_HPP_

#include <algorithm>
#include <array>
#include <bitset>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sros/error.hpp"
#include "sros/names.hpp"

namespace sros::policy {

// ---------------------------------------------------------------------------
// Actions

/// Closed set of graph actions a rule may govern. The numeric value doubles
/// as the sub-arc of the action's certificate policy OID, so it is frozen.
enum class Action : int {
  topic_publish = 1,
  topic_subscribe = 2,
  service_advertise = 3,
  service_call = 4,
  param_read = 5,
  param_write = 6,
  graph_execute = 7,
};

inline constexpr std::array<Action, 7> kAllActions = {
    Action::topic_publish,   Action::topic_subscribe, Action::service_advertise,
    Action::service_call,    Action::param_read,      Action::param_write,
    Action::graph_execute,
};

inline const char* action_name(Action a) {
  switch (a) {
    case Action::topic_publish: return "topic_publish";
    case Action::topic_subscribe: return "topic_subscribe";
    case Action::service_advertise: return "service_advertise";
    case Action::service_call: return "service_call";
    case Action::param_read: return "param_read";
    case Action::param_write: return "param_write";
    case Action::graph_execute: return "graph_execute";
  }
  return "graph_execute";
}

inline std::optional<Action> action_from_name(std::string_view name) {
  for (Action a : kAllActions) {
    if (name == action_name(a)) return a;
  }
  return std::nullopt;
}

inline int action_oid_index(Action a) { return static_cast<int>(a); }

// ---------------------------------------------------------------------------
// Glob patterns
//
// AppArmor-style globbing over canonical path text:
//   *       zero or more characters within one segment (never matches `/`)
//   **      zero or more characters across segments
//   ?       exactly one non-`/` character
//   [abc]   one character from the class; [^abc] one name character not in it
//   [a-f]   ranges inside classes
//   {a,b}   alternation of pattern fragments, nesting up to depth 4
//
// A `/**` unit may also match nothing at all, so `/a/**` matches `/a` itself
// as well as everything below it. This follows the globbing used for policy
// scoping and regularly surprises people used to shell globs; see README.
//
// Patterns compile to a small NFA that is simulated breadth-first, so
// matching is linear in the path length with no backtracking blowup.

namespace glob_detail {

using CharSet = std::bitset<128>;

inline CharSet single(char c) {
  CharSet s;
  s.set(static_cast<unsigned char>(c));
  return s;
}

inline CharSet any_char() {
  CharSet s;
  s.set();
  return s;
}

inline CharSet non_slash() {
  CharSet s;
  s.set();
  s.reset(static_cast<unsigned char>('/'));
  return s;
}

struct Element;
using Sequence = std::vector<Element>;

struct Element {
  enum class Kind { literal, question, star, dstar, slash_dstar, char_class, alternation };
  Kind kind = Kind::literal;
  char literal = 0;
  CharSet cls;                      // char_class
  std::vector<Sequence> branches;   // alternation

  static Element make(Kind k, char lit = 0) {
    Element e;
    e.kind = k;
    e.literal = lit;
    return e;
  }
};

inline constexpr int kMaxAlternationDepth = 4;

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Sequence parse() {
    if (src_.empty()) fail("empty pattern");
    Sequence seq = parse_sequence(0, false);
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return seq;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    raise(Errc::pattern_syntax, why + " in pattern '" + std::string(src_) + "'");
  }

  bool at_end() const { return pos_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  Sequence parse_sequence(int alt_depth, bool in_alternation) {
    Sequence seq;
    while (!at_end()) {
      char c = peek();
      if (in_alternation && (c == ',' || c == '}')) break;
      switch (c) {
        case '/':
          if (peek(1) == '*' && peek(2) == '*') {
            seq.push_back(Element::make(Element::Kind::slash_dstar));
            pos_ += 3;
          } else {
            seq.push_back(Element::make(Element::Kind::literal, '/'));
            ++pos_;
          }
          break;
        case '*':
          if (peek(1) == '*') {
            seq.push_back(Element::make(Element::Kind::dstar));
            pos_ += 2;
          } else {
            seq.push_back(Element::make(Element::Kind::star));
            ++pos_;
          }
          break;
        case '?':
          seq.push_back(Element::make(Element::Kind::question));
          ++pos_;
          break;
        case '[':
          seq.push_back(parse_class());
          break;
        case '{':
          seq.push_back(parse_alternation(alt_depth + 1));
          break;
        case ',':
        case '}':
        case ']':
          fail(std::string("character '") + c + "' outside its construct");
        default:
          if (!names::is_name_char(c)) fail(std::string("illegal character '") + c + "'");
          seq.push_back(Element::make(Element::Kind::literal, c));
          ++pos_;
      }
    }
    return seq;
  }

  Element parse_class() {
    ++pos_;  // consume '['
    Element el;
    el.kind = Element::Kind::char_class;
    bool negated = false;
    if (peek() == '^') {
      negated = true;
      ++pos_;
    }
    CharSet members;
    bool any = false;
    while (!at_end() && peek() != ']') {
      char lo = peek();
      if (!names::is_name_char(lo)) fail(std::string("illegal class character '") + lo + "'");
      ++pos_;
      char hi = lo;
      if (peek() == '-' && peek(1) != ']' && peek(1) != '\0') {
        ++pos_;
        hi = peek();
        if (!names::is_name_char(hi)) fail(std::string("illegal class character '") + hi + "'");
        if (hi < lo) fail("inverted class range");
        ++pos_;
      }
      for (char c = lo; c <= hi; ++c) members.set(static_cast<unsigned char>(c));
      any = true;
    }
    if (at_end()) fail("unclosed character class");
    ++pos_;  // consume ']'
    if (!any) fail("empty character class");
    if (negated) {
      // Complement within the name alphabet; a negated class never matches `/`.
      CharSet alphabet;
      for (int c = 0; c < 128; ++c) {
        if (names::is_name_char(static_cast<char>(c))) alphabet.set(c);
      }
      el.cls = alphabet & ~members;
    } else {
      el.cls = members;
    }
    return el;
  }

  Element parse_alternation(int depth) {
    if (depth > kMaxAlternationDepth) fail("alternation nested deeper than 4");
    ++pos_;  // consume '{'
    Element el;
    el.kind = Element::Kind::alternation;
    while (true) {
      Sequence branch = parse_sequence(depth, true);
      if (branch.empty()) fail("empty alternation branch");
      el.branches.push_back(std::move(branch));
      if (at_end()) fail("unclosed alternation");
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      ++pos_;  // consume '}'
      break;
    }
    return el;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

/// Thompson-style NFA. States carry character-set edges plus epsilon edges;
/// simulation keeps a frontier set, so worst case is O(path * states).
struct Nfa {
  struct State {
    std::vector<std::pair<CharSet, int>> edges;
    std::vector<int> eps;
  };

  std::vector<State> states;
  int start = 0;
  int accept = 0;

  int add_state() {
    states.emplace_back();
    return static_cast<int>(states.size()) - 1;
  }

  static Nfa build(const Sequence& seq) {
    Nfa nfa;
    int entry = nfa.add_state();
    int exit = nfa.build_sequence(seq, entry);
    nfa.start = entry;
    nfa.accept = exit;
    return nfa;
  }

  bool matches(std::string_view text) const {
    std::vector<char> current(states.size(), 0), next(states.size(), 0);
    std::vector<int> stack;
    auto add_closure = [&](std::vector<char>& set, int s) {
      if (set[s]) return;
      set[s] = 1;
      stack.push_back(s);
      while (!stack.empty()) {
        int t = stack.back();
        stack.pop_back();
        for (int e : states[t].eps) {
          if (!set[e]) {
            set[e] = 1;
            stack.push_back(e);
          }
        }
      }
    };
    add_closure(current, start);
    for (char raw : text) {
      const auto c = static_cast<unsigned char>(raw);
      if (c >= 128) return false;
      std::fill(next.begin(), next.end(), 0);
      bool alive = false;
      for (int s = 0; s < static_cast<int>(states.size()); ++s) {
        if (!current[s]) continue;
        for (const auto& [cls, to] : states[s].edges) {
          if (cls.test(c)) {
            add_closure(next, to);
            alive = true;
          }
        }
      }
      if (!alive) return false;
      current.swap(next);
    }
    return current[accept] != 0;
  }

 private:
  int build_sequence(const Sequence& seq, int entry) {
    int cur = entry;
    for (const auto& el : seq) cur = build_element(el, cur);
    return cur;
  }

  int build_element(const Element& el, int entry) {
    switch (el.kind) {
      case Element::Kind::literal: {
        int out = add_state();
        states[entry].edges.emplace_back(single(el.literal), out);
        return out;
      }
      case Element::Kind::question: {
        int out = add_state();
        states[entry].edges.emplace_back(non_slash(), out);
        return out;
      }
      case Element::Kind::star: {
        states[entry].edges.emplace_back(non_slash(), entry);
        return entry;
      }
      case Element::Kind::dstar: {
        states[entry].edges.emplace_back(any_char(), entry);
        return entry;
      }
      case Element::Kind::slash_dstar: {
        // (empty | '/' followed by anything): `/a/**` also matches `/a`.
        int loop = add_state();
        int out = add_state();
        states[entry].edges.emplace_back(single('/'), loop);
        states[loop].edges.emplace_back(any_char(), loop);
        states[loop].eps.push_back(out);
        states[entry].eps.push_back(out);
        return out;
      }
      case Element::Kind::char_class: {
        int out = add_state();
        states[entry].edges.emplace_back(el.cls, out);
        return out;
      }
      case Element::Kind::alternation: {
        int out = add_state();
        for (const auto& branch : el.branches) {
          int b_entry = add_state();
          states[entry].eps.push_back(b_entry);
          int b_exit = build_sequence(branch, b_entry);
          states[b_exit].eps.push_back(out);
        }
        return out;
      }
    }
    return entry;
  }
};

}  // namespace glob_detail

/// Compiled namespace glob. Compilation is a pure function of the source
/// text; compiled patterns are immutable and cheap to copy and share.
class GlobPattern {
 public:
  GlobPattern() = default;

  static GlobPattern compile(std::string source) {
    glob_detail::Parser parser{source};
    auto nfa = std::make_shared<const glob_detail::Nfa>(
        glob_detail::Nfa::build(parser.parse()));
    GlobPattern p;
    p.source_ = std::move(source);
    p.nfa_ = std::move(nfa);
    return p;
  }

  const std::string& source() const { return source_; }

  bool matches_text(std::string_view canonical_path_text) const {
    if (!nfa_) return false;
    return nfa_->matches(canonical_path_text);
  }

  bool matches(const names::NamespacePath& path) const {
    return matches_text(path.str());
  }

  friend bool operator==(const GlobPattern& a, const GlobPattern& b) {
    return a.source_ == b.source_;
  }

 private:
  std::string source_;
  std::shared_ptr<const glob_detail::Nfa> nfa_;
};

inline GlobPattern compile_pattern(std::string source) {
  return GlobPattern::compile(std::move(source));
}

inline bool match(const GlobPattern& pattern, const names::NamespacePath& path) {
  return pattern.matches(path);
}

// ---------------------------------------------------------------------------
// Rules and profiles

enum class Effect { deny = 0, allow = 1 };  // deny sorts first

inline const char* effect_name(Effect e) { return e == Effect::allow ? "allow" : "deny"; }

struct PolicyRule {
  Effect effect = Effect::deny;
  Action action = Action::graph_execute;
  GlobPattern scope;

  /// Canonical text form, e.g. `allow topic_publish /chatter`.
  std::string text() const {
    return std::string(effect_name(effect)) + " " + action_name(action) + " " +
           scope.source();
  }
};

/// Outcome of one policy query. `default_used` is set iff no rule matched,
/// in which case the verdict is always deny.
struct Decision {
  Effect verdict = Effect::deny;
  std::optional<PolicyRule> matched;
  bool default_used = false;
};

/// A named set of rules for one node identity. Rules are normalized on
/// construction (deny first, then action, then pattern source; exact
/// duplicates dropped), which makes serialization deterministic and lets
/// evaluation resolve ties by simple scan order.
class PolicyProfile {
 public:
  PolicyProfile() = default;

  PolicyProfile(names::NamespacePath subject, std::vector<PolicyRule> rules)
      : subject_(std::move(subject)), rules_(std::move(rules)) {
    normalize();
  }

  const names::NamespacePath& subject() const { return subject_; }
  const std::vector<PolicyRule>& rules() const { return rules_; }
  bool empty() const { return rules_.empty(); }

 private:
  static std::tuple<int, int, const std::string&> key(const PolicyRule& r) {
    return {static_cast<int>(r.effect), action_oid_index(r.action), r.scope.source()};
  }

  void normalize() {
    std::stable_sort(rules_.begin(), rules_.end(),
                     [](const PolicyRule& a, const PolicyRule& b) { return key(a) < key(b); });
    rules_.erase(std::unique(rules_.begin(), rules_.end(),
                             [](const PolicyRule& a, const PolicyRule& b) {
                               return key(a) == key(b);
                             }),
                 rules_.end());
  }

  names::NamespacePath subject_;
  std::vector<PolicyRule> rules_;
};

/// Deny-overrides, default-deny evaluation: any matching deny rule defeats
/// every allow; with no match at all the decision is deny with
/// `default_used` set. Because normalized order puts denies first, the
/// first matching rule in scan order is the decision.
inline Decision evaluate(const PolicyProfile& profile, Action action,
                         const names::NamespacePath& path) {
  const std::string text = path.str();
  for (const auto& rule : profile.rules()) {
    if (rule.action != action) continue;
    if (rule.scope.matches_text(text)) {
      return Decision{rule.effect, rule, false};
    }
  }
  return Decision{Effect::deny, std::nullopt, true};
}

// ---------------------------------------------------------------------------
// Profile text format
//
//   profile /talker
//   allow topic_publish /chatter
//   deny topic_publish /secret/**
//
// `#` comments and blank lines are ignored on parse.

inline std::string serialize_profile(const PolicyProfile& profile) {
  std::string out = "profile " + profile.subject().str() + "\n";
  for (const auto& rule : profile.rules()) {
    out += rule.text();
    out += '\n';
  }
  return out;
}

namespace profile_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

/// Parses one `allow <action> <pattern>` / `deny <action> <pattern>` line.
inline PolicyRule parse_rule_line(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string effect_word, action_word, pattern_word, extra;
  in >> effect_word >> action_word >> pattern_word;
  if (in >> extra) raise(Errc::profile_syntax, "trailing tokens in rule '" + std::string(line) + "'");
  Effect effect;
  if (effect_word == "allow") {
    effect = Effect::allow;
  } else if (effect_word == "deny") {
    effect = Effect::deny;
  } else {
    raise(Errc::profile_syntax, "unknown effect '" + effect_word + "'");
  }
  auto action = action_from_name(action_word);
  if (!action) raise(Errc::profile_syntax, "unknown action '" + action_word + "'");
  if (pattern_word.empty()) raise(Errc::profile_syntax, "missing pattern in rule '" + std::string(line) + "'");
  GlobPattern pattern;
  try {
    pattern = compile_pattern(pattern_word);
  } catch (const Error& e) {
    raise(Errc::profile_syntax, e.what());
  }
  return PolicyRule{effect, *action, std::move(pattern)};
}

}  // namespace profile_detail

inline PolicyProfile parse_profile(std::string_view text) {
  std::optional<names::NamespacePath> subject;
  std::vector<PolicyRule> rules;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    line = profile_detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("profile ") || line == "profile") {
      if (subject) raise(Errc::profile_syntax, "duplicate profile header");
      std::string_view rest = profile_detail::trim(line.substr(7));
      if (rest.empty()) raise(Errc::profile_syntax, "profile header without subject");
      try {
        subject = names::parse_path(rest);
      } catch (const Error& e) {
        raise(Errc::profile_syntax, e.what());
      }
      continue;
    }
    if (!subject) raise(Errc::profile_syntax, "missing 'profile <subject>' header");
    rules.push_back(profile_detail::parse_rule_line(line));
  }
  if (!subject) raise(Errc::profile_syntax, "missing 'profile <subject>' header");
  return PolicyProfile(std::move(*subject), std::move(rules));
}

// ---------------------------------------------------------------------------
// Policy evaluation plug-in seam

/// Evaluation is pluggable so deployments can swap in their own policy
/// interpretation; the shipped engines are the deny-overrides default and a
/// pass-through used to disable policy at one enforcement point.
class PolicyEngine {
 public:
  virtual ~PolicyEngine() = default;
  virtual Decision evaluate(const PolicyProfile& profile, Action action,
                            const names::NamespacePath& path) const = 0;
  virtual const char* name() const = 0;
};

class DenyOverridesEngine final : public PolicyEngine {
 public:
  Decision evaluate(const PolicyProfile& profile, Action action,
                    const names::NamespacePath& path) const override {
    return policy::evaluate(profile, action, path);
  }
  const char* name() const override { return "default"; }
};

class PolicyDisabledEngine final : public PolicyEngine {
 public:
  Decision evaluate(const PolicyProfile&, Action, const names::NamespacePath&) const override {
    return Decision{Effect::allow, std::nullopt, false};
  }
  const char* name() const override { return "off"; }
};

inline std::shared_ptr<const PolicyEngine> make_policy_engine(std::string_view kind) {
  if (kind == "default") return std::make_shared<DenyOverridesEngine>();
  if (kind == "off") return std::make_shared<PolicyDisabledEngine>();
  raise(Errc::config_invalid, "unknown policy engine '" + std::string(kind) + "'");
}

}  // namespace sros::policy

#endif  // SROS_POLICY_HPP_

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

// Test-only reference matcher for the namespace glob grammar. Interprets the
// pattern source text directly with exhaustive backtracking, one rule at a
// time, sharing no code with the compiled NFA it is used to check. Assumes
// the pattern already passed compilation; behaviour on syntactically invalid
// patterns is unspecified.

#ifndef SROS_TESTS_GLOB_ORACLE_HPP_
#define SROS_TESTS_GLOB_ORACLE_HPP_

#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace glob_oracle {

namespace detail {

inline bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_';
}

// Splits "{a,b{c,d},e}rest" into branches {"a","b{c,d}","e"} and returns the
// index one past the closing brace.
inline std::size_t split_alternation(std::string_view pat,
                                     std::vector<std::string>* branches) {
  std::size_t i = 1;  // past '{'
  int depth = 0;
  std::string current;
  for (; i < pat.size(); ++i) {
    char c = pat[i];
    if (c == '{') {
      ++depth;
      current += c;
    } else if (c == '}' && depth > 0) {
      --depth;
      current += c;
    } else if (c == '}' ) {
      branches->push_back(current);
      return i + 1;
    } else if (c == ',' && depth == 0) {
      branches->push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  return pat.size();  // unclosed; unreachable for compiled patterns
}

// Parses a class body starting at pat[0] == '['. Returns chars matched and
// the index one past ']'.
inline std::size_t parse_class(std::string_view pat, bool* negated,
                               std::string* members) {
  std::size_t i = 1;
  *negated = false;
  if (i < pat.size() && pat[i] == '^') {
    *negated = true;
    ++i;
  }
  while (i < pat.size() && pat[i] != ']') {
    char lo = pat[i];
    char hi = lo;
    if (i + 2 < pat.size() && pat[i + 1] == '-' && pat[i + 2] != ']') {
      hi = pat[i + 2];
      i += 3;
    } else {
      ++i;
    }
    for (char c = lo; c <= hi; ++c) members->push_back(c);
  }
  return i + 1;
}

inline bool class_matches(bool negated, const std::string& members, char c) {
  bool in = members.find(c) != std::string::npos;
  if (!negated) return in;
  return is_name_char(c) && !in;
}

}  // namespace detail

/// Exhaustive backtracking match of `pat` against `text`.
inline bool ref_match(std::string_view pat, std::string_view text) {
  if (pat.empty()) return text.empty();
  char c = pat[0];

  if (c == '{') {
    std::vector<std::string> branches;
    std::size_t after = detail::split_alternation(pat, &branches);
    std::string_view rest = pat.substr(after);
    for (const auto& b : branches) {
      if (ref_match(b + std::string(rest), text)) return true;
    }
    return false;
  }

  if (c == '/' && pat.size() >= 3 && pat[1] == '*' && pat[2] == '*') {
    std::string_view rest = pat.substr(3);
    // `/**` may match nothing at all...
    if (ref_match(rest, text)) return true;
    // ...or a '/' followed by any run of characters.
    if (!text.empty() && text[0] == '/') {
      for (std::size_t k = 1; k <= text.size(); ++k) {
        if (ref_match(rest, text.substr(k))) return true;
      }
    }
    return false;
  }

  if (c == '*' && pat.size() >= 2 && pat[1] == '*') {
    std::string_view rest = pat.substr(2);
    for (std::size_t k = 0; k <= text.size(); ++k) {
      if (ref_match(rest, text.substr(k))) return true;
    }
    return false;
  }

  if (c == '*') {
    std::string_view rest = pat.substr(1);
    for (std::size_t k = 0; k <= text.size(); ++k) {
      if (k > 0 && text[k - 1] == '/') break;  // '*' never crosses a separator
      if (ref_match(rest, text.substr(k))) return true;
    }
    return false;
  }

  if (c == '?') {
    if (text.empty() || text[0] == '/') return false;
    return ref_match(pat.substr(1), text.substr(1));
  }

  if (c == '[') {
    bool negated = false;
    std::string members;
    std::size_t after = detail::parse_class(pat, &negated, &members);
    if (text.empty() || text[0] == '/') return false;
    if (!detail::class_matches(negated, members, text[0])) return false;
    return ref_match(pat.substr(after), text.substr(1));
  }

  if (text.empty() || text[0] != c) return false;
  return ref_match(pat.substr(1), text.substr(1));
}

/// All canonical path texts of depth <= max_depth over the given tokens,
/// root included.
inline std::vector<std::string> enumerate_paths(const std::vector<std::string>& tokens,
                                                int max_depth) {
  std::vector<std::string> out = {"/"};
  std::vector<std::string> frontier = {""};
  for (int d = 0; d < max_depth; ++d) {
    std::vector<std::string> next;
    for (const auto& prefix : frontier) {
      for (const auto& tok : tokens) {
        std::string p = prefix + "/" + tok;
        out.push_back(p);
        next.push_back(p);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

/// Grammar-directed random pattern source. Always syntactically valid and
/// within the alternation depth limit.
class PatternGenerator {
 public:
  explicit PatternGenerator(std::uint32_t seed) : rng_(seed) {}

  std::string next() {
    std::string out;
    int segments = pick(1, 4);
    for (int s = 0; s < segments; ++s) {
      // Sometimes emit a `/**` unit instead of a plain separator + segment.
      if (chance(10)) {
        out += "/**";
        continue;
      }
      out += '/';
      out += fragment(2);
    }
    if (out.empty()) out = "/**";
    return out;
  }

 private:
  std::string fragment(int alt_budget) {
    std::string out;
    int elements = pick(1, 3);
    for (int i = 0; i < elements; ++i) {
      switch (pick(0, alt_budget > 0 ? 6 : 5)) {
        case 0:
        case 1:
          out += token();
          break;
        case 2:
          out += '*';
          break;
        case 3:
          out += '?';
          break;
        case 4:
          out += "**";
          break;
        case 5: {
          out += '[';
          if (chance(4)) out += '^';
          int members = pick(1, 3);
          for (int m = 0; m < members; ++m) out += alphabet_char();
          out += ']';
          break;
        }
        case 6: {
          out += '{';
          int branches = pick(2, 3);
          for (int b = 0; b < branches; ++b) {
            if (b) out += ',';
            out += fragment(alt_budget - 1);
          }
          out += '}';
          break;
        }
      }
    }
    if (out.empty()) out = token();
    return out;
  }

  std::string token() {
    static const char* toks[] = {"a", "b", "ab", "x1"};
    return toks[pick(0, 3)];
  }

  char alphabet_char() {
    static const char chars[] = {'a', 'b', 'x', '1'};
    return chars[pick(0, 3)];
  }

  int pick(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }

  bool chance(int one_in) { return pick(1, one_in) == 1; }

  std::mt19937 rng_;
};

}  // namespace glob_oracle

#endif  // SROS_TESTS_GLOB_ORACLE_HPP_

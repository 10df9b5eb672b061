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

#ifndef SROS_NAMES_HPP_
#define SROS_NAMES_HPP_

#include <compare>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sros/error.hpp"

namespace sros::names {

/// Token alphabet for one path segment. Deliberately conservative: no `~`,
/// no `.`, so glob metacharacters stay unambiguous in policy scopes.
inline constexpr bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_';
}

/// Canonical absolute graph name (`/a/b/c`). Topics, services, parameters,
/// node names and API verbs are all keyed by this type. Immutable after
/// construction; the empty segment list is the root `/`.
class NamespacePath {
 public:
  NamespacePath() = default;

  explicit NamespacePath(std::vector<std::string> segments)
      : segments_(std::move(segments)) {
    for (const auto& seg : segments_) validate_segment(seg);
  }

  const std::vector<std::string>& segments() const { return segments_; }
  bool is_root() const { return segments_.empty(); }
  std::size_t depth() const { return segments_.size(); }

  /// Canonical text form: leading `/`, no trailing `/` (except root),
  /// no empty or repeated separators.
  std::string str() const {
    if (segments_.empty()) return "/";
    std::string out;
    for (const auto& seg : segments_) {
      out += '/';
      out += seg;
    }
    return out;
  }

  /// Parent namespace; the root is its own parent.
  NamespacePath parent() const {
    if (segments_.empty()) return {};
    NamespacePath p;
    p.segments_.assign(segments_.begin(), segments_.end() - 1);
    return p;
  }

  NamespacePath child(std::string token) const {
    validate_segment(token);
    NamespacePath p = *this;
    p.segments_.push_back(std::move(token));
    return p;
  }

  friend bool operator==(const NamespacePath&, const NamespacePath&) = default;
  friend auto operator<=>(const NamespacePath& a, const NamespacePath& b) {
    return a.segments_ <=> b.segments_;
  }

 private:
  static void validate_segment(const std::string& seg) {
    if (seg.empty()) raise(Errc::invalid_name, "empty path segment");
    for (char c : seg) {
      if (!is_name_char(c)) {
        raise(Errc::invalid_name,
              "illegal character '" + std::string(1, c) + "' in segment '" + seg + "'");
      }
    }
  }

  std::vector<std::string> segments_;
};

/// Parses text into a canonical path. Repeated separators collapse and a
/// trailing separator is stripped, so `/a//b/` parses as `/a/b`.
inline NamespacePath parse_path(std::string_view text) {
  if (text.empty()) raise(Errc::invalid_name, "empty name");
  if (text.front() != '/') {
    raise(Errc::invalid_name,
          "relative name '" + std::string(text) + "' needs a base; use resolve()");
  }
  std::vector<std::string> segments;
  std::string current;
  for (std::size_t i = 1; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '/') {
      if (!current.empty()) {
        segments.push_back(std::move(current));
        current.clear();
      }
      continue;
    }
    if (!is_name_char(text[i])) {
      raise(Errc::invalid_name,
            "illegal character '" + std::string(1, text[i]) + "' in name '" +
                std::string(text) + "'");
    }
    current += text[i];
  }
  return NamespacePath(std::move(segments));
}

/// Resolves `name` against `base`: absolute names (leading `/`) win,
/// relative names are appended to the base and canonicalized.
inline NamespacePath resolve(const NamespacePath& base, std::string_view name) {
  if (name.empty()) raise(Errc::invalid_name, "empty name");
  if (name.front() == '/') return parse_path(name);
  std::vector<std::string> segments = base.segments();
  std::string current;
  for (std::size_t i = 0; i <= name.size(); ++i) {
    if (i == name.size() || name[i] == '/') {
      if (!current.empty()) {
        segments.push_back(std::move(current));
        current.clear();
      }
      continue;
    }
    if (!is_name_char(name[i])) {
      raise(Errc::invalid_name,
            "illegal character '" + std::string(1, name[i]) + "' in name '" +
                std::string(name) + "'");
    }
    current += name[i];
  }
  return NamespacePath(std::move(segments));
}

/// True iff `ancestor`'s segments are a (possibly equal) leading run of
/// `descendant`'s. The root prefixes everything.
inline bool is_prefix(const NamespacePath& ancestor, const NamespacePath& descendant) {
  const auto& a = ancestor.segments();
  const auto& d = descendant.segments();
  if (a.size() > d.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != d[i]) return false;
  }
  return true;
}

}  // namespace sros::names

#endif  // SROS_NAMES_HPP_

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

#ifndef SROS_PROFILEGEN_HPP_
#define SROS_PROFILEGEN_HPP_

#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sros/error.hpp"
#include "sros/names.hpp"

namespace sros::profilegen {

// AppArmor profile text generation from modular primitives. Output is pure
// text for review and out-of-band loading; nothing here talks to a kernel.
// The rule sets below are this project's own expansions of the primitive
// categories (signalling, runtime shared libraries, sockets, key material);
// adjust via extra_rules where a deployment needs more.

struct NodeManifest {
  names::NamespacePath node_name;
  std::string executable_path;
  std::vector<std::string> primitives;
  std::vector<std::string> extra_rules;
};

inline NodeManifest manifest_from_json(const nlohmann::json& j) {
  NodeManifest m;
  try {
    m.node_name = names::parse_path(j.at("node_name").get<std::string>());
    m.executable_path = j.at("executable_path").get<std::string>();
    if (j.contains("primitives")) {
      m.primitives = j.at("primitives").get<std::vector<std::string>>();
    }
    if (j.contains("extra_rules")) {
      m.extra_rules = j.at("extra_rules").get<std::vector<std::string>>();
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::config_invalid, std::string("bad manifest: ") + e.what());
  }
  return m;
}

/// Graph names become profile names by mapping `/` to `.`.
inline std::string sanitize_profile_name(const names::NamespacePath& name) {
  std::string out = name.str();
  std::replace(out.begin(), out.end(), '/', '.');
  return out;
}

namespace detail {

inline void require_absolute(const std::string& path, const char* what) {
  if (path.empty() || path.front() != '/') {
    raise(Errc::invalid_path, std::string(what) + " must be an absolute path, got '" + path + "'");
  }
}

/// Expands one primitive spec ("name" or "name:<dir>") into rule lines.
inline std::vector<std::string> expand_primitive(const std::string& spec,
                                                 const std::string& exe) {
  std::string name = spec;
  std::string arg;
  if (auto colon = spec.find(':'); colon != std::string::npos) {
    name = spec.substr(0, colon);
    arg = spec.substr(colon + 1);
  }

  auto need_dir = [&]() -> const std::string& {
    if (arg.empty()) raise(Errc::missing_param, "primitive '" + name + "' needs a directory argument");
    require_absolute(arg, ("argument of '" + name + "'").c_str());
    while (arg.size() > 1 && arg.back() == '/') arg.pop_back();
    return arg;
  };
  auto no_arg = [&] {
    if (!arg.empty()) {
      raise(Errc::config_invalid, "primitive '" + name + "' takes no argument");
    }
  };

  if (name == "node-base") {
    no_arg();
    return {
        "signal (receive) peer=unconfined,",
        exe + " rm,",
        "network unix stream,",
        "network inet stream ip=127.0.0.1,",
    };
  }
  if (name == "python-runtime") {
    no_arg();
    return {
        "/usr/bin/python3* ix,",
        "/usr/lib/python3/** r,",
        "/usr/lib/python3/**.so mr,",
        "/etc/ld.so.cache r,",
        "/usr/lib/{x86_64,aarch64}-linux-gnu/** mr,",
    };
  }
  if (name == "cpp-runtime") {
    no_arg();
    return {
        "/etc/ld.so.cache r,",
        "/usr/lib/{x86_64,aarch64}-linux-gnu/** mr,",
    };
  }
  if (name == "network-tls") {
    no_arg();
    return {
        "network inet stream,",
        "network inet6 stream,",
        "/etc/ssl/certs/ r,",
        "/etc/ssl/certs/** r,",
    };
  }
  if (name == "keystore-read") {
    const auto& dir = need_dir();
    return {dir + "/ r,", dir + "/** r,"};
  }
  if (name == "log-write") {
    const auto& dir = need_dir();
    return {dir + "/ rw,", dir + "/** rw,"};
  }
  raise(Errc::unknown_primitive, "unknown primitive '" + name + "'");
}

}  // namespace detail

/// Deterministic profile text for a manifest: primitives expand, the union
/// deduplicates and sorts, extra rules append verbatim. Reordering the
/// manifest's primitive list cannot change the output bytes.
inline std::string generate(const NodeManifest& manifest) {
  detail::require_absolute(manifest.executable_path, "executable_path");

  std::set<std::string> rules;
  for (const auto& primitive : manifest.primitives) {
    for (auto& line : detail::expand_primitive(primitive, manifest.executable_path)) {
      rules.insert(std::move(line));
    }
  }

  std::string out = "# generated by sroskit profilegen\n";
  out += "profile " + sanitize_profile_name(manifest.node_name) + " " +
         manifest.executable_path + " {\n";
  for (const auto& rule : rules) {
    out += "  " + rule + "\n";
  }
  for (const auto& extra : manifest.extra_rules) {
    out += "  " + extra + "\n";
  }
  out += "}\n";
  return out;
}

// ---------------------------------------------------------------------------
// Lint

struct LintFinding {
  std::size_t line = 0;  // 1-based
  std::string message;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace detail

/// Purely syntactic checks over profile text: flags root-wide writes,
/// capability grants, and profiles missing the node-base primitive. Input
/// that does not parse as a profile raises ParseFailure.
inline std::vector<LintFinding> lint(std::string_view text) {
  std::vector<LintFinding> findings;
  bool saw_header = false;
  bool closed = false;
  bool saw_signal = false;
  bool saw_unix = false;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    std::string_view raw = text.substr(
        start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (line.starts_with("profile ")) {
      if (saw_header) raise(Errc::parse_failure, "nested profile header at line " + std::to_string(line_no));
      if (!line.ends_with("{")) {
        raise(Errc::parse_failure, "profile header must end with '{' at line " + std::to_string(line_no));
      }
      saw_header = true;
      continue;
    }
    if (line == "}") {
      if (!saw_header || closed) raise(Errc::parse_failure, "unbalanced '}' at line " + std::to_string(line_no));
      closed = true;
      continue;
    }
    if (!saw_header || closed) {
      raise(Errc::parse_failure, "rule outside profile body at line " + std::to_string(line_no));
    }

    // rule line; the trailing comma is conventional but not required here
    std::string rule{line};
    if (!rule.empty() && rule.back() == ',') rule.pop_back();
    std::string_view r = detail::trim(rule);

    if (r.starts_with("capability")) {
      findings.push_back({line_no, "capability grant: " + std::string(r)});
      continue;
    }
    if (r.starts_with("signal")) {
      if (r.find("(receive)") != std::string_view::npos) saw_signal = true;
      continue;
    }
    if (r.starts_with("network")) {
      if (r.find("unix") != std::string_view::npos) saw_unix = true;
      continue;
    }
    if (r.starts_with("unix") || r.starts_with("dbus") || r.starts_with("mount") ||
        r.starts_with("umount") || r.starts_with("ptrace")) {
      continue;
    }
    if (r.front() == '/' || r.front() == '{') {
      // file rule: `<glob> <perms>`
      auto space = r.rfind(' ');
      if (space == std::string_view::npos) {
        raise(Errc::parse_failure, "file rule without permissions at line " + std::to_string(line_no));
      }
      std::string_view glob = detail::trim(r.substr(0, space));
      std::string_view perms = detail::trim(r.substr(space + 1));
      if (perms.empty() ||
          perms.find_first_not_of("rwamklixpuc") != std::string_view::npos) {
        raise(Errc::parse_failure, "unrecognized permissions '" + std::string(perms) +
                                       "' at line " + std::to_string(line_no));
      }
      const bool writes = perms.find('w') != std::string_view::npos ||
                          perms.find('a') != std::string_view::npos;
      if (writes && (glob == "/" || glob == "/**")) {
        findings.push_back({line_no, "filesystem-wide write grant: " + std::string(r)});
      }
      continue;
    }
    raise(Errc::parse_failure, "unrecognized rule '" + std::string(line) + "' at line " +
                                   std::to_string(line_no));
  }

  if (!saw_header) raise(Errc::parse_failure, "missing profile header");
  if (!closed) raise(Errc::parse_failure, "missing closing '}'");
  if (!saw_signal || !saw_unix) {
    findings.push_back({0, "node-base primitive missing (no signal/unix socket baseline)"});
  }
  return findings;
}

}  // namespace sros::profilegen

#endif  // SROS_PROFILEGEN_HPP_

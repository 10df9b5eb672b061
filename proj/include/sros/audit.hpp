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

#ifndef SROS_AUDIT_HPP_
#define SROS_AUDIT_HPP_

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sros/error.hpp"
#include "sros/names.hpp"
#include "sros/policy.hpp"

namespace sros::audit {

// ---------------------------------------------------------------------------
// Run-time modes

/// enforce: denials are refused and logged.
/// complain: denials are permitted and logged as would-deny.
/// audit: complain behaviour, plus every allowed decision is logged too.
enum class Mode { enforce, complain, audit };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::enforce: return "enforce";
    case Mode::complain: return "complain";
    case Mode::audit: return "audit";
  }
  return "enforce";
}

inline std::optional<Mode> mode_from_name(std::string_view name) {
  if (name == "enforce") return Mode::enforce;
  if (name == "complain") return Mode::complain;
  if (name == "audit") return Mode::audit;
  return std::nullopt;
}

enum class EnforcementPoint { registry, peer, self };

inline const char* enforcement_point_name(EnforcementPoint p) {
  switch (p) {
    case EnforcementPoint::registry: return "registry";
    case EnforcementPoint::peer: return "peer";
    case EnforcementPoint::self: return "self";
  }
  return "registry";
}

inline std::optional<EnforcementPoint> enforcement_point_from_name(std::string_view name) {
  if (name == "registry") return EnforcementPoint::registry;
  if (name == "peer") return EnforcementPoint::peer;
  if (name == "self") return EnforcementPoint::self;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Events

inline std::string now_rfc3339_utc() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto secs = time_point_cast<seconds>(now);
  const auto millis = duration_cast<milliseconds>(now - secs).count();
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(millis));
  return buf;
}

/// One structured access decision. Serialized as one JSON object per line;
/// this is the format the trainer and replay tooling consume.
struct AuditEvent {
  std::string ts;
  Mode mode = Mode::enforce;
  names::NamespacePath subject;
  policy::Action action = policy::Action::graph_execute;
  names::NamespacePath scope;
  std::string decision;  // "allow" | "deny" | "would-deny"
  std::optional<std::string> matched_rule;
  EnforcementPoint enforcement_point = EnforcementPoint::registry;

  nlohmann::json to_json() const {
    nlohmann::json j{{"ts", ts},
                     {"mode", mode_name(mode)},
                     {"subject", subject.str()},
                     {"action", policy::action_name(action)},
                     {"scope", scope.str()},
                     {"decision", decision},
                     {"enforcement_point", enforcement_point_name(enforcement_point)}};
    if (matched_rule) j["matched_rule"] = *matched_rule;
    return j;
  }

  std::string to_jsonl() const { return to_json().dump(); }

  static AuditEvent from_json(const nlohmann::json& j) {
    try {
      AuditEvent e;
      e.ts = j.at("ts").get<std::string>();
      auto mode = mode_from_name(j.at("mode").get<std::string>());
      auto action = policy::action_from_name(j.at("action").get<std::string>());
      auto point = enforcement_point_from_name(j.at("enforcement_point").get<std::string>());
      if (!mode || !action || !point) raise(Errc::log_malformed, "unknown enum value");
      e.mode = *mode;
      e.action = *action;
      e.enforcement_point = *point;
      e.subject = names::parse_path(j.at("subject").get<std::string>());
      e.scope = names::parse_path(j.at("scope").get<std::string>());
      e.decision = j.at("decision").get<std::string>();
      if (e.decision != "allow" && e.decision != "deny" && e.decision != "would-deny") {
        raise(Errc::log_malformed, "unknown decision '" + e.decision + "'");
      }
      if (j.contains("matched_rule")) e.matched_rule = j.at("matched_rule").get<std::string>();
      return e;
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      raise(Errc::log_malformed, ex.what());
    }
  }
};

// ---------------------------------------------------------------------------
// Sinks

/// Serializes writes internally; one emitter call is one output line.
class AuditSink {
 public:
  virtual ~AuditSink() = default;
  virtual void emit(const AuditEvent& event) = 0;
};

class NullSink final : public AuditSink {
 public:
  void emit(const AuditEvent&) override {}
};

/// Appends JSONL to a file, flushing per event so complain-mode training
/// data survives a crash of the emitting process.
class JsonlFileSink final : public AuditSink {
 public:
  explicit JsonlFileSink(const std::string& path)
      : out_(path, std::ios::app) {
    if (!out_) raise(Errc::io_failure, "cannot open audit log '" + path + "'");
  }

  void emit(const AuditEvent& event) override {
    std::lock_guard lock{mu_};
    out_ << event.to_jsonl() << '\n';
    out_.flush();
    if (!out_) raise(Errc::io_failure, "audit log write failed");
  }

 private:
  std::ofstream out_;
  std::mutex mu_;
};

class OstreamSink final : public AuditSink {
 public:
  explicit OstreamSink(std::ostream& out) : out_(out) {}

  void emit(const AuditEvent& event) override {
    std::lock_guard lock{mu_};
    out_ << event.to_jsonl() << '\n';
    out_.flush();
  }

 private:
  std::ostream& out_;
  std::mutex mu_;
};

/// Test and tooling sink that retains events in memory.
class MemorySink final : public AuditSink {
 public:
  void emit(const AuditEvent& event) override {
    std::lock_guard lock{mu_};
    events_.push_back(event);
  }

  std::vector<AuditEvent> snapshot() const {
    std::lock_guard lock{mu_};
    return events_;
  }

  void clear() {
    std::lock_guard lock{mu_};
    events_.clear();
  }

 private:
  mutable std::mutex mu_;
  std::vector<AuditEvent> events_;
};

inline void emit(AuditSink& sink, const AuditEvent& event) { sink.emit(event); }

// ---------------------------------------------------------------------------
// Enforcer

/// Applies the mode matrix to a policy decision at one enforcement point:
/// evaluates the profile through the configured engine, emits the audit
/// event the matrix calls for, and reports whether the operation may
/// proceed. This is the one choke point all three enforcement points share.
class Enforcer {
 public:
  Enforcer(Mode mode, std::shared_ptr<const policy::PolicyEngine> engine,
           std::shared_ptr<AuditSink> sink)
      : mode_(mode),
        engine_(engine ? std::move(engine)
                       : std::make_shared<const policy::DenyOverridesEngine>()),
        sink_(sink ? std::move(sink) : std::make_shared<NullSink>()) {}

  Mode mode() const { return mode_; }
  const policy::PolicyEngine& engine() const { return *engine_; }

  bool check(const policy::PolicyProfile& profile, const names::NamespacePath& subject,
             policy::Action action, const names::NamespacePath& scope,
             EnforcementPoint point) const {
    const auto decision = engine_->evaluate(profile, action, scope);
    const bool allowed = decision.verdict == policy::Effect::allow;

    std::optional<std::string> log_decision;
    bool permitted = true;
    if (allowed) {
      if (mode_ == Mode::audit) log_decision = "allow";
    } else if (mode_ == Mode::enforce) {
      permitted = false;
      log_decision = "deny";
    } else {
      log_decision = "would-deny";
    }

    if (log_decision) {
      AuditEvent event;
      event.ts = now_rfc3339_utc();
      event.mode = mode_;
      event.subject = subject;
      event.action = action;
      event.scope = scope;
      event.decision = *log_decision;
      if (decision.matched) event.matched_rule = decision.matched->text();
      event.enforcement_point = point;
      sink_->emit(event);
    }
    return permitted;
  }

 private:
  Mode mode_;
  std::shared_ptr<const policy::PolicyEngine> engine_;
  std::shared_ptr<AuditSink> sink_;
};

// ---------------------------------------------------------------------------
// Policy training from demonstration logs

struct TrainOptions {
  /// Replace >= threshold sibling leaf scopes sharing one parent and action
  /// with a single `<parent>/*` rule. Disabled when unset. Must be >= 2.
  std::optional<int> generalize_threshold;
};

struct TrainResult {
  std::map<names::NamespacePath, policy::PolicyProfile> profiles;
  std::vector<std::size_t> malformed_lines;  // 1-based line numbers
};

/// Builds minimal allow-only profiles from demonstrated accesses: every
/// distinct (subject, action, scope) seen with decision allow or would-deny
/// becomes an allow rule. Deny events are refused accesses, not
/// demonstrations, so they never contribute rules. Malformed lines are
/// reported by number and skipped.
inline TrainResult train(std::istream& events, const TrainOptions& options = {}) {
  if (options.generalize_threshold && *options.generalize_threshold < 2) {
    raise(Errc::config_invalid, "generalize threshold must be >= 2");
  }

  TrainResult result;
  std::map<names::NamespacePath,
           std::map<policy::Action, std::set<names::NamespacePath>>>
      demonstrated;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(events, line)) {
    ++line_no;
    std::string_view trimmed{line};
    while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' ')) {
      trimmed.remove_suffix(1);
    }
    if (trimmed.empty()) continue;
    try {
      const auto parsed = nlohmann::json::parse(trimmed);
      const auto event = AuditEvent::from_json(parsed);
      if (event.decision == "deny") continue;
      demonstrated[event.subject][event.action].insert(event.scope);
    } catch (const std::exception&) {
      result.malformed_lines.push_back(line_no);
    }
  }

  for (const auto& [subject, by_action] : demonstrated) {
    std::vector<policy::PolicyRule> rules;
    for (const auto& [action, scopes] : by_action) {
      std::set<names::NamespacePath> literal{scopes.begin(), scopes.end()};
      if (options.generalize_threshold) {
        std::map<names::NamespacePath, std::vector<names::NamespacePath>> by_parent;
        for (const auto& scope : scopes) {
          if (scope.is_root()) continue;  // the root has no parent to widen to
          by_parent[scope.parent()].push_back(scope);
        }
        for (const auto& [parent, members] : by_parent) {
          if (static_cast<int>(members.size()) < *options.generalize_threshold) continue;
          for (const auto& m : members) literal.erase(m);
          const std::string pattern =
              parent.is_root() ? "/*" : parent.str() + "/*";
          rules.push_back(policy::PolicyRule{policy::Effect::allow, action,
                                             policy::compile_pattern(pattern)});
        }
      }
      for (const auto& scope : literal) {
        rules.push_back(policy::PolicyRule{policy::Effect::allow, action,
                                           policy::compile_pattern(scope.str())});
      }
    }
    result.profiles.emplace(subject, policy::PolicyProfile{subject, std::move(rules)});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Replay

struct Violation {
  std::size_t line = 0;  // 1-based in the replayed log
  names::NamespacePath subject;
  policy::Action action = policy::Action::graph_execute;
  names::NamespacePath scope;
};

struct ReplayReport {
  std::vector<Violation> violations;
  std::vector<std::size_t> malformed_lines;
  std::size_t replayed = 0;
};

/// Replays every demonstrated access (decision allow or would-deny) against
/// the given profiles and reports the ones the profiles would deny. A
/// subject without a profile evaluates against an empty profile, i.e.
/// default deny.
inline ReplayReport check_roundtrip(
    const std::map<names::NamespacePath, policy::PolicyProfile>& profiles,
    std::istream& events) {
  ReplayReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(events, line)) {
    ++line_no;
    std::string_view trimmed{line};
    while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' ')) {
      trimmed.remove_suffix(1);
    }
    if (trimmed.empty()) continue;
    AuditEvent event;
    try {
      event = AuditEvent::from_json(nlohmann::json::parse(trimmed));
    } catch (const std::exception&) {
      report.malformed_lines.push_back(line_no);
      continue;
    }
    if (event.decision == "deny") continue;
    ++report.replayed;

    const auto it = profiles.find(event.subject);
    const policy::PolicyProfile empty{event.subject, {}};
    const auto& profile = it == profiles.end() ? empty : it->second;
    if (policy::evaluate(profile, event.action, event.scope).verdict ==
        policy::Effect::deny) {
      report.violations.push_back(
          Violation{line_no, event.subject, event.action, event.scope});
    }
  }
  return report;
}

}  // namespace sros::audit

#endif  // SROS_AUDIT_HPP_

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

#ifndef SROS_ERROR_HPP_
#define SROS_ERROR_HPP_

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sros {

/// Stable error identifiers. The PascalCase names returned by errc_name()
/// travel on the wire as RPC error codes and map to CLI exit messages, so
/// they are part of the external interface.
enum class Errc {
  invalid_name,
  pattern_syntax,
  profile_syntax,
  config_invalid,
  already_initialized,
  io_failure,
  subject_mismatch,
  ca_unavailable,
  extension_malformed,
  signature_invalid,
  expired,
  not_yet_valid,
  untrusted_root,
  bad_subject,
  protocol_error,
  handshake_failed,
  peer_cert_missing,
  permission_denied,
  type_mismatch,
  not_registered,
  param_not_found,
  service_not_found,
  node_not_found,
  timeout,
  name_mismatch,
  log_malformed,
  unknown_primitive,
  missing_param,
  invalid_path,
  parse_failure,
  unavailable,
  internal,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_name: return "InvalidName";
    case Errc::pattern_syntax: return "PatternSyntax";
    case Errc::profile_syntax: return "ProfileSyntax";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::already_initialized: return "AlreadyInitialized";
    case Errc::io_failure: return "IoFailure";
    case Errc::subject_mismatch: return "SubjectMismatch";
    case Errc::ca_unavailable: return "CaUnavailable";
    case Errc::extension_malformed: return "ExtensionMalformed";
    case Errc::signature_invalid: return "SignatureInvalid";
    case Errc::expired: return "Expired";
    case Errc::not_yet_valid: return "NotYetValid";
    case Errc::untrusted_root: return "UntrustedRoot";
    case Errc::bad_subject: return "BadSubject";
    case Errc::protocol_error: return "ProtocolError";
    case Errc::handshake_failed: return "HandshakeFailed";
    case Errc::peer_cert_missing: return "PeerCertMissing";
    case Errc::permission_denied: return "PermissionDenied";
    case Errc::type_mismatch: return "TypeMismatch";
    case Errc::not_registered: return "NotRegistered";
    case Errc::param_not_found: return "ParamNotFound";
    case Errc::service_not_found: return "ServiceNotFound";
    case Errc::node_not_found: return "NodeNotFound";
    case Errc::timeout: return "Timeout";
    case Errc::name_mismatch: return "NameMismatch";
    case Errc::log_malformed: return "LogMalformed";
    case Errc::unknown_primitive: return "UnknownPrimitive";
    case Errc::missing_param: return "MissingParam";
    case Errc::invalid_path: return "InvalidPath";
    case Errc::parse_failure: return "ParseFailure";
    case Errc::unavailable: return "Unavailable";
    case Errc::internal: return "Internal";
  }
  return "Internal";
}

inline std::optional<Errc> errc_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Errc::internal); ++i) {
    const auto c = static_cast<Errc>(i);
    if (name == errc_name(c)) return c;
  }
  return std::nullopt;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }
  const char* code_name() const { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace sros

#endif  // SROS_ERROR_HPP_

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

#ifndef SROS_PKI_HPP_
#define SROS_PKI_HPP_

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <openssl/asn1.h>
#include <openssl/bio.h>
#include <openssl/bn.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include <json.hpp>

#include "sros/error.hpp"
#include "sros/names.hpp"
#include "sros/policy.hpp"

namespace sros::pki {

// ---------------------------------------------------------------------------
// OpenSSL RAII

namespace ossl {

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const {
    if (p) Free(p);
  }
};

using X509Ptr = std::unique_ptr<X509, Deleter<X509, X509_free>>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, Deleter<EVP_PKEY, EVP_PKEY_free>>;
using BioPtr = std::unique_ptr<BIO, Deleter<BIO, BIO_free_all>>;
using BnPtr = std::unique_ptr<BIGNUM, Deleter<BIGNUM, BN_free>>;
using Asn1IntPtr = std::unique_ptr<ASN1_INTEGER, Deleter<ASN1_INTEGER, ASN1_INTEGER_free>>;
using Asn1OctPtr =
    std::unique_ptr<ASN1_OCTET_STRING, Deleter<ASN1_OCTET_STRING, ASN1_OCTET_STRING_free>>;
using Asn1ObjPtr = std::unique_ptr<ASN1_OBJECT, Deleter<ASN1_OBJECT, ASN1_OBJECT_free>>;
using ExtPtr = std::unique_ptr<X509_EXTENSION, Deleter<X509_EXTENSION, X509_EXTENSION_free>>;
using StorePtr = std::unique_ptr<X509_STORE, Deleter<X509_STORE, X509_STORE_free>>;
using StoreCtxPtr =
    std::unique_ptr<X509_STORE_CTX, Deleter<X509_STORE_CTX, X509_STORE_CTX_free>>;

inline std::string last_error() {
  char buf[256];
  unsigned long e = ERR_get_error();
  ERR_clear_error();
  if (!e) return "unknown OpenSSL failure";
  ERR_error_string_n(e, buf, sizeof(buf));
  return buf;
}

inline X509Ptr up_ref(X509* cert) {
  X509_up_ref(cert);
  return X509Ptr{cert};
}

inline PkeyPtr up_ref(EVP_PKEY* key) {
  EVP_PKEY_up_ref(key);
  return PkeyPtr{key};
}

}  // namespace ossl

// ---------------------------------------------------------------------------
// Keyserver configuration

struct KeySpec {
  enum class Type { rsa, ecdsa_p256 };
  Type type = Type::ecdsa_p256;
  int rsa_bits = 3072;
};

struct CaLevel {
  std::string common_name;
  KeySpec key;
  int validity_days = 3650;
};

struct NodeCertSettings {
  KeySpec key;
  int validity_days = 365;
};

struct SettingsOverride {
  policy::GlobPattern match;  // over node names
  std::optional<KeySpec::Type> key_type;
  std::optional<int> rsa_bits;
  std::optional<int> validity_days;
};

/// Parsed keyserver configuration: CA hierarchy, per-node certificate
/// defaults, overrides keyed by node-name glob (applied in order, last
/// match wins per field), and optional policy profiles per node pattern.
struct KeyserverConfig {
  std::vector<CaLevel> ca_levels;  // root first
  NodeCertSettings node_defaults;
  std::vector<SettingsOverride> overrides;
  std::vector<std::pair<policy::GlobPattern, std::string>> profiles;

  static KeyserverConfig from_json(const nlohmann::json& j);

  NodeCertSettings settings_for(const names::NamespacePath& node) const {
    NodeCertSettings s = node_defaults;
    for (const auto& o : overrides) {
      if (!o.match.matches(node)) continue;
      if (o.key_type) s.key.type = *o.key_type;
      if (o.rsa_bits) s.key.rsa_bits = *o.rsa_bits;
      if (o.validity_days) s.validity_days = *o.validity_days;
    }
    return s;
  }

  /// Union of the rules of every matching profile entry, rebound to the
  /// node as subject. Entries may be full profile text (their header
  /// subject is replaced) or bare rule lines.
  std::optional<policy::PolicyProfile> profile_for(const names::NamespacePath& node) const {
    bool any = false;
    std::vector<policy::PolicyRule> rules;
    for (const auto& [pattern, text] : profiles) {
      if (!pattern.matches(node)) continue;
      any = true;
      // Entries may or may not start with their own `profile` header; the
      // first significant line decides.
      bool has_header = false;
      std::istringstream lines{text};
      std::string line;
      while (std::getline(lines, line)) {
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        has_header = line.compare(first, 8, "profile ") == 0;
        break;
      }
      std::string body = has_header ? text : "profile " + node.str() + "\n" + text;
      auto parsed = policy::parse_profile(body);
      for (const auto& r : parsed.rules()) rules.push_back(r);
    }
    if (!any) return std::nullopt;
    return policy::PolicyProfile{node, std::move(rules)};
  }
};

namespace config_detail {

inline KeySpec::Type key_type_from_string(const std::string& s) {
  if (s == "rsa") return KeySpec::Type::rsa;
  if (s == "ecdsa-p256") return KeySpec::Type::ecdsa_p256;
  raise(Errc::config_invalid, "unknown key_type '" + s + "'");
}

inline void validate_key(const KeySpec& k) {
  if (k.rsa_bits < 2048) {
    raise(Errc::config_invalid,
          "rsa_bits must be >= 2048, got " + std::to_string(k.rsa_bits));
  }
}

inline KeySpec key_spec_from(const nlohmann::json& j, KeySpec defaults) {
  KeySpec k = defaults;
  if (j.contains("key_type")) k.type = key_type_from_string(j.at("key_type").get<std::string>());
  if (j.contains("rsa_bits")) k.rsa_bits = j.at("rsa_bits").get<int>();
  validate_key(k);
  return k;
}

inline int validity_from(const nlohmann::json& j, int fallback) {
  int days = j.contains("validity_days") ? j.at("validity_days").get<int>() : fallback;
  if (days < 1) raise(Errc::config_invalid, "validity_days must be >= 1");
  return days;
}

}  // namespace config_detail

inline KeyserverConfig KeyserverConfig::from_json(const nlohmann::json& j) {
  KeyserverConfig cfg;
  try {
    if (!j.contains("ca")) raise(Errc::config_invalid, "missing 'ca' section");
    const nlohmann::json* level = &j.at("ca");
    while (true) {
      CaLevel ca;
      ca.common_name = level->at("common_name").get<std::string>();
      if (ca.common_name.empty()) raise(Errc::config_invalid, "empty CA common_name");
      ca.key = config_detail::key_spec_from(*level, KeySpec{});
      ca.validity_days = config_detail::validity_from(*level, 3650);
      cfg.ca_levels.push_back(std::move(ca));
      if (!level->contains("intermediate")) break;
      level = &level->at("intermediate");
    }
    if (j.contains("node_defaults")) {
      const auto& nd = j.at("node_defaults");
      cfg.node_defaults.key = config_detail::key_spec_from(nd, KeySpec{});
      cfg.node_defaults.validity_days = config_detail::validity_from(nd, 365);
    }
    if (j.contains("overrides")) {
      for (const auto& o : j.at("overrides")) {
        SettingsOverride so;
        so.match = policy::compile_pattern(o.at("match").get<std::string>());
        const auto& s = o.at("settings");
        if (s.contains("key_type")) {
          so.key_type = config_detail::key_type_from_string(s.at("key_type").get<std::string>());
        }
        if (s.contains("rsa_bits")) {
          so.rsa_bits = s.at("rsa_bits").get<int>();
          if (*so.rsa_bits < 2048) raise(Errc::config_invalid, "rsa_bits must be >= 2048");
        }
        if (s.contains("validity_days")) {
          so.validity_days = s.at("validity_days").get<int>();
          if (*so.validity_days < 1) raise(Errc::config_invalid, "validity_days must be >= 1");
        }
        cfg.overrides.push_back(std::move(so));
      }
    }
    if (j.contains("profiles")) {
      for (const auto& [pattern, text] : j.at("profiles").items()) {
        cfg.profiles.emplace_back(policy::compile_pattern(pattern),
                                  text.get<std::string>());
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::config_invalid, std::string("bad keyserver config: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Policy extension OIDs
//
// The arc below is under the documented experimental OID space; each action
// class owns one sub-OID. The extension value is the raw UTF-8 rule list,
// one `allow <pattern>` / `deny <pattern>` entry per line, deny first, then
// lexicographic — byte-identical for identical profiles.

inline constexpr char kPolicyOidArc[] = "1.3.6.1.3.81";

inline std::string policy_oid(policy::Action action) {
  return std::string(kPolicyOidArc) + "." + std::to_string(policy::action_oid_index(action));
}

// ---------------------------------------------------------------------------
// PEM helpers

inline std::string cert_to_pem(X509* cert) {
  ossl::BioPtr bio{BIO_new(BIO_s_mem())};
  if (!bio || !PEM_write_bio_X509(bio.get(), cert)) {
    raise(Errc::io_failure, "PEM encode failed: " + ossl::last_error());
  }
  char* data = nullptr;
  long len = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(len));
}

inline ossl::X509Ptr cert_from_pem(std::string_view pem) {
  ossl::BioPtr bio{BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size()))};
  ossl::X509Ptr cert{PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr)};
  if (!cert) raise(Errc::parse_failure, "bad certificate PEM: " + ossl::last_error());
  return cert;
}

inline std::vector<ossl::X509Ptr> certs_from_pem(std::string_view pem) {
  ossl::BioPtr bio{BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size()))};
  std::vector<ossl::X509Ptr> out;
  while (true) {
    ossl::X509Ptr cert{PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr)};
    if (!cert) break;
    out.push_back(std::move(cert));
  }
  ERR_clear_error();
  if (out.empty()) raise(Errc::parse_failure, "no certificates in PEM input");
  return out;
}

inline std::vector<std::uint8_t> cert_to_der(X509* cert) {
  unsigned char* buf = nullptr;
  int len = i2d_X509(cert, &buf);
  if (len <= 0) raise(Errc::io_failure, "DER encode failed: " + ossl::last_error());
  std::vector<std::uint8_t> out(buf, buf + len);
  OPENSSL_free(buf);
  return out;
}

inline ossl::X509Ptr cert_from_der(const std::vector<std::uint8_t>& der) {
  const unsigned char* p = der.data();
  ossl::X509Ptr cert{d2i_X509(nullptr, &p, static_cast<long>(der.size()))};
  if (!cert) raise(Errc::parse_failure, "bad certificate DER: " + ossl::last_error());
  return cert;
}

/// DER bytes of the signed portion (to-be-signed certificate).
inline std::vector<std::uint8_t> cert_tbs_der(X509* cert) {
  unsigned char* buf = nullptr;
  int len = i2d_re_X509_tbs(cert, &buf);
  if (len <= 0) raise(Errc::io_failure, "TBS encode failed: " + ossl::last_error());
  std::vector<std::uint8_t> out(buf, buf + len);
  OPENSSL_free(buf);
  return out;
}

inline std::string key_to_pem(EVP_PKEY* key) {
  ossl::BioPtr bio{BIO_new(BIO_s_mem())};
  if (!bio ||
      !PEM_write_bio_PrivateKey(bio.get(), key, nullptr, nullptr, 0, nullptr, nullptr)) {
    raise(Errc::io_failure, "key PEM encode failed: " + ossl::last_error());
  }
  char* data = nullptr;
  long len = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(len));
}

inline ossl::PkeyPtr key_from_pem(std::string_view pem) {
  ossl::BioPtr bio{BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size()))};
  ossl::PkeyPtr key{PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr)};
  if (!key) raise(Errc::parse_failure, "bad private key PEM: " + ossl::last_error());
  return key;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) raise(Errc::io_failure, "cannot read '" + path.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data,
                       bool owner_only = false) {
  std::ofstream out{path, std::ios::binary | std::ios::trunc};
  if (!out) raise(Errc::io_failure, "cannot write '" + path.string() + "'");
  out << data;
  out.close();
  if (!out) raise(Errc::io_failure, "write failed for '" + path.string() + "'");
  if (owner_only) ::chmod(path.c_str(), 0600);
}

// ---------------------------------------------------------------------------
// Key and certificate construction

inline ossl::PkeyPtr generate_key(const KeySpec& spec) {
  EVP_PKEY* key = nullptr;
  if (spec.type == KeySpec::Type::rsa) {
    key = EVP_PKEY_Q_keygen(nullptr, nullptr, "RSA", static_cast<size_t>(spec.rsa_bits));
  } else {
    key = EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256");
  }
  if (!key) raise(Errc::io_failure, "key generation failed: " + ossl::last_error());
  return ossl::PkeyPtr{key};
}

namespace cert_detail {

inline void set_subject_cn(X509* cert, const std::string& cn) {
  X509_NAME* name = X509_get_subject_name(cert);
  if (!X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_UTF8,
                                  reinterpret_cast<const unsigned char*>(cn.c_str()), -1,
                                  -1, 0)) {
    raise(Errc::io_failure, "cannot set subject: " + ossl::last_error());
  }
}

inline void set_random_serial(X509* cert) {
  ossl::BnPtr bn{BN_new()};
  if (!bn || !BN_rand(bn.get(), 63, BN_RAND_TOP_ANY, BN_RAND_BOTTOM_ANY)) {
    raise(Errc::io_failure, "serial generation failed");
  }
  ossl::Asn1IntPtr serial{BN_to_ASN1_INTEGER(bn.get(), nullptr)};
  if (!serial || !X509_set_serialNumber(cert, serial.get())) {
    raise(Errc::io_failure, "cannot set serial");
  }
}

inline void set_validity(X509* cert, std::time_t now, int days) {
  if (!X509_time_adj_ex(X509_getm_notBefore(cert), 0, 0, &now) ||
      !X509_time_adj_ex(X509_getm_notAfter(cert), days, 0, &now)) {
    raise(Errc::io_failure, "cannot set validity window");
  }
}

inline void add_conf_ext(X509* cert, X509* issuer, int nid, const char* value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
  ossl::ExtPtr ext{X509V3_EXT_nconf_nid(nullptr, &ctx, nid, value)};
  if (!ext || !X509_add_ext(cert, ext.get(), -1)) {
    raise(Errc::io_failure, std::string("cannot add extension: ") + ossl::last_error());
  }
}

inline void add_policy_ext(X509* cert, policy::Action action, const std::string& payload) {
  ossl::Asn1ObjPtr obj{OBJ_txt2obj(policy_oid(action).c_str(), 1)};
  ossl::Asn1OctPtr oct{ASN1_OCTET_STRING_new()};
  if (!obj || !oct ||
      !ASN1_OCTET_STRING_set(oct.get(),
                             reinterpret_cast<const unsigned char*>(payload.data()),
                             static_cast<int>(payload.size()))) {
    raise(Errc::io_failure, "cannot build policy extension");
  }
  // non-critical: generic TLS stacks must not reject the handshake over
  // authorization metadata they do not understand
  ossl::ExtPtr ext{X509_EXTENSION_create_by_OBJ(nullptr, obj.get(), 0, oct.get())};
  if (!ext || !X509_add_ext(cert, ext.get(), -1)) {
    raise(Errc::io_failure, "cannot attach policy extension");
  }
}

/// Rule lines for one action: `allow /pattern` / `deny /pattern`, newline
/// terminated, in the profile's normalized order (deny first, then source).
inline std::string policy_ext_payload(const policy::PolicyProfile& profile,
                                      policy::Action action) {
  std::string payload;
  for (const auto& rule : profile.rules()) {
    if (rule.action != action) continue;
    payload += std::string(policy::effect_name(rule.effect)) + " " + rule.scope.source() + "\n";
  }
  return payload;
}

}  // namespace cert_detail

/// Leaf certificate plus private key plus CA chain (root last).
struct CertificateBundle {
  ossl::X509Ptr cert;
  ossl::PkeyPtr key;
  std::vector<ossl::X509Ptr> chain;
};

// ---------------------------------------------------------------------------
// CA store

/// Advisory exclusive lock over a CA directory; issuance is single-writer.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) {
    fd_ = ::open((dir / ".lock").c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) raise(Errc::io_failure, "cannot open lock file in " + dir.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      raise(Errc::io_failure, "cannot lock CA directory " + dir.string());
    }
  }
  ~DirectoryLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

/// An opened CA directory: one key+certificate per level, root first.
class CaStore {
 public:
  static CaStore open(const std::filesystem::path& dir) {
    CaStore store;
    store.dir_ = dir;
    if (!std::filesystem::exists(dir / "root.cert.pem")) {
      raise(Errc::ca_unavailable, "no CA at '" + dir.string() + "'");
    }
    store.certs_.push_back(cert_from_pem(read_file(dir / "root.cert.pem")));
    store.keys_.push_back(key_from_pem(read_file(dir / "root.key.pem")));
    for (int level = 1;; ++level) {
      auto cert_path = dir / ("intermediate." + std::to_string(level) + ".cert.pem");
      if (!std::filesystem::exists(cert_path)) break;
      store.certs_.push_back(cert_from_pem(read_file(cert_path)));
      store.keys_.push_back(key_from_pem(
          read_file(dir / ("intermediate." + std::to_string(level) + ".key.pem"))));
    }
    return store;
  }

  const std::filesystem::path& dir() const { return dir_; }
  std::size_t depth() const { return certs_.size(); }
  X509* signing_cert() const { return certs_.back().get(); }
  EVP_PKEY* signing_key() const { return keys_.back().get(); }
  X509* root() const { return certs_.front().get(); }

  /// Issuer chain, deepest CA first, root last.
  std::vector<ossl::X509Ptr> chain() const {
    std::vector<ossl::X509Ptr> out;
    for (auto it = certs_.rbegin(); it != certs_.rend(); ++it) {
      out.push_back(ossl::up_ref(it->get()));
    }
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::vector<ossl::X509Ptr> certs_;
  std::vector<ossl::PkeyPtr> keys_;
};

struct ChainSummary {
  std::vector<std::string> subjects;  // root first
  std::filesystem::path dir;
};

/// Creates the CA hierarchy described by the config under `out_dir`.
/// Refuses to touch a directory that already holds a CA.
inline ChainSummary init_ca(const KeyserverConfig& config,
                            const std::filesystem::path& out_dir, std::time_t now) {
  if (config.ca_levels.empty()) raise(Errc::config_invalid, "config has no CA levels");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) raise(Errc::io_failure, "cannot create '" + out_dir.string() + "'");
  DirectoryLock lock{out_dir};
  if (std::filesystem::exists(out_dir / "root.cert.pem")) {
    raise(Errc::already_initialized, "CA already present at '" + out_dir.string() + "'");
  }

  ChainSummary summary;
  summary.dir = out_dir;
  std::vector<ossl::X509Ptr> certs;
  std::vector<ossl::PkeyPtr> keys;

  for (std::size_t level = 0; level < config.ca_levels.size(); ++level) {
    const CaLevel& spec = config.ca_levels[level];
    auto key = generate_key(spec.key);
    ossl::X509Ptr cert{X509_new()};
    if (!cert) raise(Errc::io_failure, "X509_new failed");
    X509_set_version(cert.get(), 2);
    cert_detail::set_random_serial(cert.get());
    cert_detail::set_subject_cn(cert.get(), spec.common_name);
    X509* issuer_cert = level == 0 ? cert.get() : certs[level - 1].get();
    EVP_PKEY* issuer_key = level == 0 ? key.get() : keys[level - 1].get();
    if (!X509_set_issuer_name(cert.get(), X509_get_subject_name(issuer_cert))) {
      raise(Errc::io_failure, "cannot set issuer");
    }
    cert_detail::set_validity(cert.get(), now, spec.validity_days);
    if (!X509_set_pubkey(cert.get(), key.get())) raise(Errc::io_failure, "cannot set pubkey");
    cert_detail::add_conf_ext(cert.get(), issuer_cert, NID_basic_constraints,
                              "critical,CA:TRUE");
    cert_detail::add_conf_ext(cert.get(), issuer_cert, NID_key_usage,
                              "critical,keyCertSign,cRLSign");
    cert_detail::add_conf_ext(cert.get(), cert.get(), NID_subject_key_identifier, "hash");
    cert_detail::add_conf_ext(cert.get(), issuer_cert, NID_authority_key_identifier,
                              "keyid:always");
    if (!X509_sign(cert.get(), issuer_key, EVP_sha256())) {
      raise(Errc::io_failure, "CA signing failed: " + ossl::last_error());
    }
    summary.subjects.push_back(spec.common_name);
    certs.push_back(std::move(cert));
    keys.push_back(std::move(key));
  }

  for (std::size_t level = 0; level < certs.size(); ++level) {
    const std::string stem =
        level == 0 ? "root" : "intermediate." + std::to_string(level);
    write_file(out_dir / (stem + ".cert.pem"), cert_to_pem(certs[level].get()));
    write_file(out_dir / (stem + ".key.pem"), key_to_pem(keys[level].get()),
               /*owner_only=*/true);
  }
  std::string chain_pem;
  for (auto it = certs.rbegin(); it != certs.rend(); ++it) {
    chain_pem += cert_to_pem(it->get());
  }
  write_file(out_dir / "ca_chain.pem", chain_pem);
  return summary;
}

// ---------------------------------------------------------------------------
// Node certificate issuance

/// Issues a node certificate whose CN is the canonical node name and whose
/// policy extensions embed the profile, one OID per action present. The
/// extension payload is a pure function of the profile.
inline CertificateBundle issue_node_cert(const names::NamespacePath& node_name,
                                         const policy::PolicyProfile& profile,
                                         const KeyserverConfig& config,
                                         const CaStore& ca, std::time_t now) {
  if (node_name.is_root()) {
    raise(Errc::bad_subject, "node name must not be the root namespace");
  }
  if (profile.subject() != node_name) {
    raise(Errc::subject_mismatch, "profile subject '" + profile.subject().str() +
                                      "' does not match node '" + node_name.str() + "'");
  }
  DirectoryLock lock{ca.dir()};

  const NodeCertSettings settings = config.settings_for(node_name);
  auto key = generate_key(settings.key);

  ossl::X509Ptr cert{X509_new()};
  if (!cert) raise(Errc::io_failure, "X509_new failed");
  X509_set_version(cert.get(), 2);
  cert_detail::set_random_serial(cert.get());
  cert_detail::set_subject_cn(cert.get(), node_name.str());
  if (!X509_set_issuer_name(cert.get(), X509_get_subject_name(ca.signing_cert()))) {
    raise(Errc::io_failure, "cannot set issuer");
  }
  cert_detail::set_validity(cert.get(), now, settings.validity_days);
  if (!X509_set_pubkey(cert.get(), key.get())) raise(Errc::io_failure, "cannot set pubkey");

  cert_detail::add_conf_ext(cert.get(), ca.signing_cert(), NID_basic_constraints,
                            "critical,CA:FALSE");
  cert_detail::add_conf_ext(cert.get(), ca.signing_cert(), NID_key_usage,
                            "critical,digitalSignature");
  cert_detail::add_conf_ext(cert.get(), ca.signing_cert(), NID_ext_key_usage,
                            "clientAuth,serverAuth");
  cert_detail::add_conf_ext(cert.get(), cert.get(), NID_subject_key_identifier, "hash");
  cert_detail::add_conf_ext(cert.get(), ca.signing_cert(), NID_authority_key_identifier,
                            "keyid:always");

  for (policy::Action action : policy::kAllActions) {
    const std::string payload = cert_detail::policy_ext_payload(profile, action);
    if (!payload.empty()) cert_detail::add_policy_ext(cert.get(), action, payload);
  }

  if (!X509_sign(cert.get(), ca.signing_key(), EVP_sha256())) {
    raise(Errc::io_failure, "node cert signing failed: " + ossl::last_error());
  }

  CertificateBundle bundle;
  bundle.cert = std::move(cert);
  bundle.key = std::move(key);
  bundle.chain = ca.chain();
  return bundle;
}

// ---------------------------------------------------------------------------
// Extension parsing and chain verification

inline names::NamespacePath subject_node_name(X509* cert) {
  X509_NAME* name = X509_get_subject_name(cert);
  int idx = X509_NAME_get_index_by_NID(name, NID_commonName, -1);
  if (idx < 0) raise(Errc::bad_subject, "certificate has no common name");
  X509_NAME_ENTRY* entry = X509_NAME_get_entry(name, idx);
  ASN1_STRING* data = X509_NAME_ENTRY_get_data(entry);
  unsigned char* utf8 = nullptr;
  int len = ASN1_STRING_to_UTF8(&utf8, data);
  if (len < 0) raise(Errc::bad_subject, "undecodable common name");
  std::string cn(reinterpret_cast<char*>(utf8), static_cast<std::size_t>(len));
  OPENSSL_free(utf8);
  try {
    return names::parse_path(cn);
  } catch (const Error& e) {
    raise(Errc::bad_subject, std::string("common name is not a graph name: ") + e.what());
  }
}

/// Inverse of the issuance embedding. OIDs outside the policy arc are
/// ignored; anything inside the arc must decode cleanly.
inline policy::PolicyProfile parse_policy_extensions(X509* cert) {
  const auto subject = subject_node_name(cert);
  const std::string arc_prefix = std::string(kPolicyOidArc) + ".";

  std::vector<policy::PolicyRule> rules;
  const int ext_count = X509_get_ext_count(cert);
  for (int i = 0; i < ext_count; ++i) {
    X509_EXTENSION* ext = X509_get_ext(cert, i);
    char oid[128];
    OBJ_obj2txt(oid, sizeof(oid), X509_EXTENSION_get_object(ext), 1);
    std::string_view oid_text{oid};
    if (!oid_text.starts_with(arc_prefix)) continue;

    const std::string_view suffix = oid_text.substr(arc_prefix.size());
    policy::Action action{};
    bool known = false;
    for (policy::Action a : policy::kAllActions) {
      if (suffix == std::to_string(policy::action_oid_index(a))) {
        action = a;
        known = true;
        break;
      }
    }
    if (!known) {
      raise(Errc::extension_malformed, "unknown policy OID " + std::string(oid_text));
    }

    ASN1_OCTET_STRING* data = X509_EXTENSION_get_data(ext);
    std::string_view payload{
        reinterpret_cast<const char*>(ASN1_STRING_get0_data(data)),
        static_cast<std::size_t>(ASN1_STRING_length(data))};
    if (payload.empty()) {
      raise(Errc::extension_malformed, "empty policy extension " + std::string(oid_text));
    }

    std::size_t start = 0;
    while (start < payload.size()) {
      std::size_t end = payload.find('\n', start);
      std::string_view line = payload.substr(
          start, end == std::string_view::npos ? std::string_view::npos : end - start);
      start = end == std::string_view::npos ? payload.size() : end + 1;
      if (line.empty()) continue;
      policy::Effect effect;
      std::string_view rest;
      if (line.starts_with("allow ")) {
        effect = policy::Effect::allow;
        rest = line.substr(6);
      } else if (line.starts_with("deny ")) {
        effect = policy::Effect::deny;
        rest = line.substr(5);
      } else {
        raise(Errc::extension_malformed,
              "bad policy entry '" + std::string(line) + "' in " + std::string(oid_text));
      }
      policy::GlobPattern pattern;
      try {
        pattern = policy::compile_pattern(std::string(rest));
      } catch (const Error& e) {
        raise(Errc::extension_malformed, std::string("bad policy pattern: ") + e.what());
      }
      rules.push_back(policy::PolicyRule{effect, action, std::move(pattern)});
    }
  }
  return policy::PolicyProfile{subject, std::move(rules)};
}

struct VerifiedIdentity {
  names::NamespacePath node;
  policy::PolicyProfile profile;
};

/// Verifies `cert` up to `trusted_root` at time `now` and returns the
/// authenticated identity with its embedded profile. The clock is a
/// parameter, never ambient time.
inline VerifiedIdentity verify_chain(X509* cert, const std::vector<X509*>& intermediates,
                                     X509* trusted_root, std::time_t now) {
  ossl::StorePtr store{X509_STORE_new()};
  if (!store || !X509_STORE_add_cert(store.get(), trusted_root)) {
    raise(Errc::io_failure, "cannot build trust store");
  }
  STACK_OF(X509)* untrusted = sk_X509_new_null();
  if (!untrusted) raise(Errc::io_failure, "out of memory");
  for (X509* c : intermediates) sk_X509_push(untrusted, c);

  ossl::StoreCtxPtr ctx{X509_STORE_CTX_new()};
  if (!ctx || !X509_STORE_CTX_init(ctx.get(), store.get(), cert, untrusted)) {
    sk_X509_free(untrusted);
    raise(Errc::io_failure, "cannot init verification");
  }
  X509_VERIFY_PARAM_set_time(X509_STORE_CTX_get0_param(ctx.get()), now);

  const int ok = X509_verify_cert(ctx.get());
  const int err = X509_STORE_CTX_get_error(ctx.get());
  sk_X509_free(untrusted);

  if (ok != 1) {
    const std::string detail = X509_verify_cert_error_string(err);
    switch (err) {
      case X509_V_ERR_CERT_HAS_EXPIRED:
        raise(Errc::expired, detail);
      case X509_V_ERR_CERT_NOT_YET_VALID:
        raise(Errc::not_yet_valid, detail);
      case X509_V_ERR_UNABLE_TO_GET_ISSUER_CERT:
      case X509_V_ERR_UNABLE_TO_GET_ISSUER_CERT_LOCALLY:
      case X509_V_ERR_SELF_SIGNED_CERT_IN_CHAIN:
      case X509_V_ERR_DEPTH_ZERO_SELF_SIGNED_CERT:
      case X509_V_ERR_UNABLE_TO_VERIFY_LEAF_SIGNATURE:
        raise(Errc::untrusted_root, detail);
      default:
        raise(Errc::signature_invalid, detail);
    }
  }

  VerifiedIdentity identity;
  identity.node = subject_node_name(cert);
  identity.profile = parse_policy_extensions(cert);
  return identity;
}

// ---------------------------------------------------------------------------
// Keystore layout

inline constexpr char kKeystoreKeyFile[] = "node.key.pem";
inline constexpr char kKeystoreCertFile[] = "node.cert.pem";
inline constexpr char kKeystoreChainFile[] = "ca_chain.pem";

inline void write_keystore(const std::filesystem::path& dir, const CertificateBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) raise(Errc::io_failure, "cannot create keystore '" + dir.string() + "'");
  write_file(dir / kKeystoreKeyFile, key_to_pem(bundle.key.get()), /*owner_only=*/true);
  write_file(dir / kKeystoreCertFile, cert_to_pem(bundle.cert.get()));
  std::string chain;
  for (const auto& c : bundle.chain) chain += cert_to_pem(c.get());
  write_file(dir / kKeystoreChainFile, chain);
}

/// A node's credentials on disk: private key, certificate, CA chain
/// (root last).
class Keystore {
 public:
  static Keystore load(const std::filesystem::path& dir) {
    Keystore ks;
    ks.dir_ = dir;
    ks.key_ = key_from_pem(read_file(dir / kKeystoreKeyFile));
    ks.cert_ = cert_from_pem(read_file(dir / kKeystoreCertFile));
    ks.chain_ = certs_from_pem(read_file(dir / kKeystoreChainFile));
    return ks;
  }

  const std::filesystem::path& dir() const { return dir_; }
  X509* cert() const { return cert_.get(); }
  EVP_PKEY* key() const { return key_.get(); }
  const std::vector<ossl::X509Ptr>& chain() const { return chain_; }
  X509* trusted_root() const { return chain_.back().get(); }

  /// Intermediates only (everything in the chain except the root).
  std::vector<X509*> intermediates() const {
    std::vector<X509*> out;
    for (std::size_t i = 0; i + 1 < chain_.size(); ++i) out.push_back(chain_[i].get());
    return out;
  }

  names::NamespacePath node_name() const { return subject_node_name(cert_.get()); }
  policy::PolicyProfile profile() const { return parse_policy_extensions(cert_.get()); }

 private:
  std::filesystem::path dir_;
  ossl::X509Ptr cert_;
  ossl::PkeyPtr key_;
  std::vector<ossl::X509Ptr> chain_;
};

/// Colon-separated uppercase hex SHA-256 of the certificate DER.
inline std::string cert_fingerprint_sha256(X509* cert) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!X509_digest(cert, EVP_sha256(), digest, &len)) {
    raise(Errc::io_failure, "digest failed");
  }
  static const char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    if (i) out += ':';
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace sros::pki

#endif  // SROS_PKI_HPP_

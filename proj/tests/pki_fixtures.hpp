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

// Shared test fixtures: throwaway CA + node keystores under a temp dir.

#ifndef SROS_TESTS_PKI_FIXTURES_HPP_
#define SROS_TESTS_PKI_FIXTURES_HPP_

#include <atomic>
#include <ctime>
#include <filesystem>
#include <random>
#include <string>

#include "sros/pki.hpp"

namespace fixtures {

inline std::filesystem::path fresh_dir(const std::string& tag) {
  static std::mt19937_64 rng{std::random_device{}()};
  auto dir = std::filesystem::temp_directory_path() /
             ("sroskit_" + tag + "_" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

struct ScopedDir {
  std::filesystem::path path;
  explicit ScopedDir(const std::string& tag) : path(fresh_dir(tag)) {}
  ~ScopedDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  ScopedDir(const ScopedDir&) = delete;
  ScopedDir& operator=(const ScopedDir&) = delete;
};

inline sros::pki::KeyserverConfig ec_config(bool with_intermediate = false) {
  static std::atomic<int> counter{0};
  const std::string tag = std::to_string(++counter);
  nlohmann::json j = {
      {"ca", {{"common_name", "sroskit test root " + tag}, {"key_type", "ecdsa-p256"}}},
      {"node_defaults", {{"key_type", "ecdsa-p256"}, {"validity_days", 30}}},
  };
  if (with_intermediate) {
    j["ca"]["intermediate"] = {{"common_name", "sroskit test intermediate " + tag},
                               {"key_type", "ecdsa-p256"}};
  }
  return sros::pki::KeyserverConfig::from_json(j);
}

/// CA plus a set of node keystores, all EC P-256 for speed.
class TestPki {
 public:
  explicit TestPki(bool with_intermediate = false)
      : dir_("pki"), config_(ec_config(with_intermediate)) {
    now_ = std::time(nullptr);
    sros::pki::init_ca(config_, ca_dir(), now_);
    ca_ = sros::pki::CaStore::open(ca_dir());
  }

  std::filesystem::path ca_dir() const { return dir_.path / "ca"; }
  const sros::pki::CaStore& ca() const { return *ca_; }
  const sros::pki::KeyserverConfig& config() const { return config_; }
  std::time_t now() const { return now_; }

  /// Issues a node keystore from profile text rules (no header needed).
  std::filesystem::path make_node(const std::string& name, const std::string& rules) {
    auto node = sros::names::parse_path(name);
    auto profile = sros::policy::parse_profile("profile " + name + "\n" + rules);
    auto bundle = sros::pki::issue_node_cert(node, profile, config_, *ca_, now_);
    std::string dirname = name.substr(1);
    for (auto& c : dirname)
      if (c == '/') c = '.';
    auto ks_dir = dir_.path / "nodes" / dirname;
    sros::pki::write_keystore(ks_dir, bundle);
    return ks_dir;
  }

 private:
  ScopedDir dir_;
  sros::pki::KeyserverConfig config_;
  std::optional<sros::pki::CaStore> ca_;
  std::time_t now_;
};

}  // namespace fixtures

#endif  // SROS_TESTS_PKI_FIXTURES_HPP_

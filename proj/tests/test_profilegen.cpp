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

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "sros/profilegen.hpp"

using namespace sros;
using namespace sros::profilegen;
using names::parse_path;

namespace {

std::string read_golden(const std::string& name) {
  std::ifstream in{std::string(SROS_TEST_GOLDEN_DIR) + "/" + name};
  REQUIRE(in);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

NodeManifest manifest(std::vector<std::string> primitives,
                      std::vector<std::string> extra = {},
                      const std::string& node = "/talker") {
  NodeManifest m;
  m.node_name = parse_path(node);
  m.executable_path = "/opt/sroskit/talker";
  m.primitives = std::move(primitives);
  m.extra_rules = std::move(extra);
  return m;
}

}  // namespace

TEST_CASE("golden files") {
  CHECK(generate(manifest({"node-base"})) == read_golden("node_base.profile"));
  CHECK(generate(manifest({"node-base", "python-runtime"})) ==
        read_golden("python_runtime.profile"));
  CHECK(generate(manifest({"node-base", "cpp-runtime"})) ==
        read_golden("cpp_runtime.profile"));
  CHECK(generate(manifest({"node-base", "network-tls"})) ==
        read_golden("network_tls.profile"));
  CHECK(generate(manifest({"node-base", "keystore-read:/etc/sroskit/keys/talker"})) ==
        read_golden("keystore_read.profile"));
  CHECK(generate(manifest({"node-base", "log-write:/var/log/sroskit"})) ==
        read_golden("log_write.profile"));
  CHECK(generate(manifest({"node-base", "python-runtime", "cpp-runtime", "network-tls",
                           "keystore-read:/etc/sroskit/keys/talker",
                           "log-write:/var/log/sroskit"},
                          {"/dev/ttyUSB0 rw,"}, "/ns/talker")) ==
        read_golden("combined.profile"));
}

TEST_CASE("generation is order independent") {
  std::vector<std::string> primitives = {"node-base", "python-runtime", "network-tls",
                                         "log-write:/var/log/sroskit"};
  auto reference = generate(manifest(primitives));
  std::mt19937 rng{3};
  for (int i = 0; i < 10; ++i) {
    std::shuffle(primitives.begin(), primitives.end(), rng);
    CHECK(generate(manifest(primitives)) == reference);
  }
}

TEST_CASE("manifest validation") {
  auto expect = [](Errc code, NodeManifest m) {
    try {
      generate(m);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  expect(Errc::unknown_primitive, manifest({"gpu"}));
  expect(Errc::missing_param, manifest({"keystore-read"}));
  expect(Errc::invalid_path, manifest({"keystore-read:relative/dir"}));
  expect(Errc::config_invalid, manifest({"node-base:/oops"}));
  auto bad_exe = manifest({"node-base"});
  bad_exe.executable_path = "relative/bin";
  expect(Errc::invalid_path, bad_exe);
}

TEST_CASE("manifest json parsing") {
  auto j = nlohmann::json::parse(R"({
    "node_name": "/ns/talker",
    "executable_path": "/opt/x",
    "primitives": ["node-base"],
    "extra_rules": ["/dev/video0 r,"]
  })");
  auto m = manifest_from_json(j);
  CHECK(m.node_name.str() == "/ns/talker");
  CHECK(m.executable_path == "/opt/x");
  CHECK(m.primitives == std::vector<std::string>{"node-base"});
  CHECK(m.extra_rules == std::vector<std::string>{"/dev/video0 r,"});

  CHECK_THROWS_AS(manifest_from_json(nlohmann::json::parse(R"({"node_name": "/x"})")),
                  Error);
}

TEST_CASE("sanitized profile names") {
  CHECK(sanitize_profile_name(parse_path("/talker")) == ".talker");
  CHECK(sanitize_profile_name(parse_path("/ns/talker")) == ".ns.talker");
}

TEST_CASE("lint accepts every generated profile") {
  CHECK(lint(generate(manifest({"node-base"}))).empty());
  CHECK(lint(generate(manifest({"node-base", "python-runtime", "cpp-runtime",
                                "network-tls", "keystore-read:/k", "log-write:/l"})))
            .empty());
}

TEST_CASE("lint findings") {
  auto base = generate(manifest({"node-base"}));

  SECTION("root-wide write") {
    auto text = base;
    text.insert(text.rfind('}'), "  / rw,\n");
    auto findings = lint(text);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].message.find("filesystem-wide write") != std::string::npos);
  }
  SECTION("glob root write") {
    auto text = base;
    text.insert(text.rfind('}'), "  /** w,\n");
    CHECK(lint(text).size() == 1);
  }
  SECTION("capability") {
    auto text = base;
    text.insert(text.rfind('}'), "  capability net_admin,\n");
    auto findings = lint(text);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].message.find("capability") != std::string::npos);
  }
  SECTION("missing node-base") {
    auto findings = lint(
        "profile .x /bin/x {\n"
        "  /etc/ld.so.cache r,\n"
        "}\n");
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].message.find("node-base") != std::string::npos);
  }
  SECTION("read-only root access is not flagged") {
    auto text = base;
    text.insert(text.rfind('}'), "  /** r,\n");
    CHECK(lint(text).empty());
  }
}

TEST_CASE("lint parse failures") {
  auto expect_parse_failure = [](const std::string& text) {
    try {
      lint(text);
      FAIL("expected ParseFailure");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::parse_failure);
    }
  };
  expect_parse_failure("complete garbage\n");
  expect_parse_failure("");
  expect_parse_failure("profile .x /bin/x {\n");                      // unclosed
  expect_parse_failure("profile .x /bin/x {\n  what is this\n}\n");   // bad rule
  expect_parse_failure("profile .x /bin/x {\n  /path zz,\n}\n");      // bad perms
  expect_parse_failure("/rule r,\n");                                 // no header
}

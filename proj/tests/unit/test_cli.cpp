// Copyright 2026 The popnet Authors.
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


#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "popnet/embedding.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string output;
};

Outcome popnet_cli(const std::string& args) {
  const auto log = popnet::testing::temp_path("cli_output.txt");
  const std::string cmd = std::string(POPNET_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

}  // namespace

TEST_CASE("command line: synth, collapse and embed-deepwalk on 1,000 persons") {
  const auto dir = popnet::testing::temp_path("cli_run");
  fs::remove_all(dir);
  const auto config = popnet::testing::temp_path("cli.toml");
  {
    std::ofstream f(config);
    f << "[synth]\nn_persons = 1000\nn_municipalities = 4\ngrid_side = 2\n[deepwalk]\nepochs = 2\n";
  }
  const std::string common = "--config " + config.string() + " --out " + dir.string();
  for (const char* stage : {"synth", "collapse", "embed-deepwalk"}) {
    const auto r = popnet_cli(std::string(stage) + " " + common);
    INFO(r.output);
    CHECK(r.code == 0);
  }
  const auto e = popnet::read_embedding(dir / "deepwalk.pneb");
  CHECK(e.rows == 1000);
  CHECK(e.dim == 32);
  CHECK(fs::exists(dir / "embed-deepwalk.manifest.json"));

  const auto shown = popnet_cli("config " + common + " --set deepwalk.window=2 --threads 3");
  CHECK(shown.code == 0);
  CHECK(shown.output.find("\"window\": 2") != std::string::npos);
  CHECK(shown.output.find("\"threads\": 3") != std::string::npos);
  fs::remove_all(dir);
  fs::remove(config);
}

TEST_CASE("command line: exit codes") {
  const auto dir = popnet::testing::temp_path("cli_errors");
  fs::remove_all(dir);
  const std::string out = " --out " + dir.string();

  auto r = popnet_cli("collapse" + out);
  CHECK(r.code == 3);
  CHECK(r.output.find("popnet synth") != std::string::npos);

  r = popnet_cli("synth --set synth.bogus=1" + out);
  CHECK(r.code == 2);
  CHECK(r.output.find("synth.bogus") != std::string::npos);

  r = popnet_cli("synth --set synth.school_group_size=0" + out);
  CHECK(r.code == 2);

  r = popnet_cli("frobnicate");
  CHECK(r.code == 2);

  r = popnet_cli("--help");
  CHECK(r.code == 0);
  fs::remove_all(dir);
}

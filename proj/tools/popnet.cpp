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


#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "popnet/common.hpp"
#include "popnet/config.hpp"
#include "popnet/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> percentile;
};

popnet::Json build_config(const Options& o) {
  popnet::Json cfg = o.config_path.empty() ? popnet::default_config() : popnet::load_config(o.config_path);
  for (const auto& s : o.overrides) popnet::apply_override(cfg, s);
  if (o.threads) popnet::apply_override(cfg, "threads=" + std::to_string(*o.threads));
  if (o.seed) popnet::apply_override(cfg, "seed=" + std::to_string(*o.seed));
  if (o.out) cfg["paths"]["out"] = *o.out;
  if (o.percentile) cfg["report"]["percentile"] = *o.percentile;
  return cfg;
}

int run(const std::vector<popnet::Stage>& stages, const Options& o) {
  const auto cfg = build_config(o);
  for (auto stage : stages) {
    const auto result = popnet::run_stage(stage, cfg);
    std::cout << popnet::stage_name(stage) << ": wrote " << result.artifacts.size() << " artifact(s); manifest "
              << result.manifest.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"popnet: population-network embedding pipeline"};
  app.require_subcommand(1);
  Options o;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", o.config_path, "TOML config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.overrides, "Override a config key, e.g. --set synth.n_persons=1000");
    cmd->add_option("--threads", o.threads, "Worker threads (sets the `threads` key)");
    cmd->add_option("--seed", o.seed, "Global seed (sets the `seed` key)");
    cmd->add_option("-o,--out", o.out, "Run directory (sets `paths.out`)");
  };

  std::vector<popnet::Stage> selected;
  for (auto stage : popnet::all_stages()) {
    auto* cmd = app.add_subcommand(std::string(popnet::stage_name(stage)));
    add_common(cmd);
    if (stage == popnet::Stage::report)
      cmd->add_option("--percentile", o.percentile, "Group-pair percentile threshold in [50, 100]");
    cmd->callback([&selected, stage] { selected = {stage}; });
  }
  auto* all = app.add_subcommand("all", "Run every stage in order");
  add_common(all);
  all->callback([&selected] { selected = popnet::all_stages(); });
  auto* show = app.add_subcommand("config", "Print the resolved config as JSON");
  add_common(show);
  bool print_config = false;
  show->callback([&print_config] { print_config = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (print_config) {
      std::cout << build_config(o).dump(2) << '\n';
      return 0;
    }
    return run(selected, o);
  } catch (const std::exception& e) {
    std::cerr << "popnet: error: " << e.what() << '\n';
    return popnet::exit_code_for(e);
  }
}

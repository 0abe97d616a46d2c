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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "popnet/config.hpp"

namespace popnet {

enum class Stage : std::uint8_t {
  synth,
  collapse,
  embed_deepwalk,
  embed_line,
  dine,
  predict,
  shapley,
  utility,
  report
};

/// Subcommand name, e.g. "embed-deepwalk".
std::string_view stage_name(Stage s);
/// Throws ConfigError for unknown names.
Stage parse_stage(std::string_view name);
/// Every stage in dependency order.
const std::vector<Stage>& all_stages();

/// Seed of one stage, derived from the global seed and the stage name.
std::uint64_t stage_seed(std::uint64_t seed, Stage s);

struct StageResult {
  std::vector<std::filesystem::path> artifacts;
  std::filesystem::path manifest;
  Json summary;
};

/// Runs one stage with a resolved config. Artifacts go to `paths.out`; the
/// run manifest is `<stage>.manifest.json` beside them. A missing input is a
/// DataError naming the subcommand that produces it.
StageResult run_stage(Stage stage, const Json& config);

/// Exit status for an exception escaping run_stage: 2 config, 3 data,
/// 4 numerical, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace popnet

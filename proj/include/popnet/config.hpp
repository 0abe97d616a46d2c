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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace popnet {

/// Insertion-ordered JSON; config key order is part of the config hash.
using Json = nlohmann::ordered_json;

/// Parses the TOML subset used for pipeline configs: `[table]` headers,
/// dotted and quoted keys, basic and literal strings, integers, floats,
/// booleans, arrays (may span lines) and inline tables. Errors are
/// ConfigError with the 1-based line number.
Json parse_toml(std::string_view text);

/// Parses one TOML value, e.g. the right-hand side of `--set key=value`.
Json parse_toml_value(std::string_view text);

/// Pipeline defaults for every stage.
Json default_config();

/// Overlays `user` onto the defaults. Unknown keys and type mismatches are
/// ConfigError naming the dotted key path. Tables listed as open maps
/// (education levels, outcome coefficients) are replaced wholesale.
Json resolve_config(const Json& user);

/// Applies `key.path=value`; the value is read as TOML, falling back to a
/// bare string. The key path must exist after resolution.
void apply_override(Json& config, std::string_view assignment);

/// Reads a TOML file and overlays it on the defaults.
Json load_config(const std::filesystem::path& path);

/// fnv1a of the canonical dump.
std::uint64_t config_hash(const Json& config);

}  // namespace popnet

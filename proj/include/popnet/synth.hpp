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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "popnet/attributes.hpp"
#include "popnet/graph.hpp"

namespace popnet {

struct EducationLevel {
  std::string name;
  double probability = 0.0;
};

struct SynthConfig {
  std::size_t n_persons = 10000;
  std::size_t n_municipalities = 16;
  std::size_t grid_side = 4;
  double municipality_zipf = 0.8;
  /// Household sizes take the two integers around the mean, so an integral
  /// mean gives households of exactly that size.
  double household_size_mean = 2.5;
  std::size_t school_group_size = 25;
  std::size_t workplace_size = 20;
  std::size_t neighbor_k = 10;
  std::vector<EducationLevel> education_levels = {
      {"vocational", 0.4}, {"bachelor", 0.35}, {"university", 0.25}};
  /// Indexed by Layer.
  std::array<double, kLayerCount> homophily_strength = {0.0, 0.8, 0.8, 0.8, 0.9};
  double commute_probability = 0.3;
  double family_link_probability = 0.6;
  std::map<std::string, double> outcome_coefficients = {
      {"education=vocational", 1.5}, {"education=university", -1.5}};
  double outcome_intercept = -0.5;
  double not_voted_fraction = 0.1;
  double missing_fraction = 0.05;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

enum class Outcome : std::uint8_t { populist = 0, non_populist, not_voted, missing };

inline constexpr std::size_t kOutcomeCount = 4;

std::string_view outcome_name(Outcome o);
Outcome parse_outcome(std::string_view name);

struct OutcomeDraw {
  std::vector<double> probability;
  std::vector<Outcome> label;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Population {
  MultilayerGraph graph;
  AttributeTable attributes;
  std::vector<double> outcome_probability;
  std::vector<Outcome> outcome;

  // Generator state kept for layer audits.
  std::vector<Point> position;
  std::vector<std::uint32_t> household;
  std::vector<std::uint32_t> municipality;
  std::vector<std::uint32_t> education;
};

Population generate_population(const SynthConfig& cfg, std::uint64_t seed);

/// Logistic outcome model over the attribute table. Keys are either a numeric
/// column name or an indicator `column=value`; an unknown key is a ConfigError.
/// Missing values contribute nothing to the linear predictor.
OutcomeDraw plant_outcome(const AttributeTable& attributes,
                          const std::map<std::string, double>& coefficients,
                          double intercept, std::uint64_t seed,
                          double not_voted_fraction = 0.0, double missing_fraction = 0.0);

/// Columns node_id, probability, label.
void write_ground_truth(const Population& pop, const std::filesystem::path& path);
/// Labels in the order of `ids`. Ids absent from the file read as missing;
/// rows for ids outside `ids` are skipped.
std::vector<Outcome> load_ground_truth(const std::filesystem::path& path, const IdMap& ids);

/// Writes edges.tsv, attributes.tsv and ground_truth.tsv into `dir`.
void write_population(const Population& pop, const std::filesystem::path& dir);

}  // namespace popnet

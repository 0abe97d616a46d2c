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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popnet/common.hpp"
#include "popnet/graph.hpp"

namespace popnet {

/// Mean per-dimension product of the two rows: (1/D) H(u) . H(v).
double avg_similarity(const RowMatrix& H, NodeId u, NodeId v);

/// Marginal contribution of dimension d to the similarity of u and v, with the
/// similarity over the remaining D-1 dimensions averaged over D-1:
/// mu_d = (1/D) (a_d - mean_{q != d} a_q), a_q = H(u,q) H(v,q).
/// Throws DataError when D < 2 and std::out_of_range when d >= D.
double edge_utility(const RowMatrix& H, NodeId u, NodeId v, std::size_t d);

/// Same value computed as the difference of the two averaged similarities.
double edge_utility_by_exclusion(const RowMatrix& H, NodeId u, NodeId v, std::size_t d);

struct GroupPairUtility {
  std::uint32_t m = 0;
  std::uint32_t n = 0;  // m <= n
  double gamma = 0.0;
  std::size_t edges = 0;
};

struct UtilityScores {
  std::size_t dimension = 0;
  /// Indexed by CollapsedGraph edge index.
  std::vector<double> per_edge;
  std::vector<double> per_node_strength;
  /// Only group pairs joined by at least one edge, ordered by (m, n).
  std::vector<GroupPairUtility> per_group;
  std::map<std::uint32_t, double> per_group_strength;
};

/// Per-edge utilities and node strengths for dimension d.
UtilityScores compute_utility(const RowMatrix& H, const CollapsedGraph& g, std::size_t d,
                              unsigned threads = 1);

/// S_d(u): sum of utilities over the edges incident to u.
std::vector<double> utility_strength(std::span<const double> per_edge, const CollapsedGraph& g);

/// Mean utility over the edges joining each unordered group pair. Within-group
/// edges are counted once; pairs with no edges are omitted.
std::vector<GroupPairUtility> group_utility(std::span<const double> per_edge,
                                            const CollapsedGraph& g,
                                            std::span<const std::uint32_t> node_group);

/// Q_d(m) = sum over the present pairs (m, n), including n = m.
std::map<std::uint32_t, double> group_strength(std::span<const GroupPairUtility> pairs);

struct Summary {
  double mean = 0.0;
  /// Sample standard deviation; 0 for fewer than two values.
  double sd = 0.0;
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

/// One summary per relation type of g (aligned with g.relations()). An edge
/// carrying k relation types contributes to all k.
std::vector<Summary> aggregate_by_relation(std::span<const double> per_edge,
                                           const CollapsedGraph& g);

/// Summary of node values per category; missing cells form the "missing" group.
std::map<std::string, Summary> aggregate_by_attribute(
    std::span<const double> node_values, std::span<const std::optional<std::string>> categories);

struct Correlation {
  double r = 0.0;
  std::size_t pairs = 0;
};

/// Pearson correlation over the pairs where both values are present (not
/// NaN). Fewer than two pairs or zero variance is a DataError.
Correlation pearson(std::span<const double> x, std::span<const double> y);

struct FeatureImportance {
  std::string feature;
  double mean_abs = 0.0;
};

/// Embedding features are named `dim_<k>`. Returns the k with the largest
/// mean |Shapley value|; ties go to the smallest k. DataError if none present.
std::size_t select_dimension(std::span<const FeatureImportance> importance);

/// Nearest-rank percentile: the value at 1-based rank ceil(p/100 * N) of the
/// sorted values (rank 1 for p = 0). p must lie in [0, 100].
double nearest_rank_percentile(std::vector<double> values, double p);

/// Group pairs with gamma strictly above the p-th or strictly below the
/// (100 - p)-th nearest-rank percentile, for p >= 50.
std::vector<GroupPairUtility> extreme_group_pairs(std::span<const GroupPairUtility> pairs,
                                                  double p);

}  // namespace popnet

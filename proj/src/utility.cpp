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


#include "popnet/utility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "parallel.hpp"

namespace popnet {

namespace {

void check_dimension(const RowMatrix& H, std::size_t d) {
  if (H.cols() < 2) throw DataError("edge utility needs at least two dimensions");
  if (d >= static_cast<std::size_t>(H.cols()))
    throw std::out_of_range("dimension " + std::to_string(d) + " out of range");
}

void check_nodes(const RowMatrix& H, const CollapsedGraph& g) {
  if (static_cast<std::size_t>(H.rows()) != g.node_count())
    throw DataError("embedding has " + std::to_string(H.rows()) + " rows, graph has " +
                    std::to_string(g.node_count()) + " nodes");
}

}  // namespace

double avg_similarity(const RowMatrix& H, NodeId u, NodeId v) {
  return H.row(u).dot(H.row(v)) / static_cast<double>(H.cols());
}

double edge_utility(const RowMatrix& H, NodeId u, NodeId v, std::size_t d) {
  check_dimension(H, d);
  const auto D = static_cast<double>(H.cols());
  const double total = H.row(u).dot(H.row(v));
  const double a_d = H(u, d) * H(v, d);
  return (a_d - (total - a_d) / (D - 1)) / D;
}

double edge_utility_by_exclusion(const RowMatrix& H, NodeId u, NodeId v, std::size_t d) {
  check_dimension(H, d);
  const auto D = static_cast<std::size_t>(H.cols());
  double rest = 0.0;
  for (std::size_t q = 0; q < D; ++q)
    if (q != d) rest += H(u, q) * H(v, q);
  return avg_similarity(H, u, v) - rest / static_cast<double>(D - 1);
}

UtilityScores compute_utility(const RowMatrix& H, const CollapsedGraph& g, std::size_t d,
                              unsigned threads) {
  check_dimension(H, d);
  check_nodes(H, g);
  UtilityScores s;
  s.dimension = d;
  s.per_edge.resize(g.edge_count());
  detail::parallel_chunks(g.edge_count(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t e = begin; e < end; ++e)
      s.per_edge[e] = edge_utility(H, g.edge_source(e), g.edge_target(e), d);
  });
  s.per_node_strength = utility_strength(s.per_edge, g);
  return s;
}

std::vector<double> utility_strength(std::span<const double> per_edge, const CollapsedGraph& g) {
  if (per_edge.size() != g.edge_count()) throw DataError("per-edge utilities do not match the graph");
  std::vector<double> strength(g.node_count(), 0.0);
  for (NodeId u = 0; u < g.node_count(); ++u)
    for (auto e : g.incident_edges(u)) strength[u] += per_edge[e];
  return strength;
}

std::vector<GroupPairUtility> group_utility(std::span<const double> per_edge,
                                            const CollapsedGraph& g,
                                            std::span<const std::uint32_t> node_group) {
  if (per_edge.size() != g.edge_count()) throw DataError("per-edge utilities do not match the graph");
  if (node_group.size() != g.node_count()) throw DataError("group assignment does not cover every node");
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<double, std::size_t>> acc;
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    auto a = node_group[g.edge_source(e)];
    auto b = node_group[g.edge_target(e)];
    if (a > b) std::swap(a, b);
    auto& [sum, count] = acc[{a, b}];
    sum += per_edge[e];
    ++count;
  }
  std::vector<GroupPairUtility> out;
  out.reserve(acc.size());
  for (const auto& [key, value] : acc)
    out.push_back({key.first, key.second, value.first / static_cast<double>(value.second), value.second});
  return out;
}

std::map<std::uint32_t, double> group_strength(std::span<const GroupPairUtility> pairs) {
  std::map<std::uint32_t, double> q;
  for (const auto& p : pairs) {
    q[p.m] += p.gamma;
    if (p.n != p.m) q[p.n] += p.gamma;
  }
  return q;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  if (s.count < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.count - 1));
  return s;
}

std::vector<Summary> aggregate_by_relation(std::span<const double> per_edge,
                                           const CollapsedGraph& g) {
  if (per_edge.size() != g.edge_count()) throw DataError("per-edge utilities do not match the graph");
  std::vector<std::vector<double>> groups(g.relations().size());
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    for (auto r : g.edge_relations(e)) groups[r].push_back(per_edge[e]);
  std::vector<Summary> out;
  for (const auto& values : groups) out.push_back(summarize(values));
  return out;
}

std::map<std::string, Summary> aggregate_by_attribute(
    std::span<const double> node_values, std::span<const std::optional<std::string>> categories) {
  if (node_values.size() != categories.size()) throw DataError("attribute column does not match node values");
  std::map<std::string, std::vector<double>> groups;
  for (std::size_t i = 0; i < node_values.size(); ++i)
    groups[categories[i].value_or("missing")].push_back(node_values[i]);
  std::map<std::string, Summary> out;
  for (const auto& [key, values] : groups) out[key] = summarize(values);
  return out;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: vectors differ in length");
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    sx += x[i];
    sy += y[i];
    ++n;
  }
  if (n < 2) throw DataError("pearson: fewer than two complete pairs");
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: zero variance");
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), n};
}

std::size_t select_dimension(std::span<const FeatureImportance> importance) {
  std::optional<std::size_t> best;
  double best_value = 0.0;
  for (const auto& f : importance) {
    if (!f.feature.starts_with("dim_")) continue;
    std::size_t k = 0;
    const char* first = f.feature.data() + 4;
    const char* last = f.feature.data() + f.feature.size();
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec != std::errc() || ptr != last || first == last) continue;
    if (!best || f.mean_abs > best_value || (f.mean_abs == best_value && k < *best)) {
      best = k;
      best_value = f.mean_abs;
    }
  }
  if (!best) throw DataError("importance report has no embedding dimension features");
  return *best;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::vector<GroupPairUtility> extreme_group_pairs(std::span<const GroupPairUtility> pairs,
                                                  double p) {
  if (!(p >= 50.0 && p <= 100.0)) throw ConfigError("percentile filter must lie in [50, 100]");
  if (pairs.empty()) return {};
  std::vector<double> gammas;
  for (const auto& x : pairs) gammas.push_back(x.gamma);
  const double hi = nearest_rank_percentile(gammas, p);
  const double lo = nearest_rank_percentile(gammas, 100.0 - p);
  std::vector<GroupPairUtility> out;
  for (const auto& x : pairs)
    if (x.gamma > hi || x.gamma < lo) out.push_back(x);
  return out;
}

}  // namespace popnet

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
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "popnet/common.hpp"

namespace popnet {

enum class Layer : std::uint8_t { neighbors = 0, colleagues, family, household, classmates };

inline constexpr std::size_t kLayerCount = 5;

std::string_view layer_name(Layer layer);
/// Throws DataError for names outside the five context layers.
Layer parse_layer(std::string_view name);

struct RelationType {
  Layer layer = Layer::neighbors;
  std::string subtype;

  auto operator<=>(const RelationType&) const = default;
  bool operator==(const RelationType&) const = default;

  /// "layer" or "layer:subtype".
  std::string label() const;
};

/// Bijection between external string ids and dense internal ids, in order of
/// first appearance.
class IdMap {
 public:
  NodeId intern(std::string_view external);
  /// Throws DataError when the id is unknown.
  NodeId at(std::string_view external) const;
  bool contains(std::string_view external) const;
  const std::string& external(NodeId id) const { return externals_.at(id); }
  std::size_t size() const { return externals_.size(); }
  const std::vector<std::string>& externals() const { return externals_; }

  static IdMap sequential(std::size_t n);

 private:
  std::unordered_map<std::string, NodeId> lookup_;
  std::vector<std::string> externals_;
};

struct RawEdge {
  NodeId source;
  NodeId target;
  std::uint32_t relation;  // index into MultilayerGraph::relations()
};

/// Raw ingestion form: typed edge lists per layer over one node universe.
class MultilayerGraph {
 public:
  MultilayerGraph();

  NodeId add_node(std::string_view external) { return ids_.intern(external); }
  /// Rejects self-loops and out-of-range endpoints.
  void add_edge(NodeId source, NodeId target, const RelationType& rel);
  std::uint32_t intern_relation(const RelationType& rel);

  std::size_t node_count() const { return ids_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const IdMap& ids() const { return ids_; }
  const std::vector<RawEdge>& edges() const { return edges_; }
  const std::vector<RelationType>& relations() const { return relations_; }

  bool directed(Layer layer) const { return directed_[static_cast<std::size_t>(layer)]; }
  void set_directed(Layer layer, bool value) { directed_[static_cast<std::size_t>(layer)] = value; }

 private:
  IdMap ids_;
  std::vector<RawEdge> edges_;
  std::vector<RelationType> relations_;
  std::array<bool, kLayerCount> directed_{};
};

/// Reads the `source\ttarget\tlayer\tsubtype` TSV. The subtype column may be
/// omitted. Errors carry the 1-based line number.
MultilayerGraph load_edge_file(const std::filesystem::path& path);
MultilayerGraph read_edge_tsv(std::istream& in);
void write_edge_file(const MultilayerGraph& g, const std::filesystem::path& path);

/// Undirected, unweighted, deduplicated graph in compressed sparse rows.
///
/// Edges are indexed 0..m-1 in lexicographic order of (min, max) endpoint.
/// Each adjacency slot also records the index of its undirected edge, so
/// per-edge arrays can be read while iterating neighbors.
class CollapsedGraph {
 public:
  CollapsedGraph() : offsets_{0} {}

  /// Builds from undirected pairs; duplicates and orientation are collapsed.
  /// Self-loops and out-of-range ids throw DataError.
  static CollapsedGraph from_pairs(std::size_t n,
                                   std::span<const std::pair<NodeId, NodeId>> pairs);

  std::size_t node_count() const { return offsets_.size() - 1; }
  std::size_t edge_count() const { return edge_u_.size(); }

  /// Throws std::out_of_range for v >= n.
  std::span<const NodeId> neighbors(NodeId v) const;
  std::size_t degree(NodeId v) const;
  /// Edge indices aligned with neighbors(v).
  std::span<const std::uint64_t> incident_edges(NodeId v) const;

  NodeId edge_source(std::size_t e) const { return edge_u_[e]; }
  NodeId edge_target(std::size_t e) const { return edge_v_[e]; }
  /// Index of edge {u, v}, or -1 when absent.
  std::int64_t find_edge(NodeId u, NodeId v) const;

  /// Relation types carried by edge e (indices into relations()).
  std::span<const std::uint32_t> edge_relations(std::size_t e) const;
  /// Relation types carried by pair {u, v}; empty if not an edge.
  std::span<const std::uint32_t> relation_lookup(NodeId u, NodeId v) const;
  const std::vector<RelationType>& relations() const { return relations_; }

  const std::vector<std::uint64_t>& offsets() const { return offsets_; }
  const std::vector<NodeId>& neighbor_ids() const { return neighbors_; }
  const IdMap& ids() const { return ids_; }
  void set_ids(IdMap ids);

  friend bool operator==(const CollapsedGraph& a, const CollapsedGraph& b) {
    return a.offsets_ == b.offsets_ && a.neighbors_ == b.neighbors_;
  }

 private:
  friend CollapsedGraph symmetrize_collapse(const MultilayerGraph& g);
  friend CollapsedGraph read_graph_cache(const std::filesystem::path& path);

  void build_from_sorted(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& pairs);

  std::vector<std::uint64_t> offsets_;
  std::vector<NodeId> neighbors_;
  std::vector<std::uint64_t> slot_edge_;
  std::vector<NodeId> edge_u_;
  std::vector<NodeId> edge_v_;
  std::vector<std::uint64_t> rel_offsets_{0};
  std::vector<std::uint32_t> rel_ids_;
  std::vector<RelationType> relations_;
  IdMap ids_;
};

/// Adds reverse directions, keeps unique pairs, merges all layers. The
/// relation-type set of every pair is the union over the raw edges joining it.
CollapsedGraph symmetrize_collapse(const MultilayerGraph& g);

/// Binary cache: "PNGC", u32 version, u64 n, u64 edge count, u64 offsets[n+1],
/// u64 neighbors[2m], all little-endian. Holds structure only; relation sets
/// and external ids are not part of the cache.
void write_graph_cache(const CollapsedGraph& g, const std::filesystem::path& path);
CollapsedGraph read_graph_cache(const std::filesystem::path& path);

}  // namespace popnet

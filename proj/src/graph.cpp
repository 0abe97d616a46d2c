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


#include "popnet/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "text_util.hpp"

namespace popnet {

namespace {

constexpr std::array<std::string_view, kLayerCount> kLayerNames = {
    "neighbors", "colleagues", "family", "household", "classmates"};

constexpr std::uint32_t kGraphCacheVersion = 1;

}  // namespace

std::string_view layer_name(Layer layer) { return kLayerNames.at(static_cast<std::size_t>(layer)); }

Layer parse_layer(std::string_view name) {
  for (std::size_t i = 0; i < kLayerNames.size(); ++i) {
    if (kLayerNames[i] == name) return static_cast<Layer>(i);
  }
  throw DataError("unknown layer '" + std::string(name) + "'");
}

std::string RelationType::label() const {
  std::string out(layer_name(layer));
  if (!subtype.empty()) {
    out += ':';
    out += subtype;
  }
  return out;
}

// ---------------------------------------------------------------------------
// IdMap

NodeId IdMap::intern(std::string_view external) {
  auto [it, inserted] = lookup_.try_emplace(std::string(external), externals_.size());
  if (inserted) externals_.emplace_back(external);
  return it->second;
}

NodeId IdMap::at(std::string_view external) const {
  auto it = lookup_.find(std::string(external));
  if (it == lookup_.end()) throw DataError("unknown node id '" + std::string(external) + "'");
  return it->second;
}

bool IdMap::contains(std::string_view external) const {
  return lookup_.find(std::string(external)) != lookup_.end();
}

IdMap IdMap::sequential(std::size_t n) {
  IdMap ids;
  ids.externals_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.intern(std::to_string(i));
  return ids;
}

// ---------------------------------------------------------------------------
// MultilayerGraph

MultilayerGraph::MultilayerGraph() {
  // Neighbor and colleague relations are directed in the source registers.
  set_directed(Layer::neighbors, true);
  set_directed(Layer::colleagues, true);
}

std::uint32_t MultilayerGraph::intern_relation(const RelationType& rel) {
  auto it = std::find(relations_.begin(), relations_.end(), rel);
  if (it != relations_.end()) return static_cast<std::uint32_t>(it - relations_.begin());
  relations_.push_back(rel);
  return static_cast<std::uint32_t>(relations_.size() - 1);
}

void MultilayerGraph::add_edge(NodeId source, NodeId target, const RelationType& rel) {
  if (source == target) {
    throw DataError("self-loop on node '" + ids_.external(source) + "'");
  }
  if (source >= node_count() || target >= node_count()) {
    throw DataError("edge endpoint out of range");
  }
  edges_.push_back({source, target, intern_relation(rel)});
}

MultilayerGraph read_edge_tsv(std::istream& in) {
  MultilayerGraph g;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) return g;
  ++lineno;
  {
    const auto header = detail::split(detail::chomp(line), '\t');
    if (header.size() < 3 || header[0] != "source" || header[1] != "target" || header[2] != "layer") {
      throw DataError("line 1: expected header 'source\\ttarget\\tlayer\\tsubtype'");
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::chomp(line);
    if (text.empty()) continue;
    const auto fields = detail::split(text, '\t');
    if (fields.size() < 3 || fields.size() > 4 || fields[0].empty() || fields[1].empty()) {
      throw DataError("line " + std::to_string(lineno) + ": expected 3 or 4 tab-separated fields");
    }
    RelationType rel;
    try {
      rel.layer = parse_layer(fields[2]);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (fields.size() == 4) rel.subtype = std::string(fields[3]);
    if (fields[0] == fields[1]) {
      throw DataError("line " + std::to_string(lineno) + ": self-loop on node '" +
                      std::string(fields[0]) + "'");
    }
    const NodeId s = g.add_node(fields[0]);
    const NodeId t = g.add_node(fields[1]);
    g.add_edge(s, t, rel);
  }
  return g;
}

MultilayerGraph load_edge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge file " + path.string());
  try {
    return read_edge_tsv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_edge_file(const MultilayerGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write edge file " + path.string());
  out << "source\ttarget\tlayer\tsubtype\n";
  for (const auto& e : g.edges()) {
    const auto& rel = g.relations()[e.relation];
    out << g.ids().external(e.source) << '\t' << g.ids().external(e.target) << '\t'
        << layer_name(rel.layer) << '\t' << rel.subtype << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// CollapsedGraph

void CollapsedGraph::build_from_sorted(std::size_t n,
                                       const std::vector<std::pair<NodeId, NodeId>>& pairs) {
  const std::size_t m = pairs.size();
  offsets_.assign(n + 1, 0);
  for (const auto& [u, v] : pairs) {
    ++offsets_[u + 1];
    ++offsets_[v + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
  neighbors_.resize(2 * m);
  slot_edge_.resize(2 * m);
  edge_u_.resize(m);
  edge_v_.resize(m);
  std::vector<std::uint64_t> cursor(offsets_.begin(), offsets_.end() - 1);
  // Pairs are sorted by (u, v) with u < v, so filling in pair order leaves
  // every row ascending: lower neighbors arrive before higher ones.
  for (std::size_t e = 0; e < m; ++e) {
    const auto [u, v] = pairs[e];
    edge_u_[e] = u;
    edge_v_[e] = v;
    neighbors_[cursor[u]] = v;
    slot_edge_[cursor[u]++] = e;
    neighbors_[cursor[v]] = u;
    slot_edge_[cursor[v]++] = e;
  }
}

CollapsedGraph CollapsedGraph::from_pairs(std::size_t n,
                                          std::span<const std::pair<NodeId, NodeId>> pairs) {
  std::vector<std::pair<NodeId, NodeId>> canon;
  canon.reserve(pairs.size());
  for (auto [u, v] : pairs) {
    if (u == v) throw DataError("self-loop on node " + std::to_string(u));
    if (u >= n || v >= n) throw DataError("edge endpoint out of range");
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
  CollapsedGraph g;
  g.build_from_sorted(n, canon);
  g.rel_offsets_.assign(canon.size() + 1, 0);
  g.ids_ = IdMap::sequential(n);
  return g;
}

CollapsedGraph symmetrize_collapse(const MultilayerGraph& mg) {
  struct Item {
    NodeId u, v;
    std::uint32_t rel;
    auto operator<=>(const Item&) const = default;
  };
  std::vector<Item> items;
  items.reserve(mg.edge_count());
  for (const auto& e : mg.edges()) {
    items.push_back({std::min(e.source, e.target), std::max(e.source, e.target), e.relation});
  }
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());

  std::vector<std::pair<NodeId, NodeId>> pairs;
  CollapsedGraph g;
  g.rel_ids_.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i == 0 || items[i].u != items[i - 1].u || items[i].v != items[i - 1].v) {
      if (i != 0) g.rel_offsets_.push_back(g.rel_ids_.size());
      pairs.emplace_back(items[i].u, items[i].v);
    }
    g.rel_ids_.push_back(items[i].rel);
  }
  if (!items.empty()) g.rel_offsets_.push_back(g.rel_ids_.size());
  g.build_from_sorted(mg.node_count(), pairs);
  g.relations_ = mg.relations();
  g.ids_ = mg.ids();
  return g;
}

std::span<const NodeId> CollapsedGraph::neighbors(NodeId v) const {
  if (v >= node_count()) throw std::out_of_range("node id " + std::to_string(v) + " out of range");
  return {neighbors_.data() + offsets_[v], neighbors_.data() + offsets_[v + 1]};
}

std::size_t CollapsedGraph::degree(NodeId v) const {
  if (v >= node_count()) throw std::out_of_range("node id " + std::to_string(v) + " out of range");
  return offsets_[v + 1] - offsets_[v];
}

std::span<const std::uint64_t> CollapsedGraph::incident_edges(NodeId v) const {
  if (v >= node_count()) throw std::out_of_range("node id " + std::to_string(v) + " out of range");
  return {slot_edge_.data() + offsets_[v], slot_edge_.data() + offsets_[v + 1]};
}

std::int64_t CollapsedGraph::find_edge(NodeId u, NodeId v) const {
  if (u >= node_count() || v >= node_count()) return -1;
  const auto row = neighbors(u);
  auto it = std::lower_bound(row.begin(), row.end(), v);
  if (it == row.end() || *it != v) return -1;
  return static_cast<std::int64_t>(slot_edge_[offsets_[u] + (it - row.begin())]);
}

std::span<const std::uint32_t> CollapsedGraph::edge_relations(std::size_t e) const {
  if (e + 1 >= rel_offsets_.size()) return {};
  return {rel_ids_.data() + rel_offsets_[e], rel_ids_.data() + rel_offsets_[e + 1]};
}

std::span<const std::uint32_t> CollapsedGraph::relation_lookup(NodeId u, NodeId v) const {
  const auto e = find_edge(u, v);
  if (e < 0) return {};
  return edge_relations(static_cast<std::size_t>(e));
}

void CollapsedGraph::set_ids(IdMap ids) {
  if (ids.size() != node_count()) throw DataError("id table size does not match node count");
  ids_ = std::move(ids);
}

void write_graph_cache(const CollapsedGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write graph cache " + path.string());
  out.write("PNGC", 4);
  detail::write_le<std::uint32_t>(out, kGraphCacheVersion);
  detail::write_le<std::uint64_t>(out, g.node_count());
  detail::write_le<std::uint64_t>(out, g.edge_count());
  detail::write_le_array<std::uint64_t>(out, g.offsets());
  detail::write_le_array<std::uint64_t>(out, g.neighbor_ids());
  if (!out) throw DataError("failed writing " + path.string());
}

CollapsedGraph read_graph_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open graph cache " + path.string());
  detail::expect_magic(in, "PNGC", path.string());
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kGraphCacheVersion) {
    throw DataError(path.string() + ": unsupported graph cache version " + std::to_string(version));
  }
  const auto n = detail::read_le<std::uint64_t>(in, "node count");
  const auto m = detail::read_le<std::uint64_t>(in, "edge count");
  std::vector<std::uint64_t> offsets(n + 1);
  std::vector<NodeId> nbrs(2 * m);
  detail::read_le_array<std::uint64_t>(in, offsets, "offsets");
  detail::read_le_array<NodeId>(in, nbrs, "neighbors");
  if (offsets.front() != 0 || offsets.back() != 2 * m ||
      !std::is_sorted(offsets.begin(), offsets.end())) {
    throw DataError(path.string() + ": inconsistent offsets");
  }
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(m);
  for (NodeId u = 0; u < n; ++u) {
    for (auto s = offsets[u]; s < offsets[u + 1]; ++s) {
      const NodeId v = nbrs[s];
      if (v >= n || v == u) throw DataError(path.string() + ": invalid neighbor entry");
      if (u < v) pairs.emplace_back(u, v);
    }
  }
  if (pairs.size() != m) throw DataError(path.string() + ": adjacency is not symmetric");
  CollapsedGraph g = CollapsedGraph::from_pairs(n, pairs);
  if (g.neighbor_ids() != nbrs) throw DataError(path.string() + ": adjacency rows not canonical");
  return g;
}

}  // namespace popnet

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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "popnet/synth.hpp"
#include "test_support.hpp"

using namespace popnet;
using popnet::testing::temp_path;

namespace {

SynthConfig small_config(std::size_t n = 2000) {
  SynthConfig cfg;
  cfg.n_persons = n;
  cfg.n_municipalities = 4;
  cfg.grid_side = 2;
  cfg.school_group_size = 10;
  cfg.workplace_size = 8;
  cfg.neighbor_k = 5;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

using Pair = std::pair<NodeId, NodeId>;

Pair ordered(NodeId a, NodeId b) { return a < b ? Pair{a, b} : Pair{b, a}; }

// Undirected pairs per layer, with the relation subtype of each raw edge.
std::map<Layer, std::vector<std::pair<Pair, std::string>>> by_layer(const MultilayerGraph& g) {
  std::map<Layer, std::vector<std::pair<Pair, std::string>>> out;
  for (const auto& e : g.edges()) {
    const auto& rel = g.relations()[e.relation];
    out[rel.layer].push_back({ordered(e.source, e.target), rel.subtype});
  }
  return out;
}

// Every connected component of the pair set is a clique; returns component sizes.
std::vector<std::size_t> clique_components(std::size_t n, const std::vector<Pair>& pairs) {
  std::vector<std::set<NodeId>> adj(n);
  for (auto [u, v] : pairs) {
    adj[u].insert(v);
    adj[v].insert(u);
  }
  std::vector<bool> seen(n);
  std::vector<std::size_t> sizes;
  for (NodeId s = 0; s < n; ++s) {
    if (seen[s] || adj[s].empty()) continue;
    std::vector<NodeId> comp{s};
    seen[s] = true;
    for (std::size_t i = 0; i < comp.size(); ++i)
      for (NodeId w : adj[comp[i]])
        if (!seen[w]) {
          seen[w] = true;
          comp.push_back(w);
        }
    for (NodeId v : comp) REQUIRE(adj[v].size() == comp.size() - 1);
    sizes.push_back(comp.size());
  }
  return sizes;
}

std::vector<Pair> pairs_of(const std::vector<std::pair<Pair, std::string>>& typed) {
  std::vector<Pair> out;
  for (const auto& [p, s] : typed) out.push_back(p);
  return out;
}

double rate(const std::vector<Outcome>& labels, const std::vector<bool>& mask) {
  double hits = 0, total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask[i]) continue;
    total += 1;
    hits += labels[i] == Outcome::populist;
  }
  return hits / total;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(SynthConfig{}.validate());
  auto cfg = small_config();
  cfg.school_group_size = 600;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.education_levels = {{"a", 0.5}, {"b", 0.4}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.homophily_strength[2] = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.n_municipalities = 5;
  CHECK_THROWS_AS(generate_population(cfg, 1), ConfigError);
}

TEST_CASE("ten households of exactly four persons give 60 household edges in 10 cliques") {
  SynthConfig cfg;
  cfg.n_persons = 40;
  cfg.n_municipalities = 1;
  cfg.grid_side = 1;
  cfg.household_size_mean = 4.0;
  cfg.school_group_size = 4;
  cfg.workplace_size = 4;
  cfg.neighbor_k = 3;
  const auto pop = generate_population(cfg, 11);
  auto layers = by_layer(pop.graph);
  const auto pairs = pairs_of(layers[Layer::household]);
  CHECK(pairs.size() == 60);
  const auto sizes = clique_components(40, pairs);
  CHECK(sizes.size() == 10);
  CHECK(std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 4; }));
}

TEST_CASE("same seed gives byte-identical output files") {
  const auto cfg = small_config(1500);
  const auto a = temp_path("synth_a");
  const auto b = temp_path("synth_b");
  write_population(generate_population(cfg, 5), a);
  write_population(generate_population(cfg, 5), b);
  for (const char* name : {"edges.tsv", "attributes.tsv", "ground_truth.tsv"}) {
    CAPTURE(name);
    CHECK(slurp(a / name) == slurp(b / name));
    CHECK(!slurp(a / name).empty());
  }
  write_population(generate_population(cfg, 6), b);
  CHECK(slurp(a / "edges.tsv") != slurp(b / "edges.tsv"));
}

TEST_CASE("full classmates homophily joins equal education levels only") {
  auto cfg = small_config();
  cfg.homophily_strength[static_cast<std::size_t>(Layer::classmates)] = 1.0;
  const auto pop = generate_population(cfg, 3);
  auto layers = by_layer(pop.graph);
  REQUIRE(!layers[Layer::classmates].empty());
  for (const auto& [p, subtype] : layers[Layer::classmates]) {
    CHECK(pop.education[p.first] == pop.education[p.second]);
    CHECK(subtype == cfg.education_levels[pop.education[p.first]].name);
  }
}

TEST_CASE("every layer follows its construction rule") {
  const auto cfg = small_config(3000);
  const auto pop = generate_population(cfg, 21);
  const std::size_t n = cfg.n_persons;
  auto layers = by_layer(pop.graph);
  const auto ages = pop.attributes.numeric("age");
  REQUIRE(pop.attributes.row_count() == n);
  REQUIRE(pop.graph.node_count() == n);

  SUBCASE("household: disjoint cliques over co-residents") {
    std::map<std::uint32_t, std::size_t> hsize;
    for (auto h : pop.household) ++hsize[h];
    std::size_t expected = 0, max_size = 0;
    for (auto [h, s] : hsize) {
      expected += s * (s - 1) / 2;
      max_size = std::max(max_size, s);
    }
    const auto pairs = pairs_of(layers[Layer::household]);
    CHECK(pairs.size() == expected);
    for (auto [u, v] : pairs) CHECK(pop.household[u] == pop.household[v]);
    clique_components(n, pairs);
    std::vector<std::size_t> degree(n);
    for (auto [u, v] : pairs) ++degree[u], ++degree[v];
    CHECK(*std::max_element(degree.begin(), degree.end()) == max_size - 1);
  }

  SUBCASE("classmates: bounded cliques inside municipality and age band") {
    const auto pairs = pairs_of(layers[Layer::classmates]);
    for (auto [u, v] : pairs) {
      CHECK(pop.municipality[u] == pop.municipality[v]);
      CHECK(std::min(int(ages[u]) / 10, 8) == std::min(int(ages[v]) / 10, 8));
    }
    for (auto s : clique_components(n, pairs)) CHECK(s <= cfg.school_group_size);
  }

  SUBCASE("colleagues: bounded cliques of working-age persons") {
    const auto pairs = pairs_of(layers[Layer::colleagues]);
    REQUIRE(!pairs.empty());
    for (auto [u, v] : pairs) {
      CHECK((ages[u] >= 18 && ages[u] < 67));
      CHECK((ages[v] >= 18 && ages[v] < 67));
    }
    for (auto s : clique_components(n, pairs)) CHECK(s <= cfg.workplace_size);
  }

  SUBCASE("family: a household head linked to members of another household") {
    std::set<std::uint32_t> seen_household;
    std::vector<NodeId> head(n, n);
    for (NodeId v = n; v-- > 0;) head[pop.household[v]] = v;
    REQUIRE(!layers[Layer::family].empty());
    for (const auto& e : pop.graph.edges()) {
      if (pop.graph.relations()[e.relation].layer != Layer::family) continue;
      CHECK(pop.household[e.source] != pop.household[e.target]);
      CHECK(head[pop.household[e.source]] == e.source);
    }
  }

  SUBCASE("neighbors: exactly the k nearest persons in the municipality") {
    std::vector<std::vector<NodeId>> out(n);
    for (const auto& e : pop.graph.edges())
      if (pop.graph.relations()[e.relation].layer == Layer::neighbors)
        out[e.source].push_back(e.target);
    for (NodeId v = 0; v < n; ++v) {
      std::vector<std::pair<double, NodeId>> all;
      for (NodeId w = 0; w < n; ++w) {
        if (w == v || pop.municipality[w] != pop.municipality[v]) continue;
        const double dx = pop.position[w].x - pop.position[v].x;
        const double dy = pop.position[w].y - pop.position[v].y;
        all.push_back({dx * dx + dy * dy, w});
      }
      std::sort(all.begin(), all.end());
      std::vector<NodeId> expect;
      for (std::size_t i = 0; i < std::min(cfg.neighbor_k, all.size()); ++i) expect.push_back(all[i].second);
      std::sort(expect.begin(), expect.end());
      std::sort(out[v].begin(), out[v].end());
      REQUIRE(out[v] == expect);
    }
  }
}

TEST_CASE("attribute table covers every node") {
  const auto cfg = small_config();
  const auto pop = generate_population(cfg, 8);
  for (const char* col : {"education", "municipality", "age", "income_percentile", "gender",
                          "parents_born_abroad", "urbanicity"})
    CHECK(pop.attributes.has_column(col));
  const auto muni = pop.attributes.numeric("municipality");
  const auto income = pop.attributes.numeric("income_percentile");
  for (std::size_t i = 0; i < cfg.n_persons; ++i) {
    CHECK((muni[i] >= 0 && muni[i] < double(cfg.n_municipalities)));
    CHECK((income[i] >= 1 && income[i] <= 100));
  }
}

TEST_CASE("plant_outcome") {
  auto cfg = small_config(10000);
  cfg.n_municipalities = 16;
  cfg.grid_side = 4;
  const auto pop = generate_population(cfg, 2);
  const auto& attrs = pop.attributes;
  const std::size_t n = attrs.row_count();

  SUBCASE("zero model gives a rate near one half") {
    const auto d = plant_outcome(attrs, {}, 0.0, 9);
    const double r = rate(d.label, std::vector<bool>(n, true));
    CHECK(std::abs(r - 0.5) <= 0.02);
  }
  SUBCASE("saturated intercept gives no populist labels") {
    const auto d = plant_outcome(attrs, {{"education=vocational", 3.0}}, -1000.0, 9);
    CHECK(std::count(d.label.begin(), d.label.end(), Outcome::populist) == 0);
  }
  SUBCASE("vocational coefficient raises the vocational rate (two-proportion z test)") {
    const auto d = plant_outcome(attrs, {{"education=vocational", 2.0}}, 0.0, 9);
    const auto edu = attrs.categorical("education");
    std::vector<bool> voc(n), bach(n);
    for (std::size_t i = 0; i < n; ++i) {
      voc[i] = edu[i] == "vocational";
      bach[i] = edu[i] == "bachelor";
    }
    const double n1 = std::count(voc.begin(), voc.end(), true);
    const double n2 = std::count(bach.begin(), bach.end(), true);
    const double p1 = rate(d.label, voc), p2 = rate(d.label, bach);
    const double pooled = (p1 * n1 + p2 * n2) / (n1 + n2);
    const double z = (p1 - p2) / std::sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2));
    CHECK(z > 2.3263478740408408);  // one-sided p < 0.01
  }
  SUBCASE("unknown key is a config error") {
    CHECK_THROWS_AS(plant_outcome(attrs, {{"trust", 1.0}}, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(plant_outcome(attrs, {{"religion=none", 1.0}}, 0.0, 1), ConfigError);
  }
  SUBCASE("numeric coefficient keys use the column value") {
    const auto d = plant_outcome(attrs, {{"income_percentile", 0.01}}, -0.5, 1);
    const auto income = attrs.numeric("income_percentile");
    for (std::size_t i = 0; i < 50; ++i)
      CHECK(d.probability[i] == doctest::Approx(1 / (1 + std::exp(0.5 - 0.01 * income[i]))));
  }
  SUBCASE("rates are monotone in a single coefficient") {
    std::size_t prev = 0;
    for (double c = -3.0; c <= 3.0; c += 0.5) {
      const auto d = plant_outcome(attrs, {{"education=university", c}, {"gender=female", 0.4}},
                                   -0.2, 77, 0.1, 0.05);
      const auto count = static_cast<std::size_t>(std::count(d.label.begin(), d.label.end(), Outcome::populist));
      CHECK(count >= prev);
      prev = count;
    }
  }
  SUBCASE("relabel fractions") {
    const auto d = plant_outcome(attrs, {}, 0.0, 4, 0.2, 0.1);
    const double nv = std::count(d.label.begin(), d.label.end(), Outcome::not_voted) / double(n);
    const double ms = std::count(d.label.begin(), d.label.end(), Outcome::missing) / double(n);
    CHECK(std::abs(nv - 0.2) < 0.02);
    CHECK(std::abs(ms - 0.1) < 0.02);
  }
}

TEST_CASE("ground truth round trip") {
  const auto pop = generate_population(small_config(500), 4);
  const auto dir = temp_path("synth_gt");
  write_population(pop, dir);
  const auto g = load_edge_file(dir / "edges.tsv");
  const auto labels = load_ground_truth(dir / "ground_truth.tsv", g.ids());
  for (NodeId v = 0; v < g.node_count(); ++v)
    CHECK(labels[v] == pop.outcome[std::stoul(g.ids().external(v))]);
  CHECK(parse_outcome("not-voted") == Outcome::not_voted);
  CHECK_THROWS_AS(parse_outcome("abstain"), DataError);
}

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
#include <random>

#include "popnet/csv.hpp"
#include "popnet/utility.hpp"
#include "test_support.hpp"

using namespace popnet;

namespace {

RowMatrix rows(std::initializer_list<std::initializer_list<double>> init) {
  RowMatrix H(init.size(), init.begin()->size());
  Eigen::Index i = 0;
  for (const auto& r : init) {
    Eigen::Index j = 0;
    for (double x : r) H(i, j++) = x;
    ++i;
  }
  return H;
}

CollapsedGraph random_graph(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::uniform_int_distribution<NodeId> node(0, n - 1);
  while (pairs.size() < m) {
    const NodeId u = node(rng), v = node(rng);
    if (u != v) pairs.emplace_back(u, v);
  }
  return CollapsedGraph::from_pairs(n, pairs);
}

RowMatrix random_h(std::mt19937_64& rng, std::size_t n, std::size_t D) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RowMatrix H(n, D);
  for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = unit(rng);
  return H;
}

}  // namespace

TEST_CASE("avg_similarity examples") {
  const auto H = rows({{1, 1, 1, 1}, {1, 1, 1, 1}, {0, 0, 0, 0}, {0.3, -2, 5, 1}});
  CHECK(avg_similarity(H, 0, 1) == 1.0);
  CHECK(avg_similarity(H, 2, 3) == 0.0);
  CHECK(avg_similarity(H, 0, 3) == avg_similarity(H, 3, 0));
}

TEST_CASE("edge_utility examples") {
  SUBCASE("uniform rows give zero utility in every dimension") {
    for (double c : {0.0, 0.4, 1.0, -3.0}) {
      RowMatrix H = RowMatrix::Constant(2, 5, c);
      for (std::size_t d = 0; d < 5; ++d) CHECK(edge_utility(H, 0, 1, d) == doctest::Approx(0.0));
    }
  }
  SUBCASE("D=2 with concordance in the first dimension only") {
    const auto H = rows({{1, 0}, {1, 0}});
    CHECK(edge_utility(H, 0, 1, 0) == doctest::Approx(0.5));
    CHECK(edge_utility(H, 0, 1, 1) == doctest::Approx(-0.5));
    CHECK(edge_utility_by_exclusion(H, 0, 1, 0) == doctest::Approx(0.5));
  }
  SUBCASE("D=4 products (0.9, 0.1, 0.1, 0.1)") {
    const auto H = rows({{0.9, 0.1, 0.1, 0.1}, {1, 1, 1, 1}});
    CHECK(edge_utility(H, 0, 1, 0) == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("errors") {
    const auto H1 = rows({{1}, {1}});
    CHECK_THROWS_AS(edge_utility(H1, 0, 1, 0), DataError);
    const auto H = rows({{1, 0}, {1, 0}});
    CHECK_THROWS_AS(edge_utility(H, 0, 1, 2), std::out_of_range);
  }
}

TEST_CASE("closed form equals the exclusion definition and sums to zero over dimensions") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t D = std::size_t{2} << (t % 3);
    const std::size_t n = 2 + rng() % 49;
    RowMatrix H(n, D);
    for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = val(rng);
    const NodeId u = rng() % n;
    NodeId v = rng() % n;
    if (v == u) v = (u + 1) % n;
    double sum = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double closed = edge_utility(H, u, v, d);
      CHECK(std::abs(closed - edge_utility_by_exclusion(H, u, v, d)) <= 1e-10);
      sum += closed;
    }
    CHECK(std::abs(sum) <= 1e-9);
  }
}

TEST_CASE("sign semantics on crafted rows") {
  // Concordant-high in d, concordant-low in d with others high, uniform.
  const auto H = rows({{0.9, 0.1, 0.1, 0.1}, {0.9, 0.1, 0.1, 0.1},
                       {0.05, 0.9, 0.9, 0.9}, {0.05, 0.9, 0.9, 0.9},
                       {0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}});
  CHECK(edge_utility(H, 0, 1, 0) > 0);
  CHECK(edge_utility(H, 2, 3, 0) < 0);
  CHECK(edge_utility(H, 4, 5, 0) == 0.0);
}

TEST_CASE("utility_strength") {
  SUBCASE("isolated node has zero strength") {
    auto g = CollapsedGraph::from_pairs(3, std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
    const std::vector<double> mu{0.7};
    CHECK(utility_strength(mu, g)[2] == 0.0);
  }
  SUBCASE("star center sums its leaves") {
    const auto g = popnet::testing::star(3);
    const std::vector<double> mu(3, 0.2);
    CHECK(utility_strength(mu, g)[0] == doctest::Approx(0.6));
  }
}

TEST_CASE("conservation on random graphs") {
  std::mt19937_64 rng(5);
  for (std::size_t n : {20u, 300u, 5000u}) {
    const auto g = random_graph(rng, n, 3 * n);
    const auto H = random_h(rng, n, 8);
    const auto s = compute_utility(H, g, 3, 2);
    double edge_sum = 0.0;
    for (double x : s.per_edge) edge_sum += x;
    double node_sum = 0.0;
    for (double x : s.per_node_strength) node_sum += x;
    CHECK(std::abs(node_sum - 2 * edge_sum) <= 1e-9);

    std::vector<std::uint32_t> group(n);
    for (auto& x : group) x = rng() % 7;
    const auto pairs = group_utility(s.per_edge, g, group);
    double weighted = 0.0;
    std::size_t edges = 0;
    for (const auto& p : pairs) {
      weighted += p.gamma * static_cast<double>(p.edges);
      edges += p.edges;
      CHECK(p.m <= p.n);
    }
    CHECK(edges == g.edge_count());
    CHECK(std::abs(weighted - edge_sum) <= 1e-9);
  }
}

TEST_CASE("compute_utility is independent of the worker count") {
  std::mt19937_64 rng(6);
  const auto g = random_graph(rng, 400, 1500);
  const auto H = random_h(rng, 400, 4);
  CHECK(compute_utility(H, g, 1, 1).per_edge == compute_utility(H, g, 1, 3).per_edge);
}

TEST_CASE("group utility examples") {
  std::vector<std::pair<NodeId, NodeId>> pairs{{0, 1}, {1, 2}, {2, 3}};
  const auto g = CollapsedGraph::from_pairs(4, pairs);
  const std::vector<double> mu{0.1, -0.3, 0.5};
  SUBCASE("one group") {
    const std::vector<std::uint32_t> one(4, 0);
    const auto t = group_utility(mu, g, one);
    REQUIRE(t.size() == 1);
    CHECK(t[0].gamma == doctest::Approx(0.1));
    CHECK(group_strength(t).at(0) == doctest::Approx(0.1));
  }
  SUBCASE("single cross edge") {
    const std::vector<std::uint32_t> two{0, 0, 1, 1};
    const auto t = group_utility(mu, g, two);
    REQUIRE(t.size() == 3);
    CHECK((t[1].m == 0 && t[1].n == 1));
    CHECK(t[1].gamma == doctest::Approx(-0.3));
    const auto q = group_strength(t);
    CHECK(q.at(0) == doctest::Approx(0.1 - 0.3));
    CHECK(q.at(1) == doctest::Approx(0.5 - 0.3));
  }
  SUBCASE("symmetric under swapped group labels") {
    const auto a = group_utility(mu, g, std::vector<std::uint32_t>{0, 0, 1, 1});
    const auto b = group_utility(mu, g, std::vector<std::uint32_t>{1, 1, 0, 0});
    CHECK(a[1].gamma == b[1].gamma);
  }
  SUBCASE("empty pairs are omitted from the strength") {
    const auto t = group_utility(mu, g, std::vector<std::uint32_t>{0, 0, 0, 2});
    CHECK(t.size() == 2);
    CHECK(group_strength(t).size() == 2);
  }
}

TEST_CASE("aggregates") {
  MultilayerGraph mg;
  for (int i = 0; i < 6; ++i) mg.add_node(std::to_string(i));
  // Nodes 0..2 form a household clique; a neighbors path runs through all.
  mg.add_edge(0, 1, {Layer::household, ""});
  mg.add_edge(0, 2, {Layer::household, ""});
  mg.add_edge(1, 2, {Layer::household, ""});
  for (NodeId v = 0; v + 1 < 6; ++v) mg.add_edge(v, v + 1, {Layer::neighbors, ""});
  const auto g = symmetrize_collapse(mg);

  SUBCASE("zero utilities give zero means and deviations") {
    const std::vector<double> mu(g.edge_count(), 0.0);
    for (const auto& s : aggregate_by_relation(mu, g)) {
      CHECK(s.mean == 0.0);
      CHECK(s.sd == 0.0);
    }
  }
  SUBCASE("counts cover every relation of every edge") {
    const std::vector<double> mu(g.edge_count(), 1.0);
    std::size_t total = 0, expected = 0;
    for (const auto& s : aggregate_by_relation(mu, g)) total += s.count;
    for (std::size_t e = 0; e < g.edge_count(); ++e) expected += g.edge_relations(e).size();
    CHECK(total == expected);
  }
  SUBCASE("a planted clique dimension lifts its layer above the neutral one") {
    RowMatrix H = RowMatrix::Constant(6, 4, 0.3);
    for (NodeId v = 0; v < 3; ++v) H(v, 2) = 0.95;
    const auto s = compute_utility(H, g, 2);
    const auto agg = aggregate_by_relation(s.per_edge, g);
    std::size_t house = 0, neigh = 0;
    for (std::size_t r = 0; r < g.relations().size(); ++r)
      (g.relations()[r].layer == Layer::household ? house : neigh) = r;
    CHECK(agg[house].mean > agg[neigh].mean);
  }
  SUBCASE("by attribute") {
    const std::vector<double> values{1, 2, 3, 4};
    const std::vector<std::optional<std::string>> cats{"a", "b", "a", std::nullopt};
    const auto out = aggregate_by_attribute(values, cats);
    CHECK(out.at("a").mean == 2.0);
    CHECK(out.at("a").sd == doctest::Approx(std::sqrt(2.0)));
    CHECK(out.at("b").count == 1);
    CHECK(out.at("missing").mean == 4.0);
  }
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 3);
  CHECK(pearson(x, y).r == doctest::Approx(1.0));
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(pearson(x, neg).r == doctest::Approx(-1.0));
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}).r == doctest::Approx(0.5));
  const std::vector<double> xm{1, NAN, 2, 3, 7};
  const std::vector<double> ym{1, 5, 3, 2, NAN};
  const auto c = pearson(xm, ym);
  CHECK(c.pairs == 3);
  CHECK(c.r == doctest::Approx(0.5));
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DataError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), DataError);
}

TEST_CASE("select_dimension") {
  std::vector<FeatureImportance> imp{{"dim_0", 0.1}, {"dim_1", 0.9}, {"dim_2", 0.2}, {"age", 5.0}};
  CHECK(select_dimension(imp) == 1);
  for (auto& f : imp) f.mean_abs *= 3.5;
  CHECK(select_dimension(imp) == 1);
  const std::vector<FeatureImportance> tied{{"dim_2", 0.4}, {"dim_0", 0.4}, {"dim_1", 0.4}};
  CHECK(select_dimension(tied) == 0);
  const std::vector<FeatureImportance> none{{"age", 1.0}, {"dimension", 2.0}};
  CHECK_THROWS_AS(select_dimension(none), DataError);
}

TEST_CASE("nearest-rank percentile and extreme pair filter") {
  std::vector<double> v;
  for (int i = 1; i <= 200; ++i) v.push_back(i);
  CHECK(nearest_rank_percentile(v, 99) == 198);
  CHECK(nearest_rank_percentile(v, 1) == 2);
  CHECK(nearest_rank_percentile(v, 0) == 1);
  CHECK(nearest_rank_percentile(v, 100) == 200);
  CHECK(nearest_rank_percentile({15, 20, 35, 40, 50}, 30) == 20);
  CHECK(nearest_rank_percentile({15, 20, 35, 40, 50}, 40) == 20);
  CHECK(nearest_rank_percentile({15, 20, 35, 40, 50}, 50) == 35);

  std::vector<GroupPairUtility> pairs;
  for (std::uint32_t i = 0; i < 200; ++i) pairs.push_back({i, i, double(i + 1), 1});
  const auto ext = extreme_group_pairs(pairs, 99);
  REQUIRE(ext.size() == 3);
  CHECK(ext[0].gamma == 1);
  CHECK(ext[1].gamma == 199);
  CHECK(ext[2].gamma == 200);
}

TEST_CASE("csv quoting round trip") {
  const auto path = popnet::testing::temp_path("quote.csv");
  {
    CsvWriter w(path);
    w.row({"a", "b,c", "say \"hi\"", "two\nlines"});
    w.row(std::vector<std::string>{"1", "", "3", format_real(0.1)});
    w.close();
  }
  const auto t = read_csv(path);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == std::vector<std::string>{"a", "b,c", "say \"hi\"", "two\nlines"});
  CHECK(t[1] == std::vector<std::string>{"1", "", "3", "0.1"});
  CHECK(format_real(NAN) == "NA");
  CHECK_THROWS_AS(parse_csv("\"open"), DataError);
}

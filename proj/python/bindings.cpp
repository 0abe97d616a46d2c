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


#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <utility>
#include <vector>

#include "popnet/config.hpp"
#include "popnet/deepwalk.hpp"
#include "popnet/dine.hpp"
#include "popnet/embedding.hpp"
#include "popnet/graph.hpp"
#include "popnet/line.hpp"
#include "popnet/pipeline.hpp"
#include "popnet/predict.hpp"
#include "popnet/utility.hpp"

namespace py = pybind11;
using namespace popnet;

namespace {

using EdgeArray = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 2, Eigen::RowMajor>;

CollapsedGraph graph_from(std::size_t n, const EdgeArray& edges) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(static_cast<std::size_t>(edges.rows()));
  for (Eigen::Index i = 0; i < edges.rows(); ++i) {
    if (edges(i, 0) < 0 || edges(i, 1) < 0) throw DataError("negative node index in edge list");
    pairs.emplace_back(static_cast<NodeId>(edges(i, 0)), static_cast<NodeId>(edges(i, 1)));
  }
  return CollapsedGraph::from_pairs(n, pairs);
}

EdgeArray edges_of(const CollapsedGraph& g) {
  EdgeArray out(static_cast<Eigen::Index>(g.edge_count()), 2);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    out(static_cast<Eigen::Index>(e), 0) = static_cast<std::int64_t>(g.edge_source(e));
    out(static_cast<Eigen::Index>(e), 1) = static_cast<std::int64_t>(g.edge_target(e));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "popnet native core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("collapse_edges", [](std::size_t n, const EdgeArray& edges) { return edges_of(graph_from(n, edges)); },
        py::arg("n"), py::arg("edges"),
        "Undirected, deduplicated edge list in (min, max) lexicographic order.");

  m.def(
      "deepwalk",
      [](std::size_t n, const EdgeArray& edges, std::size_t dim, std::size_t window, std::size_t epochs,
         std::size_t walks_per_node, std::size_t walk_length, std::uint64_t seed, unsigned threads) {
        const auto g = graph_from(n, edges);
        py::gil_scoped_release release;
        const auto corpus = generate_walks(g, {walks_per_node, walk_length, seed, threads});
        SgnsConfig c;
        c.dim = dim;
        c.window = window;
        c.epochs = epochs;
        c.seed = seed;
        c.threads = threads;
        return train_sgns(corpus, n, c).embedding().to_matrix();
      },
      py::arg("n"), py::arg("edges"), py::arg("dim") = 32, py::arg("window") = 5, py::arg("epochs") = 20,
      py::arg("walks_per_node") = 10, py::arg("walk_length") = 10, py::arg("seed") = 1, py::arg("threads") = 1);

  m.def(
      "line",
      [](std::size_t n, const EdgeArray& edges, const std::string& order, std::size_t dim_per_order,
         std::size_t epochs, std::uint64_t seed) {
        const auto g = graph_from(n, edges);
        LineConfig c;
        c.dim_per_order = dim_per_order;
        c.epochs = epochs;
        c.seed = seed;
        if (order == "first") return train_line_order(g, LineOrder::first, c).to_matrix();
        if (order == "second") return train_line_order(g, LineOrder::second, c).to_matrix();
        if (order != "both") throw ConfigError("order must be first, second or both");
        const auto a = train_line_order(g, LineOrder::first, c);
        c.seed = derive_seed(seed, 2);
        return concat_orders(a, train_line_order(g, LineOrder::second, c)).to_matrix();
      },
      py::arg("n"), py::arg("edges"), py::arg("order") = "both", py::arg("dim_per_order") = 16,
      py::arg("epochs") = 5, py::arg("seed") = 1);

  m.def(
      "dine",
      [](const RowMatrix& X, const EdgeArray& edges, std::size_t epochs, double lr, std::size_t batch_size,
         double noise_sigma, const std::string& optimizer, std::uint64_t seed) {
        const auto g = graph_from(static_cast<std::size_t>(X.rows()), edges);
        DineConfig c;
        c.epochs = epochs;
        c.lr = lr;
        c.batch_size = batch_size;
        c.noise_sigma = noise_sigma;
        c.seed = seed;
        if (optimizer == "adam") {
          c.optimizer = DineOptimizer::adam;
        } else if (optimizer != "sgd") {
          throw ConfigError("optimizer must be sgd or adam");
        }
        auto r = train_dine(X, g, c);
        std::vector<double> total;
        for (const auto& l : r.history) total.push_back(l.total);
        return py::make_tuple(std::move(r.H), total);
      },
      py::arg("X"), py::arg("edges"), py::arg("epochs") = 50, py::arg("lr") = 0.1, py::arg("batch_size") = 10000,
      py::arg("noise_sigma") = 0.2, py::arg("optimizer") = "sgd", py::arg("seed") = 1,
      "Returns the encoding H of X and the total loss per epoch (index 0 is before training).");

  m.def("avg_similarity", &avg_similarity, py::arg("H"), py::arg("u"), py::arg("v"));

  m.def(
      "edge_utility",
      [](const RowMatrix& H, const EdgeArray& edges, std::size_t d) {
        const auto g = graph_from(static_cast<std::size_t>(H.rows()), edges);
        const auto s = compute_utility(H, g, d);
        return py::make_tuple(edges_of(g), s.per_edge, s.per_node_strength);
      },
      py::arg("H"), py::arg("edges"), py::arg("d"),
      "Returns (edges, per-edge utility, per-node strength) with edges in collapsed order.");

  m.def(
      "macro_auc",
      [](const RowMatrix& P, const std::vector<int>& labels) { return macro_auc(P, labels); },
      py::arg("probabilities"), py::arg("labels"));

  m.def(
      "pearson",
      [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y).r; }, py::arg("x"),
      py::arg("y"));

  m.def(
      "read_embedding",
      [](const std::filesystem::path& path) {
        const auto e = read_embedding(path);
        return py::make_tuple(e.ids, e.to_matrix(), embedding_method_name(e.method), e.dine);
      },
      py::arg("path"), "Returns (ids, matrix, method, dine_flag).");

  m.def("default_config_json", [] { return default_config().dump(); });
  m.def("stage_names", [] {
    std::vector<std::string> names;
    for (auto s : all_stages()) names.emplace_back(stage_name(s));
    return names;
  });
  m.def(
      "run_stage_json",
      [](const std::string& stage, const std::string& config_json, const std::vector<std::string>& overrides) {
        Json cfg = resolve_config(Json::parse(config_json));
        for (const auto& o : overrides) apply_override(cfg, o);
        const Stage s = parse_stage(stage);
        StageResult r;
        {
          py::gil_scoped_release release;
          r = run_stage(s, cfg);
        }
        return py::make_tuple(r.summary.dump(), r.manifest, r.artifacts);
      },
      py::arg("stage"), py::arg("config_json"), py::arg("overrides") = std::vector<std::string>{});
}

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


#include "popnet/line.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "popnet/alias.hpp"
#include "parallel.hpp"
#include "sgd_kernel.hpp"

namespace popnet {

void LineConfig::validate() const {
  if (dim_per_order == 0) throw ConfigError("line.dim_per_order must be positive");
  if (batch_size == 0) throw ConfigError("line.batch_size must be at least 1");
  if (!(lr > 0)) throw ConfigError("line.lr must be positive");
}

EmbeddingMatrix LineModel::embedding() const {
  EmbeddingMatrix e(nodes, dim);
  e.values = vertex;
  e.method = EmbeddingMethod::line;
  return e;
}

namespace {

std::vector<double> degree_weights(const CollapsedGraph& g, double exponent) {
  std::vector<double> w(g.node_count());
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const auto d = static_cast<double>(g.degree(v));
    w[v] = d > 0 ? std::pow(d, exponent) : 0.0;
  }
  return w;
}

template <bool Shared>
void line_samples(const CollapsedGraph& g, const LineConfig& cfg, LineModel& model,
                  const AliasTable& edges, const AliasTable& negatives, std::uint64_t count,
                  SplitMix64& rng, std::atomic<std::uint64_t>& global, std::uint64_t total) {
  const std::size_t dim = model.dim;
  float* targets = model.order == LineOrder::first ? model.vertex.data() : model.context.data();
  std::vector<float> local(dim), grad(dim), scratch(dim);
  std::vector<float*> rows;
  rows.reserve(cfg.negatives + 1);
  float lr = static_cast<float>(cfg.lr);
  std::uint64_t done = 0;
  while (done < count) {
    const std::uint64_t batch = std::min<std::uint64_t>(cfg.batch_size, count - done);
    const std::uint64_t progress = global.fetch_add(batch, std::memory_order_relaxed);
    const double frac = static_cast<double>(progress) / static_cast<double>(std::max<std::uint64_t>(total, 1));
    lr = static_cast<float>(cfg.lr * std::max(1e-4, 1.0 - frac));
    for (std::uint64_t s = 0; s < batch; ++s) {
      const auto e = edges.sample(rng);
      const NodeId ends[2] = {g.edge_source(e), g.edge_target(e)};
      for (int dir = 0; dir < 2; ++dir) {
        const NodeId src = ends[dir];
        const NodeId dst = ends[1 - dir];
        float* x = model.vertex.data() + src * dim;
        detail::copy_in<Shared>(x, local.data(), dim);
        std::fill(grad.begin(), grad.end(), 0.0f);
        rows.clear();
        rows.push_back(targets + dst * dim);
        for (std::size_t k = 0; k < cfg.negatives; ++k) {
          const NodeId neg = negatives.sample(rng);
          if (neg != dst && neg != src) rows.push_back(targets + neg * dim);
        }
        detail::logistic_steps<Shared>(local.data(), rows.data(), rows.size(), lr, dim, grad.data(), scratch.data());
        detail::apply_grad<Shared>(x, grad.data(), dim);
      }
    }
    done += batch;
  }
}

}  // namespace

LineModel train_line_model(const CollapsedGraph& g, LineOrder order, const LineConfig& cfg) {
  cfg.validate();
  if (g.edge_count() == 0) throw DataError("LINE needs a graph with at least one edge");
  LineModel model;
  model.order = order;
  model.nodes = g.node_count();
  model.dim = cfg.dim_per_order;
  model.vertex.resize(model.nodes * model.dim);
  {
    SplitMix64 init(derive_seed(cfg.seed, 0x696e6974ULL, order == LineOrder::first ? 1 : 2));
    const double scale = 1.0 / static_cast<double>(model.dim);
    for (float& v : model.vertex) v = static_cast<float>((uniform01(init) - 0.5) * scale);
  }
  if (order == LineOrder::second) model.context.assign(model.nodes * model.dim, 0.0f);

  const std::vector<double> uniform(g.edge_count(), 1.0);
  const AliasTable edges(uniform);
  const AliasTable negatives(degree_weights(g, cfg.unigram_exponent));
  const std::uint64_t total = static_cast<std::uint64_t>(cfg.epochs) * g.edge_count();
  std::atomic<std::uint64_t> global{0};
  const unsigned workers = std::max(1u, cfg.threads);
  const std::uint64_t stream = order == LineOrder::first ? 0x6c696e6531ULL : 0x6c696e6532ULL;

  if (workers == 1) {
    SplitMix64 rng(derive_seed(cfg.seed, stream));
    line_samples<false>(g, cfg, model, edges, negatives, total, rng, global, total);
  } else {
    detail::parallel_chunks(workers, workers, [&](std::size_t w, std::size_t, unsigned) {
      const std::uint64_t share = total / workers + (w < total % workers ? 1 : 0);
      SplitMix64 rng(derive_seed(cfg.seed, stream, w + 1));
      line_samples<true>(g, cfg, model, edges, negatives, share, rng, global, total);
    });
  }
  model.samples_processed = global.load();
  for (float v : model.vertex) {
    if (!std::isfinite(v)) throw NumericalError("LINE diverged: non-finite vertex vector");
  }
  return model;
}

EmbeddingMatrix train_line_order(const CollapsedGraph& g, LineOrder order, const LineConfig& cfg) {
  return train_line_model(g, order, cfg).embedding();
}

EmbeddingMatrix concat_orders(const EmbeddingMatrix& e1, const EmbeddingMatrix& e2) {
  if (e2.dim == 0) return e1;
  if (e1.dim == 0) return e2;
  if (e1.rows != e2.rows) {
    throw DataError("cannot concatenate embeddings with " + std::to_string(e1.rows) + " and " +
                    std::to_string(e2.rows) + " rows");
  }
  if (!e1.ids.empty() && !e2.ids.empty() && e1.ids != e2.ids) {
    throw DataError("cannot concatenate embeddings with different node order");
  }
  EmbeddingMatrix out(e1.rows, e1.dim + e2.dim);
  for (std::size_t v = 0; v < e1.rows; ++v) {
    auto row = out.row(v);
    std::copy(e1.row(v).begin(), e1.row(v).end(), row.begin());
    std::copy(e2.row(v).begin(), e2.row(v).end(), row.begin() + static_cast<std::ptrdiff_t>(e1.dim));
  }
  out.method = e1.method == e2.method ? e1.method : EmbeddingMethod::unknown;
  out.ids = !e1.ids.empty() ? e1.ids : e2.ids;
  return out;
}

double line_objective(const LineModel& model, const CollapsedGraph& g, const LineConfig& cfg) {
  if (g.edge_count() == 0) return 0.0;
  const auto weights = degree_weights(g, cfg.unigram_exponent);
  double wsum = 0;
  for (double w : weights) wsum += w;
  const std::size_t dim = model.dim;
  const float* targets = model.order == LineOrder::first ? model.vertex.data() : model.context.data();
  const auto dot = [&](NodeId s, NodeId t) {
    double acc = 0;
    for (std::size_t d = 0; d < dim; ++d) acc += double(model.vertex[s * dim + d]) * targets[t * dim + d];
    return acc;
  };
  const auto neg_log_sigmoid = [](double z) {
    return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  };
  double total = 0;
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const NodeId ends[2] = {g.edge_source(e), g.edge_target(e)};
    for (int dir = 0; dir < 2; ++dir) {
      const NodeId s = ends[dir], t = ends[1 - dir];
      total += neg_log_sigmoid(dot(s, t));
      double expected = 0;
      for (NodeId k = 0; k < g.node_count(); ++k) {
        if (weights[k] > 0) expected += weights[k] / wsum * neg_log_sigmoid(-dot(s, k));
      }
      total += static_cast<double>(cfg.negatives) * expected;
    }
  }
  return total / (2.0 * static_cast<double>(g.edge_count()));
}

}  // namespace popnet

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


#include "popnet/dine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"

namespace popnet {

namespace {

constexpr std::uint32_t kDineModelVersion = 1;

RowMatrix sigmoid(const RowMatrix& z) {
  return z.unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

void check_width(const DineModel& model, const RowMatrix& X) {
  if (static_cast<std::size_t>(X.cols()) != model.dim()) {
    throw DataError("embedding width " + std::to_string(X.cols()) + " does not match DINE dimension " +
                    std::to_string(model.dim()));
  }
}

/// Edge batch with endpoints renumbered to local row indices.
struct LocalBatch {
  std::vector<NodeId> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
};

class BatchBuilder {
 public:
  explicit BatchBuilder(std::size_t n) : slot_(n, kUnset) {}

  LocalBatch build(const CollapsedGraph& g, std::span<const std::uint64_t> edge_ids) {
    LocalBatch b;
    b.edges.reserve(edge_ids.size());
    for (auto e : edge_ids) b.edges.emplace_back(local(b, g.edge_source(e)), local(b, g.edge_target(e)));
    for (NodeId v : b.nodes) slot_[v] = kUnset;
    return b;
  }

 private:
  static constexpr std::uint32_t kUnset = ~std::uint32_t{0};

  std::uint32_t local(LocalBatch& b, NodeId v) {
    if (slot_[v] == kUnset) {
      slot_[v] = static_cast<std::uint32_t>(b.nodes.size());
      b.nodes.push_back(v);
    }
    return slot_[v];
  }

  std::vector<std::uint32_t> slot_;
};

struct Terms {
  DineLoss loss;
  RowMatrix grad_P;  // D x k, only with gradients
};

/// Orthogonality and size terms from the partition matrix, with dL/dP.
Terms structure_terms(const RowMatrix& P, const DineLossWeights& w, bool want_grad) {
  const auto D = P.rows();
  const double Dd = static_cast<double>(D);
  Terms out;
  const Eigen::VectorXd s = P.rowwise().sum();
  const RowMatrix A = P * P.transpose();
  const double F = A.norm();
  const RowMatrix T = RowMatrix::Identity(D, D) / std::sqrt(Dd);
  if (want_grad) out.grad_P = RowMatrix::Zero(D, P.cols());

  if (F > 0) {
    const RowMatrix N = A / F;
    const RowMatrix diff = N - T;
    out.loss.orth = diff.squaredNorm() / (Dd * Dd);
    if (want_grad && w.orth != 0) {
      const RowMatrix GN = (2.0 * w.orth / (Dd * Dd)) * diff;
      const double proj = (GN.array() * N.array()).sum();
      const RowMatrix GA = (GN - proj * N) / F;
      out.grad_P += 2.0 * GA * P;
    }
  } else {
    out.loss.orth = T.squaredNorm() / (Dd * Dd);
  }

  const double S = s.sum();
  if (S > 0) {
    double plogp = 0;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double p = s(d) / S;
      if (p > 0) plogp += p * std::log(p);
    }
    out.loss.size = std::log(Dd) + plogp;
    if (want_grad && w.size != 0) {
      for (Eigen::Index d = 0; d < D; ++d) {
        const double p = std::max(s(d) / S, 1e-300);
        out.grad_P.row(d).array() += w.size * (std::log(p) - plogp) / S;
      }
    }
  } else {
    out.loss.size = std::log(Dd);
    out.loss.degenerate_size = true;
  }
  return out;
}

/// Core objective on a local batch. `input`/`target` hold the batch rows.
DineLoss batch_objective(const DineModel& model, const RowMatrix& input, const RowMatrix& target,
                         const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                         DineGradient* grad, const DineLossWeights& w) {
  const auto k = input.rows();
  const auto D = static_cast<Eigen::Index>(model.dim());
  const double Dd = static_cast<double>(D);

  RowMatrix Z = input * model.W0.transpose();
  Z.rowwise() += model.b0.transpose();
  const RowMatrix H = sigmoid(Z);
  RowMatrix R = H * model.W1.transpose();
  R.rowwise() += model.b1.transpose();
  R -= target;

  // Reconstruction weight per row: endpoint occurrences / (2m), or 1/k.
  Eigen::VectorXd weight(k);
  if (edges.empty()) {
    weight.setConstant(k > 0 ? 1.0 / static_cast<double>(k) : 0.0);
  } else {
    weight.setZero();
    for (auto [a, b] : edges) {
      weight(a) += 1.0;
      weight(b) += 1.0;
    }
    weight /= 2.0 * static_cast<double>(edges.size());
  }

  DineLoss loss;
  loss.mse = (R.rowwise().squaredNorm().array() * weight.array()).sum() / Dd;

  RowMatrix P = RowMatrix::Zero(D, k);
  for (auto [a, b] : edges) {
    const auto m = (H.row(a).array() * H.row(b).array()) / Dd;
    P.col(a) += m.matrix().transpose();
    P.col(b) += m.matrix().transpose();
  }
  const Terms terms = structure_terms(P, w, grad != nullptr);
  loss.orth = terms.loss.orth;
  loss.size = terms.loss.size;
  loss.degenerate_size = terms.loss.degenerate_size;
  loss.total = w.mse * loss.mse + w.orth * loss.orth + w.size * loss.size;

  if (grad) {
    const RowMatrix gR = (2.0 * w.mse / Dd) * (weight.asDiagonal() * R);
    grad->W1 = gR.transpose() * H;
    grad->b1 = gR.colwise().sum().transpose();
    RowMatrix gH = gR * model.W1;
    for (auto [a, b] : edges) {
      const Eigen::RowVectorXd gm = terms.grad_P.col(a).transpose() + terms.grad_P.col(b).transpose();
      const Eigen::RowVectorXd ha = H.row(a);
      gH.row(a).array() += gm.array() * H.row(b).array() / Dd;
      gH.row(b).array() += gm.array() * ha.array() / Dd;
    }
    const RowMatrix gZ = (gH.array() * H.array() * (1.0 - H.array())).matrix();
    grad->W0 = gZ.transpose() * input;
    grad->b0 = gZ.colwise().sum().transpose();
  }
  return loss;
}

RowMatrix gather_rows(const RowMatrix& X, std::span<const NodeId> nodes) {
  RowMatrix out(static_cast<Eigen::Index>(nodes.size()), X.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(nodes[i]));
  return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> all_edges_global(const CollapsedGraph& g) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges(g.edge_count());
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    edges[e] = {static_cast<std::uint32_t>(g.edge_source(e)), static_cast<std::uint32_t>(g.edge_target(e))};
  }
  return edges;
}

}  // namespace

// ---------------------------------------------------------------------------

bool DineModel::all_finite() const {
  return W0.allFinite() && b0.allFinite() && W1.allFinite() && b1.allFinite();
}

DineModel DineModel::initialize(std::size_t dim, std::uint64_t seed) {
  const auto D = static_cast<Eigen::Index>(dim);
  DineModel m;
  m.W0.resize(D, D);
  m.W1.resize(D, D);
  m.b0 = Eigen::VectorXd::Zero(D);
  m.b1 = Eigen::VectorXd::Zero(D);
  SplitMix64 rng(derive_seed(seed, 0x64696e65ULL));
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index i = 0; i < m.W0.size(); ++i) m.W0.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
  for (Eigen::Index i = 0; i < m.W1.size(); ++i) m.W1.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
  return m;
}

void DineConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("dine.lr must be positive");
  if (batch_size == 0) throw ConfigError("dine.batch_size must be positive");
  if (!(noise_sigma >= 0)) throw ConfigError("dine.noise_sigma must be non-negative");
}

RowMatrix encode(const DineModel& model, const RowMatrix& X) {
  check_width(model, X);
  RowMatrix Z = X * model.W0.transpose();
  Z.rowwise() += model.b0.transpose();
  return sigmoid(Z);
}

RowMatrix decode(const DineModel& model, const RowMatrix& H) {
  check_width(model, H);
  RowMatrix X = H * model.W1.transpose();
  X.rowwise() += model.b1.transpose();
  return X;
}

std::vector<double> edge_mask(const RowMatrix& H, const CollapsedGraph& g, std::size_t d) {
  const auto D = static_cast<std::size_t>(H.cols());
  if (d >= D) throw std::out_of_range("dimension " + std::to_string(d) + " out of range for D=" + std::to_string(D));
  std::vector<double> mask(g.edge_count());
  const auto col = static_cast<Eigen::Index>(d);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    mask[e] = H(static_cast<Eigen::Index>(g.edge_source(e)), col) *
              H(static_cast<Eigen::Index>(g.edge_target(e)), col) / static_cast<double>(D);
  }
  return mask;
}

PartitionSizes partition_and_sizes(const RowMatrix& H, const CollapsedGraph& g) {
  const auto D = H.cols();
  PartitionSizes out;
  out.P = RowMatrix::Zero(D, static_cast<Eigen::Index>(g.node_count()));
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto u = static_cast<Eigen::Index>(g.edge_source(e));
    const auto v = static_cast<Eigen::Index>(g.edge_target(e));
    const Eigen::RowVectorXd m = (H.row(u).array() * H.row(v).array()).matrix() / static_cast<double>(D);
    out.P.col(u) += m.transpose();
    out.P.col(v) += m.transpose();
  }
  out.s = out.P.rowwise().sum();
  return out;
}

DineLoss dine_loss(const RowMatrix& X, const RowMatrix& X_rec, const RowMatrix& H, const CollapsedGraph& g) {
  if (X.rows() != X_rec.rows() || X.cols() != X_rec.cols() || H.rows() != X.rows()) {
    throw DataError("dine_loss: inconsistent shapes");
  }
  if (static_cast<std::size_t>(H.rows()) != g.node_count()) throw DataError("dine_loss: H rows != node count");
  const double Dx = static_cast<double>(X.cols());
  DineLoss loss;
  const Eigen::VectorXd err = (X_rec - X).rowwise().squaredNorm();
  if (g.edge_count() == 0) {
    loss.mse = X.rows() > 0 ? err.sum() / (static_cast<double>(X.rows()) * Dx) : 0.0;
  } else {
    double acc = 0;
    for (NodeId v = 0; v < g.node_count(); ++v) acc += static_cast<double>(g.degree(v)) * err(static_cast<Eigen::Index>(v));
    loss.mse = acc / (2.0 * static_cast<double>(g.edge_count()) * Dx);
  }
  const auto ps = partition_and_sizes(H, g);
  const Terms t = structure_terms(ps.P, {}, false);
  loss.orth = t.loss.orth;
  loss.size = t.loss.size;
  loss.degenerate_size = t.loss.degenerate_size;
  loss.total = loss.mse + loss.orth + loss.size;
  return loss;
}

DineLoss dine_objective(const DineModel& model, const RowMatrix& input, const RowMatrix& target,
                        const CollapsedGraph& g, DineGradient* grad, const DineLossWeights& weights) {
  check_width(model, input);
  if (static_cast<std::size_t>(input.rows()) != g.node_count() || target.rows() != input.rows()) {
    throw DataError("dine_objective: rows do not match node count");
  }
  return batch_objective(model, input, target, all_edges_global(g), grad, weights);
}

DineLoss dine_batch_objective(const DineModel& model, const RowMatrix& input, const RowMatrix& target,
                              const CollapsedGraph& g, std::span<const std::uint64_t> edges,
                              DineGradient* grad, const DineLossWeights& weights) {
  check_width(model, input);
  BatchBuilder builder(g.node_count());
  const LocalBatch batch = builder.build(g, edges);
  return batch_objective(model, gather_rows(input, batch.nodes), gather_rows(target, batch.nodes),
                         batch.edges, grad, weights);
}

double orthogonality_offdiag_mass(const RowMatrix& H, const CollapsedGraph& g) {
  const auto ps = partition_and_sizes(H, g);
  RowMatrix A = ps.P * ps.P.transpose();
  const double F = A.norm();
  if (F == 0) return 0.0;
  A /= F;
  return A.squaredNorm() - A.diagonal().squaredNorm();
}

namespace {

// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamState {
 public:
  explicit AdamState(std::size_t D)
      : m_{RowMatrix::Zero(D, D), Eigen::VectorXd::Zero(D), RowMatrix::Zero(D, D), Eigen::VectorXd::Zero(D)},
        v_(m_) {}

  void step(DineModel& model, const DineGradient& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(0.9, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(0.999, static_cast<double>(t_));
    update(model.W0, m_.W0, v_.W0, g.W0, lr, c1, c2);
    update(model.b0, m_.b0, v_.b0, g.b0, lr, c1, c2);
    update(model.W1, m_.W1, v_.W1, g.W1, lr, c1, c2);
    update(model.b1, m_.b1, v_.b1, g.b1, lr, c1, c2);
  }

 private:
  template <typename P>
  static void update(P& param, P& m, P& v, const P& g, double lr, double c1, double c2) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
  }

  DineGradient m_;
  DineGradient v_;
  std::uint64_t t_ = 0;
};

}  // namespace

DineResult train_dine(const RowMatrix& X, const CollapsedGraph& g, const DineConfig& cfg) {
  cfg.validate();
  if (!X.allFinite()) throw DataError("DINE input contains non-finite values");
  if (static_cast<std::size_t>(X.rows()) != g.node_count()) {
    throw DataError("DINE input has " + std::to_string(X.rows()) + " rows but the graph has " +
                    std::to_string(g.node_count()) + " nodes");
  }
  const std::size_t D = static_cast<std::size_t>(X.cols());
  if (D == 0) throw DataError("DINE input has zero columns");

  DineResult result;
  result.model = DineModel::initialize(D, cfg.seed);
  DineModel& model = result.model;

  const auto full_loss = [&] { return dine_objective(model, X, X, g, nullptr); };
  result.history.push_back(full_loss());

  std::vector<std::uint64_t> order(g.edge_count());
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  BatchBuilder builder(g.node_count());
  SplitMix64 rng(derive_seed(cfg.seed, 0x747261696eULL));
  DineGradient grad;
  AdamState adam(D);

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !order.empty(); ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const LocalBatch batch = builder.build(g, std::span(order).subspan(start, end - start));
      const RowMatrix clean = gather_rows(X, batch.nodes);
      RowMatrix noisy = clean;
      if (cfg.noise_sigma > 0) {
        for (Eigen::Index j = 0; j < noisy.size(); ++j) noisy.data()[j] += cfg.noise_sigma * standard_normal(rng);
      }
      const DineModel checkpoint = model;
      const DineLoss l = batch_objective(model, noisy, clean, batch.edges, &grad, {});
      if (cfg.optimizer == DineOptimizer::adam) {
        adam.step(model, grad, cfg.lr);
      } else {
        model.W0 -= cfg.lr * grad.W0;
        model.b0 -= cfg.lr * grad.b0;
        model.W1 -= cfg.lr * grad.W1;
        model.b1 -= cfg.lr * grad.b1;
      }
      if (!std::isfinite(l.total) || !model.all_finite()) {
        throw DineDivergence("DINE training diverged in epoch " + std::to_string(epoch), checkpoint, epoch);
      }
    }
    result.history.push_back(full_loss());
    if (!std::isfinite(result.history.back().total)) {
      throw DineDivergence("DINE loss became non-finite after epoch " + std::to_string(epoch), model, epoch);
    }
  }
  result.H = encode(model, X);
  return result;
}

EmbeddingMatrix transformed_embedding(const RowMatrix& H, const EmbeddingMatrix& source) {
  EmbeddingMatrix e = EmbeddingMatrix::from_matrix(H);
  e.ids = source.ids;
  e.method = source.method;
  e.dine = true;
  return e;
}

void write_dine_model(const DineModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write DINE model " + path.string());
  out.write("PDIN", 4);
  detail::write_le<std::uint32_t>(out, kDineModelVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  detail::write_le_array<double>(out, std::span<const double>(m.W0.data(), static_cast<std::size_t>(m.W0.size())));
  detail::write_le_array<double>(out, std::span<const double>(m.b0.data(), static_cast<std::size_t>(m.b0.size())));
  detail::write_le_array<double>(out, std::span<const double>(m.W1.data(), static_cast<std::size_t>(m.W1.size())));
  detail::write_le_array<double>(out, std::span<const double>(m.b1.data(), static_cast<std::size_t>(m.b1.size())));
  if (!out) throw DataError("failed writing " + path.string());
}

DineModel read_dine_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open DINE model " + path.string());
  detail::expect_magic(in, "PDIN", path.string());
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kDineModelVersion) throw DataError(path.string() + ": unsupported DINE model version");
  const auto D = static_cast<Eigen::Index>(detail::read_le<std::uint32_t>(in, "D"));
  DineModel m;
  m.W0.resize(D, D);
  m.b0.resize(D);
  m.W1.resize(D, D);
  m.b1.resize(D);
  detail::read_le_array<double>(in, std::span<double>(m.W0.data(), static_cast<std::size_t>(m.W0.size())), "W0");
  detail::read_le_array<double>(in, std::span<double>(m.b0.data(), static_cast<std::size_t>(D)), "b0");
  detail::read_le_array<double>(in, std::span<double>(m.W1.data(), static_cast<std::size_t>(m.W1.size())), "W1");
  detail::read_le_array<double>(in, std::span<double>(m.b1.data(), static_cast<std::size_t>(D)), "b1");
  if (!m.all_finite()) throw DataError(path.string() + ": non-finite DINE parameters");
  return m;
}

}  // namespace popnet

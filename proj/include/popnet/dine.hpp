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
#include <span>
#include <string>
#include <vector>

#include "popnet/common.hpp"
#include "popnet/embedding.hpp"
#include "popnet/graph.hpp"

namespace popnet {

/// One-layer autoencoder. Encoder H = sigmoid(X W0^T + b0), decoder
/// X~ = H W1^T + b1, with rows of X as nodes.
struct DineModel {
  RowMatrix W0;
  Eigen::VectorXd b0;
  RowMatrix W1;
  Eigen::VectorXd b1;

  std::size_t dim() const { return static_cast<std::size_t>(W0.rows()); }
  bool all_finite() const;

  /// Weights uniform in (-1/sqrt(D), 1/sqrt(D)), biases zero.
  static DineModel initialize(std::size_t dim, std::uint64_t seed);
};

enum class DineOptimizer : std::uint8_t { sgd, adam };

struct DineConfig {
  double lr = 0.1;
  DineOptimizer optimizer = DineOptimizer::sgd;
  std::size_t batch_size = 10000;  // edges per step
  std::size_t epochs = 50;
  double noise_sigma = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DineLoss {
  double total = 0;
  double mse = 0;
  double orth = 0;
  double size = 0;
  bool degenerate_size = false;  // every s_d was zero
};

/// Relative weights of the three terms; the objective uses all ones.
struct DineLossWeights {
  double mse = 1.0;
  double orth = 1.0;
  double size = 1.0;
};

struct DineGradient {
  RowMatrix W0;
  Eigen::VectorXd b0;
  RowMatrix W1;
  Eigen::VectorXd b1;
};

/// Throws DataError when X's width differs from the model dimension.
RowMatrix encode(const DineModel& model, const RowMatrix& X);
RowMatrix decode(const DineModel& model, const RowMatrix& H);

/// M_d(u, v) = H(u, d) H(v, d) / D for every edge, indexed like g's edges.
/// Throws std::out_of_range for d >= D.
std::vector<double> edge_mask(const RowMatrix& H, const CollapsedGraph& g, std::size_t d);

struct PartitionSizes {
  RowMatrix P;        // D x n, P(d, v) = sum over incident edges of M_d
  Eigen::VectorXd s;  // s_d = sum_v P(d, v): each edge counted once per direction
};

PartitionSizes partition_and_sizes(const RowMatrix& H, const CollapsedGraph& g);

/// Loss terms over the whole graph (one batch holding every edge).
/// Reconstruction error is averaged over edge endpoints, so a node weighs in
/// proportion to its degree; on an edgeless graph it is the plain mean over
/// rows. With P = 0 the normalized Gram matrix is taken as zero.
DineLoss dine_loss(const RowMatrix& X, const RowMatrix& X_rec, const RowMatrix& H,
                   const CollapsedGraph& g);

/// Full-graph loss of `model` reconstructing `target` from `input`, plus the
/// analytic gradient when `grad` is non-null.
DineLoss dine_objective(const DineModel& model, const RowMatrix& input, const RowMatrix& target,
                        const CollapsedGraph& g, DineGradient* grad,
                        const DineLossWeights& weights = {});

/// Same, on the sub-batch made of the listed edge indices.
DineLoss dine_batch_objective(const DineModel& model, const RowMatrix& input, const RowMatrix& target,
                              const CollapsedGraph& g, std::span<const std::uint64_t> edges,
                              DineGradient* grad, const DineLossWeights& weights = {});

/// Sum of squared off-diagonal entries of PP^T / ||PP^T||_F.
double orthogonality_offdiag_mass(const RowMatrix& H, const CollapsedGraph& g);

struct DineResult {
  DineModel model;
  RowMatrix H;                  // encoding of the clean input
  std::vector<DineLoss> history;  // full-graph loss at init and after each epoch
};

/// Raised when training produces a non-finite loss or parameter; carries the
/// last finite model.
class DineDivergence : public NumericalError {
 public:
  DineDivergence(const std::string& what, DineModel checkpoint, std::size_t epoch)
      : NumericalError(what), checkpoint_(std::move(checkpoint)), epoch_(epoch) {}
  const DineModel& checkpoint() const { return checkpoint_; }
  std::size_t epoch() const { return epoch_; }

 private:
  DineModel checkpoint_;
  std::size_t epoch_;
};

/// Minibatch SGD (or Adam) over edge batches. Each epoch visits every edge once in a fresh
/// random order; each batch perturbs the input rows of its endpoints with
/// fresh N(0, sigma^2) noise and reconstructs the clean rows.
DineResult train_dine(const RowMatrix& X, const CollapsedGraph& g, const DineConfig& cfg);

/// Transformed embedding in the standard container, flagged as DINE output.
EmbeddingMatrix transformed_embedding(const RowMatrix& H, const EmbeddingMatrix& source);

/// "PDIN", u32 version, u32 D, then W0, b0, W1, b1 as row-major f64 LE.
void write_dine_model(const DineModel& m, const std::filesystem::path& path);
DineModel read_dine_model(const std::filesystem::path& path);

}  // namespace popnet

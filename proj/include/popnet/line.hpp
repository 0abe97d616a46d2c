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
#include <vector>

#include "popnet/embedding.hpp"
#include "popnet/graph.hpp"

namespace popnet {

enum class LineOrder { first, second };

struct LineConfig {
  std::size_t dim_per_order = 16;
  double lr = 0.025;
  std::size_t epochs = 5;  // one epoch = edge_count sampled edges
  std::size_t negatives = 5;
  double unigram_exponent = 0.75;
  std::size_t batch_size = 100000;  // edges per learning-rate step
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const;
};

struct LineModel {
  LineOrder order = LineOrder::first;
  std::size_t nodes = 0;
  std::size_t dim = 0;
  std::vector<float> vertex;
  std::vector<float> context;  // second order only
  std::uint64_t samples_processed = 0;

  EmbeddingMatrix embedding() const;
};

/// Edge-sampling training with negative sampling. Edges are drawn from an
/// alias table (uniform here: the graph is unweighted) and used in both
/// directions; negatives follow degree^exponent. The rate decays linearly
/// per batch from lr to lr * 1e-4. Throws DataError on an edgeless graph.
LineModel train_line_model(const CollapsedGraph& g, LineOrder order, const LineConfig& cfg);

/// Node embeddings only; second-order context vectors are dropped.
EmbeddingMatrix train_line_order(const CollapsedGraph& g, LineOrder order, const LineConfig& cfg);

/// Row-wise concatenation [e1 | e2]. A zero-width operand is the identity.
/// Throws DataError on row-count or id-order mismatch.
EmbeddingMatrix concat_orders(const EmbeddingMatrix& e1, const EmbeddingMatrix& e2);

/// Expected negative-sampling loss per directed edge, with the negative term
/// taken in expectation over the degree^exponent distribution.
double line_objective(const LineModel& model, const CollapsedGraph& g, const LineConfig& cfg);

}  // namespace popnet

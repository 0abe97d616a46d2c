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
#include <functional>
#include <span>
#include <vector>

#include "popnet/alias.hpp"
#include "popnet/embedding.hpp"
#include "popnet/graph.hpp"

namespace popnet {

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 10;  // nodes per walk, start included
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const;
};

/// Flat storage of n * walks_per_node walks.
struct WalkCorpus {
  std::vector<NodeId> tokens;
  std::vector<std::uint64_t> offsets{0};

  std::size_t walk_count() const { return offsets.size() - 1; }
  std::span<const NodeId> walk(std::size_t i) const {
    return {tokens.data() + offsets[i], tokens.data() + offsets[i + 1]};
  }
};

/// Uniform random walks. Round r visits the nodes in a seeded permutation and
/// walk (r, v) draws from its own stream, so the corpus does not depend on
/// the number of threads. Walks from a degree-0 node are the single node.
WalkCorpus generate_walks(const CollapsedGraph& g, const WalkConfig& cfg);

/// Negative-sampling distribution P(v) proportional to count(v)^exponent.
class UnigramTable {
 public:
  /// Throws DataError on an empty corpus.
  UnigramTable(const WalkCorpus& corpus, std::size_t node_count, double exponent);
  UnigramTable(std::span<const double> counts, double exponent);

  double probability(NodeId v) const { return table_.probability(v); }
  std::size_t size() const { return table_.size(); }
  template <typename Urbg>
  NodeId sample(Urbg& rng) const {
    return table_.sample(rng);
  }

 private:
  AliasTable table_;
};

struct SgnsConfig {
  std::size_t dim = 32;
  std::size_t window = 5;
  std::size_t epochs = 20;
  double lr_initial = 0.025;
  double lr_min = 0.0001;
  std::size_t negatives = 5;
  double unigram_exponent = 0.75;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const;
};

/// Skip-gram parameters: input (center) vectors are the node embeddings,
/// output (context) vectors are kept for loss evaluation.
struct SgnsModel {
  std::size_t nodes = 0;
  std::size_t dim = 0;
  std::vector<float> input;
  std::vector<float> output;
  std::uint64_t pairs_processed = 0;

  EmbeddingMatrix embedding() const;
};

/// Called after initialization (epoch 0) and after every epoch.
using SgnsEpochCallback = std::function<void(std::size_t epoch, const SgnsModel&)>;

/// Number of (center, context) pairs a full symmetric window yields per pass.
std::uint64_t count_window_pairs(const WalkCorpus& corpus, std::size_t window);

/// Skip-gram with negative sampling over walk windows. Input vectors start
/// uniform in (-0.5/dim, 0.5/dim), output vectors at zero; the learning rate
/// falls linearly from lr_initial to lr_min over all processed pairs.
/// With threads > 1 workers update the shared matrices lock-free and the
/// result is no longer bitwise reproducible. Throws NumericalError if a
/// parameter becomes non-finite.
SgnsModel train_sgns(const WalkCorpus& corpus, std::size_t node_count, const SgnsConfig& cfg,
                     const SgnsEpochCallback& on_epoch = {});

struct SgnsSample {
  NodeId center;
  NodeId context;
  std::vector<NodeId> negatives;
};

/// Mean negative SGNS objective over fixed samples:
/// -log s(x_c.y_o) - sum_k log s(-x_c.y_k).
double sgns_loss(const SgnsModel& model, std::span<const SgnsSample> samples);

}  // namespace popnet

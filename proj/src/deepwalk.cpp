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


#include "popnet/deepwalk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>

#include "parallel.hpp"
#include "sgd_kernel.hpp"

namespace popnet {

void WalkConfig::validate() const {
  if (walks_per_node == 0) throw ConfigError("walk.walks_per_node must be positive");
  if (walk_length == 0) throw ConfigError("walk.walk_length must be positive");
}

WalkCorpus generate_walks(const CollapsedGraph& g, const WalkConfig& cfg) {
  cfg.validate();
  const std::size_t n = g.node_count();
  const std::size_t total = n * cfg.walks_per_node;

  // Walk i = round * n + k starts at order[round][k].
  std::vector<NodeId> starts(total);
  for (std::size_t r = 0; r < cfg.walks_per_node; ++r) {
    auto first = starts.begin() + static_cast<std::ptrdiff_t>(r * n);
    std::iota(first, first + static_cast<std::ptrdiff_t>(n), NodeId{0});
    SplitMix64 rng(derive_seed(cfg.seed, 0x6f72646572ULL, r));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(first[static_cast<std::ptrdiff_t>(i - 1)],
                first[static_cast<std::ptrdiff_t>(uniform_below(rng, i))]);
    }
  }

  WalkCorpus corpus;
  corpus.offsets.resize(total + 1);
  corpus.offsets[0] = 0;
  for (std::size_t i = 0; i < total; ++i) {
    corpus.offsets[i + 1] = corpus.offsets[i] + (g.degree(starts[i]) == 0 ? 1 : cfg.walk_length);
  }
  corpus.tokens.resize(corpus.offsets.back());

  detail::parallel_chunks(total, cfg.threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t round = i / std::max<std::size_t>(n, 1);
      NodeId v = starts[i];
      SplitMix64 rng(derive_seed(cfg.seed, round, v));
      NodeId* out = corpus.tokens.data() + corpus.offsets[i];
      const std::size_t len = corpus.offsets[i + 1] - corpus.offsets[i];
      out[0] = v;
      for (std::size_t step = 1; step < len; ++step) {
        const auto nbrs = g.neighbors(v);
        v = nbrs[uniform_below(rng, nbrs.size())];
        out[step] = v;
      }
    }
  });
  return corpus;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> powered(std::span<const double> counts, double exponent) {
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) w[i] = counts[i] > 0 ? std::pow(counts[i], exponent) : 0.0;
  return w;
}

std::vector<double> corpus_counts(const WalkCorpus& corpus, std::size_t node_count) {
  if (corpus.tokens.empty()) throw DataError("cannot build a unigram table from an empty corpus");
  std::vector<double> counts(node_count, 0.0);
  for (NodeId t : corpus.tokens) {
    if (t >= node_count) throw DataError("corpus token out of range");
    counts[t] += 1.0;
  }
  return counts;
}

}  // namespace

UnigramTable::UnigramTable(std::span<const double> counts, double exponent)
    : table_(powered(counts, exponent)) {}

UnigramTable::UnigramTable(const WalkCorpus& corpus, std::size_t node_count, double exponent)
    : UnigramTable(corpus_counts(corpus, node_count), exponent) {}

// ---------------------------------------------------------------------------

void SgnsConfig::validate() const {
  if (dim == 0) throw ConfigError("sgns.dim must be positive");
  if (window == 0) throw ConfigError("sgns.window must be at least 1");
  if (!(lr_min <= lr_initial) || lr_min < 0) throw ConfigError("sgns.lr_min must be in [0, lr_initial]");
  if (!(unigram_exponent >= 0)) throw ConfigError("sgns.unigram_exponent must be non-negative");
}

EmbeddingMatrix SgnsModel::embedding() const {
  EmbeddingMatrix e(nodes, dim);
  e.values = input;
  e.method = EmbeddingMethod::deepwalk;
  return e;
}

std::uint64_t count_window_pairs(const WalkCorpus& corpus, std::size_t window) {
  std::uint64_t pairs = 0;
  for (std::size_t w = 0; w < corpus.walk_count(); ++w) {
    const std::uint64_t len = corpus.offsets[w + 1] - corpus.offsets[w];
    for (std::uint64_t i = 0; i < len; ++i) {
      const std::uint64_t lo = i >= window ? i - window : 0;
      const std::uint64_t hi = std::min<std::uint64_t>(len - 1, i + window);
      pairs += hi - lo;
    }
  }
  return pairs;
}

namespace {

template <bool Shared>
void sgns_pass(const WalkCorpus& corpus, const SgnsConfig& cfg, const UnigramTable& table,
               SgnsModel& model, std::size_t walk_begin, std::size_t walk_end, SplitMix64& rng,
               std::atomic<std::uint64_t>& global_pairs, std::uint64_t total_pairs) {
  const std::size_t dim = cfg.dim;
  std::vector<float> local(dim), grad(dim), scratch(dim);
  const float lr0 = static_cast<float>(cfg.lr_initial);
  const double span = cfg.lr_initial - cfg.lr_min;
  std::uint64_t processed = global_pairs.load(std::memory_order_relaxed);
  std::uint64_t unreported = 0;
  float lr = lr0;
  const auto update_lr = [&] {
    const double frac = total_pairs ? static_cast<double>(processed) / static_cast<double>(total_pairs) : 0.0;
    lr = static_cast<float>(std::max(cfg.lr_min, cfg.lr_initial - span * std::min(1.0, frac)));
  };

  // Negatives are drawn one pair ahead so their rows can be prefetched; the
  // draw order, and hence the result, is unchanged.
  std::vector<NodeId> negs(cfg.negatives), next_negs(cfg.negatives);
  std::vector<float*> rows;
  rows.reserve(cfg.negatives + 1);
  const auto draw = [&](std::vector<NodeId>& out) {
    for (auto& n : out) {
      n = table.sample(rng);
      detail::prefetch_row(model.output.data() + n * dim, dim);
    }
  };
  const auto prefetch_walk = [&](std::size_t w) {
    if (w >= walk_end) return;
    for (NodeId v : corpus.walk(w)) {
      detail::prefetch_row(model.input.data() + v * dim, dim);
      detail::prefetch_row(model.output.data() + v * dim, dim);
    }
  };
  draw(next_negs);
  prefetch_walk(walk_begin);

  for (std::size_t w = walk_begin; w < walk_end; ++w) {
    prefetch_walk(w + 1);
    const auto walk = corpus.walk(w);
    const std::size_t len = walk.size();
    for (std::size_t i = 0; i < len; ++i) {
      const NodeId center = walk[i];
      float* x = model.input.data() + center * dim;
      const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
      const std::size_t hi = std::min(len - 1, i + cfg.window);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        const NodeId context = walk[j];
        negs.swap(next_negs);
        draw(next_negs);
        detail::copy_in<Shared>(x, local.data(), dim);
        std::fill(grad.begin(), grad.end(), 0.0f);
        rows.clear();
        rows.push_back(model.output.data() + context * dim);
        for (const NodeId neg : negs)
          if (neg != context) rows.push_back(model.output.data() + neg * dim);
        detail::logistic_steps<Shared>(local.data(), rows.data(), rows.size(), lr, dim, grad.data(),
                                       scratch.data());
        detail::apply_grad<Shared>(x, grad.data(), dim);
        if constexpr (Shared) {
          if (++unreported == 10000) {
            processed = global_pairs.fetch_add(unreported, std::memory_order_relaxed) + unreported;
            unreported = 0;
            update_lr();
          }
        } else {
          ++processed;
          update_lr();
        }
      }
    }
  }
  if constexpr (Shared) {
    global_pairs.fetch_add(unreported, std::memory_order_relaxed);
  } else {
    global_pairs.store(processed, std::memory_order_relaxed);
  }
}

}  // namespace

SgnsModel train_sgns(const WalkCorpus& corpus, std::size_t node_count, const SgnsConfig& cfg,
                     const SgnsEpochCallback& on_epoch) {
  cfg.validate();
  const UnigramTable table(corpus, node_count, cfg.unigram_exponent);

  SgnsModel model;
  model.nodes = node_count;
  model.dim = cfg.dim;
  model.input.resize(node_count * cfg.dim);
  model.output.assign(node_count * cfg.dim, 0.0f);
  {
    SplitMix64 init(derive_seed(cfg.seed, 0x696e6974ULL));
    const double scale = 1.0 / static_cast<double>(cfg.dim);
    for (float& v : model.input) v = static_cast<float>((uniform01(init) - 0.5) * scale);
  }
  if (on_epoch) on_epoch(0, model);

  const std::uint64_t per_epoch = count_window_pairs(corpus, cfg.window);
  const std::uint64_t total_pairs = per_epoch * cfg.epochs;
  std::atomic<std::uint64_t> global_pairs{0};
  const unsigned workers = std::max(1u, cfg.threads);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (workers == 1) {
      SplitMix64 rng(derive_seed(cfg.seed, 0x73676e73ULL, epoch));
      sgns_pass<false>(corpus, cfg, table, model, 0, corpus.walk_count(), rng, global_pairs, total_pairs);
    } else {
      detail::parallel_chunks(corpus.walk_count(), workers, [&](std::size_t b, std::size_t e, unsigned w) {
        SplitMix64 rng(derive_seed(cfg.seed, 0x73676e73ULL + w, epoch));
        sgns_pass<true>(corpus, cfg, table, model, b, e, rng, global_pairs, total_pairs);
      });
    }
    for (float v : model.input) {
      if (!std::isfinite(v)) {
        throw NumericalError("skip-gram diverged: non-finite input vector after epoch " + std::to_string(epoch));
      }
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  model.pairs_processed = global_pairs.load();
  return model;
}

double sgns_loss(const SgnsModel& model, std::span<const SgnsSample> samples) {
  if (samples.empty()) return 0.0;
  const auto dot = [&](NodeId a, NodeId b) {
    double s = 0.0;
    for (std::size_t d = 0; d < model.dim; ++d) {
      s += static_cast<double>(model.input[a * model.dim + d]) * model.output[b * model.dim + d];
    }
    return s;
  };
  // -log sigmoid(z) = log1p(exp(-z)), evaluated stably.
  const auto softplus_neg = [](double z) { return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); };
  double total = 0.0;
  for (const auto& s : samples) {
    total += softplus_neg(dot(s.center, s.context));
    for (NodeId k : s.negatives) total += softplus_neg(-dot(s.center, k));
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace popnet

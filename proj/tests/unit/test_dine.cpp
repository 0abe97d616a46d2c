#include <doctest.h>

#include <cmath>
#include <random>

#include "popnet/deepwalk.hpp"
#include "popnet/dine.hpp"
#include "test_support.hpp"

using namespace popnet;
using namespace popnet::testing;

namespace {

RowMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  SplitMix64 rng(seed);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
  return m;
}

CollapsedGraph random_graph(std::size_t n, double p, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (uniform01(rng) < p) pairs.emplace_back(u, v);
    }
  }
  return CollapsedGraph::from_pairs(n, pairs);
}

/// Two communities of 50 with dense inside and sparse across.
CollapsedGraph two_communities(std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId u = 0; u < 100; ++u) {
    for (NodeId v = u + 1; v < 100; ++v) {
      const double p = (u < 50) == (v < 50) ? 0.2 : 0.01;
      if (uniform01(rng) < p) pairs.emplace_back(u, v);
    }
  }
  return CollapsedGraph::from_pairs(100, pairs);
}

RowMatrix deepwalk_input(const CollapsedGraph& g, std::uint64_t seed) {
  auto corpus = generate_walks(g, {.walks_per_node = 10, .walk_length = 10, .seed = seed});
  return train_sgns(corpus, g.node_count(), {.dim = 8, .window = 5, .epochs = 5, .seed = seed})
      .embedding()
      .to_matrix();
}

}  // namespace

TEST_CASE("encode: sigmoid of affine map") {
  DineModel m = DineModel::initialize(3, 1);
  m.W0.setZero();
  m.b0.setZero();
  const RowMatrix X = random_matrix(5, 3, 2);
  CHECK((encode(m, X).array() == 0.5).all());
  m.b0.setConstant(1000.0);
  CHECK(((encode(m, X).array() - 1.0).abs() < 1e-9).all());
  CHECK_THROWS_AS(encode(m, random_matrix(5, 4, 2)), DataError);
}

TEST_CASE("encode: rows are independent") {
  DineModel m = DineModel::initialize(4, 7);
  const RowMatrix X = random_matrix(6, 4, 3);
  const std::vector<Eigen::Index> perm{3, 0, 5, 1, 4, 2};
  RowMatrix Xp(6, 4);
  for (Eigen::Index i = 0; i < 6; ++i) Xp.row(i) = X.row(perm[i]);
  const RowMatrix H = encode(m, X);
  const RowMatrix Hp = encode(m, Xp);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(Hp.row(i) == H.row(perm[i]));
  CHECK(((H.array() > 0) && (H.array() < 1)).all());
}

TEST_CASE("edge mask values") {
  std::vector<std::pair<NodeId, NodeId>> one{{0, 1}};
  auto g = CollapsedGraph::from_pairs(2, one);
  RowMatrix H1 = RowMatrix::Ones(2, 1);
  CHECK(edge_mask(H1, g, 0)[0] == 1.0);
  RowMatrix H4 = RowMatrix::Ones(2, 4);
  CHECK(edge_mask(H4, g, 2)[0] == 0.25);
  CHECK_THROWS_AS(edge_mask(H4, g, 4), std::out_of_range);

  auto s = star(3);
  RowMatrix H = RowMatrix::Constant(4, 2, 0.7);
  H(0, 1) = 0.0;
  for (double v : edge_mask(H, s, 1)) CHECK(v == 0.0);
  for (double v : edge_mask(H, s, 0)) CHECK(v == doctest::Approx(0.49 / 2));
}

TEST_CASE("partition matrix and sizes") {
  auto empty = CollapsedGraph::from_pairs(3, std::span<const std::pair<NodeId, NodeId>>{});
  auto ps0 = partition_and_sizes(RowMatrix::Constant(3, 2, 0.5), empty);
  CHECK(ps0.P.isZero());
  CHECK(ps0.s.isZero());

  std::vector<std::pair<NodeId, NodeId>> one{{0, 1}};
  auto g = CollapsedGraph::from_pairs(2, one);
  auto ps = partition_and_sizes(RowMatrix::Ones(2, 1), g);
  CHECK(ps.P(0, 0) == 1.0);
  CHECK(ps.P(0, 1) == 1.0);
  CHECK(ps.s(0) == 2.0);

  auto rg = random_graph(30, 0.2, 5);
  const RowMatrix H = encode(DineModel::initialize(5, 3), random_matrix(30, 5, 9));
  auto pr = partition_and_sizes(H, rg);
  for (Eigen::Index d = 0; d < 5; ++d) CHECK(pr.s(d) == doctest::Approx(pr.P.row(d).sum()).epsilon(1e-12));
  // Ordered-pair convention: s_d is twice the edge mask sum.
  for (std::size_t d = 0; d < 5; ++d) {
    double sum = 0;
    for (double v : edge_mask(H, rg, d)) sum += v;
    CHECK(pr.s(static_cast<Eigen::Index>(d)) == doctest::Approx(2 * sum).epsilon(1e-12));
  }
}

TEST_CASE("loss terms on crafted inputs") {
  auto g = random_graph(12, 0.4, 1);
  REQUIRE(g.edge_count() > 0);
  const RowMatrix X = random_matrix(12, 4, 2);

  // D = 1: the normalized Gram matrix is the scalar 1, as is I_1.
  const RowMatrix X1 = random_matrix(12, 1, 3);
  const RowMatrix H1 = RowMatrix::Constant(12, 1, 0.3);
  CHECK(dine_loss(X1, X1, H1, g).orth == doctest::Approx(0.0).epsilon(1e-15));

  // Uniform sizes: maximal entropy.
  const RowMatrix Hu = RowMatrix::Ones(12, 4);
  CHECK(std::abs(dine_loss(X, X, Hu, g).size) < 1e-12);

  // One-hot sizes: all mass in dimension 0, 0 log 0 = 0.
  RowMatrix Ho = RowMatrix::Zero(12, 4);
  Ho.col(0).setOnes();
  const auto l = dine_loss(X, X, Ho, g);
  CHECK(std::abs(l.size - std::log(4.0)) < 1e-12);
  CHECK(l.mse == 0.0);
  CHECK(l.total == doctest::Approx(l.orth + l.size));

  // All-zero sizes are flagged.
  const auto z = dine_loss(X, X, RowMatrix::Zero(12, 4), g);
  CHECK(z.degenerate_size);
  CHECK(z.size == doctest::Approx(std::log(4.0)));
}

TEST_CASE("loss invariants on random models") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = random_graph(15, 0.3, seed);
    const std::size_t D = 1 + seed % 6;
    const auto m = DineModel::initialize(D, seed);
    const RowMatrix X = random_matrix(15, D, seed + 100);
    const RowMatrix H = encode(m, X);
    const auto l = dine_loss(X, decode(m, H), H, g);
    CHECK(l.mse >= 0);
    CHECK(l.orth >= 0);
    CHECK(l.size >= -1e-15);
    CHECK(l.size <= std::log(static_cast<double>(D)) + 1e-12);
    const auto o = dine_objective(m, X, X, g, nullptr);
    CHECK(o.total == doctest::Approx(l.total).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradient matches central differences") {
  auto g = random_graph(10, 0.4, 42);
  REQUIRE(g.edge_count() > 0);
  const std::size_t D = 4;
  const RowMatrix X = random_matrix(10, D, 43);
  const RowMatrix target = random_matrix(10, D, 44);
  DineModel m = DineModel::initialize(D, 45);
  m.b0 = Eigen::VectorXd::Random(D) * 0.3;
  m.b1 = Eigen::VectorXd::Random(D) * 0.3;

  const std::vector<DineLossWeights> cases{{1, 1, 1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (const auto& w : cases) {
    DineGradient grad;
    dine_objective(m, X, target, g, &grad, w);
    const double h = 1e-5;
    double max_rel = 0;
    const auto check_block = [&](auto& param, const auto& analytic) {
      for (Eigen::Index i = 0; i < param.size(); ++i) {
        const double saved = param.data()[i];
        param.data()[i] = saved + h;
        const double up = dine_objective(m, X, target, g, nullptr, w).total;
        param.data()[i] = saved - h;
        const double down = dine_objective(m, X, target, g, nullptr, w).total;
        param.data()[i] = saved;
        const double fd = (up - down) / (2 * h);
        const double a = analytic.data()[i];
        const double scale = std::max({std::abs(a), std::abs(fd), 1e-7});
        max_rel = std::max(max_rel, std::abs(a - fd) / scale);
      }
    };
    check_block(m.W0, grad.W0);
    check_block(m.b0, grad.b0);
    check_block(m.W1, grad.W1);
    check_block(m.b1, grad.b1);
    CAPTURE(w.mse);
    CAPTURE(w.orth);
    CAPTURE(w.size);
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("full-graph mse equals the mean over single-edge batches") {
  auto g = random_graph(20, 0.25, 8);
  const auto m = DineModel::initialize(3, 2);
  const RowMatrix X = random_matrix(20, 3, 4);
  const RowMatrix T = random_matrix(20, 3, 5);
  const double full = dine_objective(m, X, T, g, nullptr).mse;
  double acc = 0;
  for (std::uint64_t e = 0; e < g.edge_count(); ++e) {
    const std::uint64_t one[1] = {e};
    acc += dine_batch_objective(m, X, T, g, one, nullptr).mse;
  }
  CHECK(std::abs(full - acc / static_cast<double>(g.edge_count())) < 1e-9);

  // The batch over every edge is the full objective.
  std::vector<std::uint64_t> all(g.edge_count());
  std::iota(all.begin(), all.end(), 0);
  std::reverse(all.begin(), all.end());
  const auto b = dine_batch_objective(m, X, T, g, all, nullptr);
  const auto f = dine_objective(m, X, T, g, nullptr);
  CHECK(std::abs(b.total - f.total) < 1e-12);
}

TEST_CASE("train: zero epochs without noise is the initial encoding") {
  auto g = two_communities(1);
  const RowMatrix X = random_matrix(100, 6, 1, 0.3);
  DineConfig cfg{.epochs = 0, .noise_sigma = 0.0, .seed = 9};
  auto r = train_dine(X, g, cfg);
  CHECK(r.H == encode(DineModel::initialize(6, 9), X));
  CHECK(r.history.size() == 1);
  CHECK_THROWS_AS(train_dine(random_matrix(99, 6, 1), g, cfg), DataError);
  CHECK_THROWS_AS(train_dine(X, g, DineConfig{.lr = 0}), ConfigError);
}

TEST_CASE("train: edgeless graph keeps the initial model") {
  auto g = CollapsedGraph::from_pairs(5, std::span<const std::pair<NodeId, NodeId>>{});
  const RowMatrix X = random_matrix(5, 3, 2);
  auto r = train_dine(X, g, {.epochs = 3, .seed = 4});
  CHECK(r.H == encode(DineModel::initialize(3, 4), X));
}

TEST_CASE("train: total loss decreases over 50 epochs in at least 9 of 10 seeds") {
  int decreased = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto g = two_communities(seed);
    auto r = train_dine(deepwalk_input(g, seed), g, {.seed = seed});
    REQUIRE(r.history.size() == 51);
    decreased += r.history.back().total < r.history.front().total;
    CHECK(((r.H.array() > 0) && (r.H.array() < 1)).all());
  }
  CHECK(decreased >= 9);
}

TEST_CASE("train: orthogonality pressure lowers off-diagonal Gram mass") {
  // A 100-node graph has ~500 edges, one default batch per epoch; small
  // batches give the optimizer the step count a large graph would.
  int more_orthogonal = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto g = two_communities(seed);
    const RowMatrix X = deepwalk_input(g, seed);
    auto r = train_dine(X, g, {.batch_size = 32, .seed = seed});
    const RowMatrix H0 = encode(DineModel::initialize(8, seed), X);
    more_orthogonal += orthogonality_offdiag_mass(r.H, g) < orthogonality_offdiag_mass(H0, g);
  }
  CHECK(more_orthogonal >= 8);
}

TEST_CASE("train: adam lowers the loss and stays reproducible") {
  auto g = two_communities(3);
  const RowMatrix X = deepwalk_input(g, 3);
  const DineConfig cfg{.lr = 0.01, .optimizer = DineOptimizer::adam, .batch_size = 64, .seed = 3};
  auto a = train_dine(X, g, cfg);
  auto b = train_dine(X, g, cfg);
  CHECK(a.history.back().total < a.history.front().total);
  CHECK(a.H == b.H);
  CHECK(a.H != train_dine(X, g, {.lr = 0.01, .batch_size = 64, .seed = 3}).H);
}

TEST_CASE("model file round trip") {
  auto m = DineModel::initialize(5, 12);
  m.b1.setConstant(-0.125);
  const auto p = temp_path("model.pdin");
  write_dine_model(m, p);
  auto back = read_dine_model(p);
  CHECK(back.W0 == m.W0);
  CHECK(back.W1 == m.W1);
  CHECK(back.b0 == m.b0);
  CHECK(back.b1 == m.b1);
  std::filesystem::remove(p);
}

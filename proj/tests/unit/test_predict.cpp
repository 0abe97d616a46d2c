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
#include <mutex>
#include <random>

#include "popnet/log.hpp"
#include "popnet/predict.hpp"
#include "popnet/shapley.hpp"
#include "test_support.hpp"

using namespace popnet;

namespace {

double brute_auc(const RowMatrix& P, const std::vector<int>& y, int c) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != c) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] == c) continue;
      pairs += 1;
      if (P(i, c) > P(j, c)) wins += 1;
      else if (P(i, c) == P(j, c)) wins += 0.5;
    }
  }
  return wins / pairs;
}

FeatureMatrix gaussian_features(std::mt19937_64& rng, std::size_t n, std::size_t p) {
  std::normal_distribution<double> z;
  FeatureMatrix fm;
  fm.class_names = {"a", "b"};
  fm.labels.assign(n, 0);
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> col(n);
    for (auto& v : col) v = z(rng);
    fm.add_continuous("x" + std::to_string(j), std::move(col));
  }
  return fm;
}

struct WarningCapture {
  std::vector<std::string> messages;
  std::mutex m;
  WarningHandler previous;
  WarningCapture() {
    previous = set_warning_handler([this](std::string_view s) {
      std::lock_guard lock(m);
      messages.emplace_back(s);
    });
  }
  ~WarningCapture() { set_warning_handler(previous); }
};

}  // namespace

TEST_CASE("imputation") {
  FeatureMatrix fm;
  fm.class_names = {"a", "b"};
  fm.labels = {0, 1, 0};
  fm.add_continuous("x", {1, NAN, 3});
  fm.add_categorical("c", {"a", std::nullopt, "b"});
  const auto imp = Imputer::fit(fm);
  CHECK(imp.medians()[0] == 2.0);
  CHECK(imp.categories()[1] == std::vector<std::string>{"a", "b", "missing"});
  const auto out = imp.apply(fm);
  CHECK(out.columns[0].values == std::vector<double>{1, 2, 3});
  CHECK(*out.columns[1].categories[1] == "missing");

  FeatureMatrix full;
  full.class_names = {"a"};
  full.labels = {0, 0, 0, 0};
  full.add_continuous("x", {4, 1, 2, 8});
  CHECK(Imputer::fit(full).apply(full).columns[0].values == full.columns[0].values);
  CHECK(Imputer::fit(full).medians()[0] == 3.0);

  SUBCASE("statistics come from the training rows only") {
    FeatureMatrix test = full;
    test.columns[0].values = {NAN, 100, 200, NAN};
    const auto filled = Imputer::fit(full).apply(test);
    CHECK(filled.columns[0].values == std::vector<double>{3, 100, 200, 3});
  }
  SUBCASE("all-missing continuous column") {
    FeatureMatrix bad;
    bad.class_names = {"a"};
    bad.labels = {0, 0};
    bad.add_continuous("x", {NAN, NAN});
    CHECK_THROWS_AS(Imputer::fit(bad), DataError);
  }
}

TEST_CASE("preprocessor standardizes and one-hot encodes") {
  FeatureMatrix fm;
  fm.class_names = {"a", "b"};
  fm.labels = {0, 1, 0, 1};
  fm.add_continuous("x", {1, 2, 3, 4});
  fm.add_categorical("c", {"u", "v", std::nullopt, "u"});
  const auto pre = Preprocessor::fit(fm);
  const RowMatrix X = pre.transform(fm);
  REQUIRE(X.cols() == 4);
  CHECK(X.col(0).mean() == doctest::Approx(0.0));
  CHECK((X.col(0).array().square().mean()) == doctest::Approx(1.0));
  CHECK(X.row(0).tail(3) == Eigen::RowVector3d(1, 0, 0));
  CHECK(X.row(2).tail(3) == Eigen::RowVector3d(0, 0, 1));
  CHECK(pre.groups()[1] == std::pair<std::size_t, std::size_t>{1, 4});
}

TEST_CASE("logistic regression") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0, 1);

  SUBCASE("separable data with a weak penalty is fitted perfectly") {
    RowMatrix X(200, 2);
    std::vector<int> y(200);
    for (int i = 0; i < 200; ++i) {
      y[i] = i % 2;
      X(i, 0) = (y[i] ? 2.0 : -2.0) + 0.5 * z(rng);
      X(i, 1) = z(rng);
    }
    const Model m = train_logreg(X, y, 2, 100.0);
    const RowMatrix P = predict_proba(m, X);
    int correct = 0;
    for (int i = 0; i < 200; ++i) correct += (P(i, 1) > 0.5) == (y[i] == 1);
    CHECK(correct == 200);
  }

  SUBCASE("planted coefficients are recovered and the gradient vanishes") {
    const std::size_t n = 10000;
    const double w0 = 1.0, w1 = -0.5, b = 0.3;
    RowMatrix X(n, 2);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      X(i, 0) = z(rng);
      X(i, 1) = z(rng);
      const double p = 1 / (1 + std::exp(-(w0 * X(i, 0) + w1 * X(i, 1) + b)));
      y[i] = u(rng) < p ? 1 : 0;
    }
    const auto m = train_logreg(X, y, 2, 100.0);
    CHECK(m.converged);
    CHECK(std::abs(m.weights(1, 0) - w0) / w0 < 0.10);
    CHECK(std::abs(m.weights(1, 1) - w1) / std::abs(w1) < 0.10);
    for (std::size_t c = 0; c < 2; ++c) CHECK(logreg_gradient(m, X, y, c, 100.0).norm() <= 1e-5);
  }

  SUBCASE("probability rows sum to one over several classes") {
    RowMatrix X(300, 3);
    std::vector<int> y(300);
    for (int i = 0; i < 300; ++i) {
      y[i] = i % 4;
      for (int j = 0; j < 3; ++j) X(i, j) = z(rng) + (y[i] == j ? 1.0 : 0.0);
    }
    y[5] = 3;
    const RowMatrix P = predict_proba(train_logreg(X, y, 5, 1.0), X);
    for (int i = 0; i < 300; ++i) CHECK(std::abs(P.row(i).sum() - 1.0) <= 1e-9);
    CHECK(P.col(4).isZero());
  }

  SUBCASE("errors") {
    RowMatrix X = RowMatrix::Random(10, 2);
    std::vector<int> one(10, 0);
    CHECK_THROWS_AS(train_logreg(X, one, 2, 1.0), DataError);
  }
}

TEST_CASE("k nearest neighbours") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  RowMatrix X(120, 3);
  std::vector<int> y(120);
  for (int i = 0; i < 120; ++i) {
    y[i] = i % 3;
    for (int j = 0; j < 3; ++j) X(i, j) = z(rng);
  }
  const Model m1 = train_knn(X, y, 3, 1);
  const RowMatrix P1 = predict_proba(m1, X);
  for (int i = 0; i < 120; ++i) CHECK(P1(i, y[i]) == 1.0);
  const RowMatrix P7 = predict_proba(train_knn(X, y, 3, 7), X);
  for (int i = 0; i < 120; ++i) CHECK(std::abs(P7.row(i).sum() - 1.0) <= 1e-9);
  CHECK_THROWS_AS(train_knn(X, y, 3, 121), DataError);
  CHECK_THROWS_AS(train_knn(X, y, 3, 0), DataError);
}

TEST_CASE("macro AUC examples") {
  RowMatrix P(4, 2);
  P.col(1) << 0.1, 0.4, 0.35, 0.8;
  P.col(0) = 1.0 - P.col(1).array();
  const std::vector<int> y{0, 0, 1, 1};
  CHECK(binary_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<std::uint8_t>{0, 0, 1, 1}) ==
        doctest::Approx(0.75));
  CHECK(macro_auc(P, y) == doctest::Approx(0.75));
  RowMatrix perfect(4, 2);
  perfect << 0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.1, 0.9;
  CHECK(macro_auc(perfect, y) == 1.0);
  CHECK(macro_auc(RowMatrix::Constant(4, 2, 0.5), y) == 0.5);
}

TEST_CASE("macro AUC skips unscoreable classes and fails when none remains") {
  WarningCapture cap;
  RowMatrix P(4, 3);
  P << 0.2, 0.8, 0, 0.6, 0.4, 0, 0.3, 0.7, 0, 0.9, 0.1, 0;
  const std::vector<int> y{1, 0, 1, 0};
  CHECK(macro_auc(P, y) == 1.0);
  CHECK(cap.messages.size() == 1);
  CHECK_THROWS_AS(macro_auc(RowMatrix::Constant(3, 2, 0.5), std::vector<int>{1, 1, 1}), DataError);
}

TEST_CASE("macro AUC matches the pairwise counting oracle") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 499;
    const int K = 2 + static_cast<int>(rng() % 3);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng() % K);
    RowMatrix P(n, K);
    for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = static_cast<double>(rng() % 7) / 6.0;
    double expected = 0;
    int scored = 0;
    for (int c = 0; c < K; ++c) {
      const auto pos = std::count(y.begin(), y.end(), c);
      if (pos == 0 || pos == static_cast<long>(n)) continue;
      expected += brute_auc(P, y, c);
      ++scored;
    }
    if (scored == 0) continue;
    WarningCapture quiet;
    CHECK(std::abs(macro_auc(P, y) - expected / scored) <= 1e-12);
  }
}

TEST_CASE("stratified folds") {
  std::vector<int> y;
  for (int i = 0; i < 103; ++i) y.push_back(i % 10 < 7 ? 0 : 1);
  const std::vector<std::string> names{"big", "small"};
  const auto f = stratified_folds(y, names, 5, 9);
  for (int k = 0; k < 5; ++k) {
    long in_fold = 0, pos = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (f[i] == k) ++in_fold, pos += y[i];
    CHECK((in_fold == 20 || in_fold == 21));
    CHECK((pos == 6 || pos == 7));
  }
  CHECK(stratified_folds(y, names, 5, 9) == f);
  std::vector<int> rare(50, 0);
  rare[3] = rare[7] = 1;
  CHECK_THROWS_WITH_AS(stratified_folds(rare, names, 5, 1), doctest::Contains("small"), DataError);
}

TEST_CASE("hyperparameter draws stay in range and cover the log scale") {
  SearchSpace space;
  int below_one = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto h = draw_hyperparameters(space, 5, i);
    CHECK((h.l2_inverse >= 0.001 && h.l2_inverse <= 100.0));
    CHECK((h.k >= 2 && h.k <= 100));
    below_one += h.l2_inverse < 1.0;
  }
  // log-uniform on [1e-3, 1e2]: P(C < 1) = 3/5
  CHECK(std::abs(below_one / 1000.0 - 0.6) < 0.05);
}

TEST_CASE("nested cross-validation") {
  std::mt19937_64 rng(21);
  WarningCapture quiet;

  SUBCASE("labels independent of the features stay near chance") {
    auto fm = gaussian_features(rng, 2000, 4);
    for (auto& y : fm.labels) y = static_cast<int>(rng() % 2);
    const auto r = nested_cv(fm, Algorithm::logreg, {.seed = 1});
    CHECK(r.folds.size() == 5);
    CHECK((r.mean >= 0.45 && r.mean <= 0.55));
  }
  SUBCASE("a perfectly informative feature is found") {
    auto fm = gaussian_features(rng, 2000, 3);
    for (std::size_t i = 0; i < fm.rows(); ++i) fm.labels[i] = fm.columns[1].values[i] > 0 ? 1 : 0;
    CHECK(nested_cv(fm, Algorithm::logreg, {.seed = 2}).mean > 0.95);
    CHECK(nested_cv(fm, Algorithm::knn, {.budget = 10, .seed = 2}).mean > 0.95);
  }
  SUBCASE("deterministic and independent of the worker count") {
    auto fm = gaussian_features(rng, 400, 3);
    for (std::size_t i = 0; i < fm.rows(); ++i) fm.labels[i] = fm.columns[0].values[i] + 0.5 * fm.columns[2].values[i] > 0;
    const auto a = nested_cv(fm, Algorithm::logreg, {.budget = 8, .seed = 3});
    const auto b = nested_cv(fm, Algorithm::logreg, {.budget = 8, .seed = 3, .threads = 3});
    for (int k = 0; k < 5; ++k) {
      CHECK(a.folds[k].macro_auc == b.folds[k].macro_auc);
      CHECK(a.folds[k].chosen.l2_inverse == b.folds[k].chosen.l2_inverse);
      CHECK(a.folds[k].inner_score == b.folds[k].inner_score);
    }
  }
  SUBCASE("budget one equals plain CV with the single drawn configuration") {
    auto fm = gaussian_features(rng, 300, 2);
    for (std::size_t i = 0; i < fm.rows(); ++i) fm.labels[i] = fm.columns[0].values[i] + rng() % 3 * 0.5 > 0.5;
    for (auto alg : {Algorithm::logreg, Algorithm::knn}) {
      const CvOptions opt{.budget = 1, .seed = 4};
      const auto nested = nested_cv(fm, alg, opt);
      for (const auto& f : nested.folds) {
        const auto plain = plain_cv(fm, alg, f.chosen, opt);
        CHECK(plain.folds[f.fold].macro_auc == f.macro_auc);
      }
    }
  }
}

TEST_CASE("single-loop hyperparameter tuning") {
  std::mt19937_64 rng(22);
  WarningCapture quiet;
  auto fm = gaussian_features(rng, 600, 3);
  for (std::size_t i = 0; i < fm.rows(); ++i) fm.labels[i] = fm.columns[0].values[i] + 0.3 * fm.columns[1].values[i] > 0;
  const CvOptions opt{.budget = 6, .seed = 5};
  const auto t = tune_hyperparameters(fm, Algorithm::logreg, opt);
  CHECK(t.fold == -1);
  CHECK(std::isnan(t.macro_auc));
  CHECK(t.inner_score > 0.9);
  bool drawn = false;
  for (std::size_t j = 0; j < opt.budget; ++j) {
    drawn = drawn || draw_hyperparameters(opt.space, derive_seed(5, fnv1a("tune-search")), j).l2_inverse == t.chosen.l2_inverse;
  }
  CHECK(drawn);
  const auto again = tune_hyperparameters(fm, Algorithm::logreg, {.budget = 6, .seed = 5, .threads = 2});
  CHECK(again.chosen.l2_inverse == t.chosen.l2_inverse);
  CHECK(again.inner_score == t.inner_score);
}

TEST_CASE("Shapley sampling") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  RowMatrix background(500, 3);
  for (Eigen::Index i = 0; i < background.size(); ++i) background.data()[i] = z(rng);
  const RowMatrix X = background.topRows(20);
  const std::vector<std::pair<std::size_t, std::size_t>> groups{{0, 1}, {1, 2}, {2, 3}};

  SUBCASE("ignored feature gets zero, additive parts match their closed form") {
    auto g1 = [](double x) { return std::tanh(x); };
    auto g2 = [](double x) { return 0.3 * x * x; };
    const BatchPredictor f = [&](const RowMatrix& B) {
      Eigen::VectorXd y(B.rows());
      for (Eigen::Index i = 0; i < B.rows(); ++i) y(i) = g1(B(i, 0)) + g2(B(i, 1));
      return y;
    };
    const auto sv = shapley_sampling(f, X, background, groups, 2000, 1);
    double mean1 = 0, sd1 = 0;
    for (Eigen::Index i = 0; i < background.rows(); ++i) mean1 += g1(background(i, 0));
    mean1 /= background.rows();
    for (Eigen::Index i = 0; i < background.rows(); ++i) sd1 += std::pow(g1(background(i, 0)) - mean1, 2);
    sd1 = std::sqrt(sd1 / (background.rows() - 1));
    for (Eigen::Index s = 0; s < X.rows(); ++s) {
      CHECK(std::abs(sv.values(s, 2)) < 0.01);
      CHECK(std::abs(sv.values(s, 0) - (g1(X(s, 0)) - mean1)) <= 4 * sd1 / std::sqrt(2000.0));
    }
  }

  SUBCASE("efficiency within three Monte Carlo standard errors") {
    const BatchPredictor f = [](const RowMatrix& B) {
      Eigen::VectorXd y(B.rows());
      for (Eigen::Index i = 0; i < B.rows(); ++i)
        y(i) = 1 / (1 + std::exp(-(B(i, 0) - 2 * B(i, 1) * B(i, 2))));
      return y;
    };
    const std::size_t P = 500;
    const auto sv = shapley_sampling(f, X, background, groups, P, 2);
    const Eigen::VectorXd fb = f(background);
    const double mean = fb.mean();
    const double se = std::sqrt((fb.array() - mean).square().sum() / (fb.size() - 1) / P);
    for (Eigen::Index s = 0; s < X.rows(); ++s) {
      const double total = sv.values.row(s).sum();
      CHECK(std::abs(total - (sv.prediction(s) - sv.baseline(s))) <= 1e-12);
      CHECK(std::abs(total - (sv.prediction(s) - mean)) <= 3 * se);
    }
  }

  SUBCASE("worker count does not change the estimates") {
    const BatchPredictor f = [](const RowMatrix& B) -> Eigen::VectorXd { return B.col(0).array() * B.col(1).array(); };
    const auto a = shapley_sampling(f, X, background, groups, 50, 3, 1);
    const auto b = shapley_sampling(f, X, background, groups, 50, 3, 4);
    CHECK(a.values == b.values);
  }

  SUBCASE("at least one permutation") {
    const BatchPredictor f = [](const RowMatrix& B) -> Eigen::VectorXd { return B.col(0); };
    CHECK_THROWS_AS(shapley_sampling(f, X, background, groups, 0, 1), ConfigError);
  }
}

TEST_CASE("decile aggregation") {
  std::vector<double> v(100), x(100);
  for (int i = 0; i < 100; ++i) v[i] = x[i] = 99 - i;
  const auto d = decile_aggregate(v, x);
  for (int g = 0; g < 10; ++g) {
    CHECK(d.mean_value[g] == doctest::Approx(10 * g + 4.5));
    CHECK(d.mean_feature[g] == doctest::Approx((10 * g + 4.5) / 99));
  }
  const std::vector<double> c(37, 0.25);
  const auto dc = decile_aggregate(c, c);
  for (int g = 0; g < 10; ++g) {
    CHECK(dc.mean_value[g] == 0.25);
    CHECK(dc.mean_feature[g] == 0.5);
  }
  std::vector<double> ten{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  const auto dt = decile_aggregate(ten, ten);
  for (int g = 0; g < 10; ++g) CHECK(dt.mean_value[g] == g + 1);
  CHECK_THROWS_AS(decile_aggregate(std::vector<double>(9, 1.0), std::vector<double>(9, 1.0)), DataError);
}

TEST_CASE("pipeline explanation writes a readable report") {
  std::mt19937_64 rng(31);
  auto fm = gaussian_features(rng, 300, 3);
  fm.columns[0].name = "dim_0";
  fm.columns[1].name = "dim_1";
  fm.add_categorical("education", std::vector<std::optional<std::string>>(300, "vocational"));
  for (std::size_t i = 0; i < fm.rows(); ++i) fm.labels[i] = fm.columns[1].values[i] > 0;
  const auto p = fit_pipeline(fm, Algorithm::logreg, {.l2_inverse = 1.0});
  const auto r = explain_pipeline(p, fm, fm.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}), 1,
                                  {.n_permutations = 50, .seed = 1});
  CHECK(r.features.size() == 4);
  CHECK(r.mean_abs[1] > r.mean_abs[0]);
  CHECK(r.mean_abs[3] == 0.0);
  const auto path = popnet::testing::temp_path("shapley.csv");
  write_shapley(r, path);
  const auto imp = read_shapley_importance(path);
  REQUIRE(imp.size() == 4);
  CHECK(imp[1].feature == "dim_1");
  CHECK(select_dimension(imp) == 1);
}

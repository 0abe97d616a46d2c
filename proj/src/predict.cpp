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


#include "popnet/predict.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "parallel.hpp"
#include "popnet/csv.hpp"
#include "popnet/log.hpp"

namespace popnet {

namespace {

const std::string kMissing = "missing";

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd with_intercept(const RowMatrix& X) {
  Eigen::MatrixXd Xa(X.rows(), X.cols() + 1);
  Xa.leftCols(X.cols()) = X;
  Xa.col(X.cols()).setOnes();
  return Xa;
}

struct BinaryFit {
  Eigen::VectorXd w;
  double gradient_norm = 0.0;
  bool converged = false;
};

// Newton's method with Armijo backtracking on one one-vs-rest problem.
BinaryFit fit_binary(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& y, double lambda,
                     const LogregOptions& opt) {
  const auto n = static_cast<double>(Xa.rows());
  const Eigen::Index p = Xa.cols();
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, lambda);
  penalty(p - 1) = 0.0;

  auto objective = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& z) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) f += log1pexp(z(i)) - y(i) * z(i);
    return f / n + 0.5 * w.cwiseProduct(penalty).dot(w);
  };

  BinaryFit fit;
  fit.w = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z = Xa * fit.w;
  double f = objective(fit.w, z);
  Eigen::VectorXd prob(z.size()), s(z.size());
  for (int iter = 0;; ++iter) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      prob(i) = sigmoid(z(i));
      s(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = Xa.transpose() * (prob - y) / n + penalty.cwiseProduct(fit.w);
    fit.gradient_norm = grad.norm();
    if (fit.gradient_norm <= opt.tolerance) {
      fit.converged = true;
      return fit;
    }
    if (iter >= opt.max_iterations) return fit;

    const Eigen::MatrixXd Xs = Xa.array().colwise() * (s.array() / n).sqrt();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
    H.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose());
    H.diagonal() += penalty;
    H.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = -H.selfadjointView<Eigen::Lower>().ldlt().solve(grad);
    const double slope = grad.dot(step);

    double t = 1.0;
    Eigen::VectorXd w_next;
    Eigen::VectorXd z_next;
    double f_next = f;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      w_next = fit.w + t * step;
      z_next = Xa * w_next;
      f_next = objective(w_next, z_next);
      if (f_next <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) return fit;
    fit.w = std::move(w_next);
    z = std::move(z_next);
    f = f_next;
  }
}

// Labels of the first kmax training points nearest to each query, by
// Euclidean distance with ties broken by training index.
std::vector<int> ranked_neighbor_labels(const KnnModel& m, const RowMatrix& Q, std::size_t kmax) {
  const Eigen::Index nq = Q.rows();
  const Eigen::Index nt = m.points.rows();
  std::vector<int> out(static_cast<std::size_t>(nq) * kmax);
  const Eigen::VectorXd tn = m.points.rowwise().squaredNorm();
  constexpr Eigen::Index kBlock = 256;
  std::vector<std::pair<double, Eigen::Index>> cand(nt);
  for (Eigen::Index b = 0; b < nq; b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, nq - b);
    const RowMatrix block = Q.middleRows(b, rows);
    Eigen::MatrixXd d2 = -2.0 * (block * m.points.transpose());
    d2.colwise() += block.rowwise().squaredNorm();
    d2.rowwise() += tn.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index j = 0; j < nt; ++j) cand[j] = {d2(r, j), j};
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kmax), cand.end());
      for (std::size_t k = 0; k < kmax; ++k)
        out[static_cast<std::size_t>(b + r) * kmax + k] = m.labels[cand[k].second];
    }
  }
  return out;
}

RowMatrix knn_proba_from_ranked(const std::vector<int>& ranked, std::size_t kmax, std::size_t k,
                                std::size_t classes) {
  const std::size_t nq = ranked.size() / kmax;
  RowMatrix P = RowMatrix::Zero(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(classes));
  for (std::size_t q = 0; q < nq; ++q)
    for (std::size_t j = 0; j < k; ++j) P(q, ranked[q * kmax + j]) += 1.0;
  P /= static_cast<double>(k);
  return P;
}

std::vector<std::size_t> rows_where(std::span<const int> fold, int f, bool equal) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if ((fold[i] == f) == equal) out.push_back(i);
  return out;
}

void finish_report(CvReport& r) {
  std::vector<double> s;
  for (const auto& f : r.folds) s.push_back(f.macro_auc);
  r.mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double ss = 0.0;
  for (double x : s) ss += (x - r.mean) * (x - r.mean);
  r.sd = s.size() > 1 ? std::sqrt(ss / static_cast<double>(s.size() - 1)) : 0.0;
}

}  // namespace

std::string_view feature_set_name(FeatureSet s) {
  switch (s) {
    case FeatureSet::embeddings: return "embeddings";
    case FeatureSet::covariates: return "covariates";
    case FeatureSet::embeddings_covariates: return "embeddings+covariates";
  }
  return "embeddings";
}

FeatureSet parse_feature_set(std::string_view name) {
  for (auto s : {FeatureSet::embeddings, FeatureSet::covariates, FeatureSet::embeddings_covariates})
    if (feature_set_name(s) == name) return s;
  throw ConfigError("unknown feature set '" + std::string(name) + "'");
}

std::string_view algorithm_name(Algorithm a) { return a == Algorithm::logreg ? "logreg" : "knn"; }

Algorithm parse_algorithm(std::string_view name) {
  if (name == "logreg") return Algorithm::logreg;
  if (name == "knn") return Algorithm::knn;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Features

void FeatureMatrix::add_continuous(std::string name, std::vector<double> values) {
  columns.push_back({std::move(name), FeatureKind::continuous, std::move(values), {}});
}

void FeatureMatrix::add_categorical(std::string name,
                                    std::vector<std::optional<std::string>> values) {
  columns.push_back({std::move(name), FeatureKind::categorical, {}, std::move(values)});
}

void FeatureMatrix::validate() const {
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second) throw DataError("duplicate feature '" + c.name + "'");
    const std::size_t len =
        c.kind == FeatureKind::continuous ? c.values.size() : c.categories.size();
    if (len != rows()) throw DataError("feature '" + c.name + "' has the wrong number of rows");
  }
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= class_names.size())
      throw DataError("label index out of range");
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.class_names = class_names;
  out.feature_set = feature_set;
  for (auto r : rows) out.labels.push_back(labels[r]);
  for (const auto& c : columns) {
    FeatureColumn col{c.name, c.kind, {}, {}};
    if (c.kind == FeatureKind::continuous) {
      for (auto r : rows) col.values.push_back(c.values[r]);
    } else {
      for (auto r : rows) col.categories.push_back(c.categories[r]);
    }
    out.columns.push_back(std::move(col));
  }
  return out;
}

Imputer Imputer::fit(const FeatureMatrix& train) {
  Imputer imp;
  for (const auto& c : train.columns) {
    imp.names_.push_back(c.name);
    if (c.kind == FeatureKind::continuous) {
      std::vector<double> seen;
      for (double v : c.values)
        if (!std::isnan(v)) seen.push_back(v);
      if (seen.empty()) throw DataError("feature '" + c.name + "' has no observed values");
      imp.medians_.push_back(median(std::move(seen)));
      imp.categories_.emplace_back();
    } else {
      std::set<std::string> cats;
      for (const auto& v : c.categories)
        if (v && *v != kMissing) cats.insert(*v);
      std::vector<std::string> list(cats.begin(), cats.end());
      list.push_back(kMissing);
      imp.medians_.push_back(NAN);
      imp.categories_.push_back(std::move(list));
    }
  }
  return imp;
}

FeatureMatrix Imputer::apply(const FeatureMatrix& data) const {
  if (data.columns.size() != names_.size()) throw DataError("imputer applied to a different feature layout");
  FeatureMatrix out = data;
  for (std::size_t j = 0; j < out.columns.size(); ++j) {
    auto& c = out.columns[j];
    if (c.name != names_[j]) throw DataError("imputer expected feature '" + names_[j] + "'");
    if (c.kind == FeatureKind::continuous) {
      for (double& v : c.values)
        if (std::isnan(v)) v = medians_[j];
    } else {
      for (auto& v : c.categories)
        if (!v) v = kMissing;
    }
  }
  return out;
}

Preprocessor Preprocessor::fit(const FeatureMatrix& train) {
  train.validate();
  Preprocessor p;
  p.imputer_ = Imputer::fit(train);
  const FeatureMatrix filled = p.imputer_.apply(train);
  for (std::size_t j = 0; j < filled.columns.size(); ++j) {
    const auto& c = filled.columns[j];
    const std::size_t first = p.width_;
    if (c.kind == FeatureKind::continuous) {
      const double n = static_cast<double>(c.values.size());
      const double mean = std::accumulate(c.values.begin(), c.values.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : c.values) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / n);
      p.mean_.push_back(mean);
      p.scale_.push_back(sd > 0 ? sd : 1.0);
      p.width_ += 1;
    } else {
      p.mean_.push_back(0.0);
      p.scale_.push_back(1.0);
      p.width_ += p.imputer_.categories()[j].size();
    }
    p.groups_.emplace_back(first, p.width_);
  }
  return p;
}

RowMatrix Preprocessor::transform(const FeatureMatrix& data) const {
  const FeatureMatrix filled = imputer_.apply(data);
  RowMatrix X = RowMatrix::Zero(static_cast<Eigen::Index>(data.rows()),
                                static_cast<Eigen::Index>(width_));
  for (std::size_t j = 0; j < filled.columns.size(); ++j) {
    const auto& c = filled.columns[j];
    const auto first = static_cast<Eigen::Index>(groups_[j].first);
    if (c.kind == FeatureKind::continuous) {
      for (std::size_t i = 0; i < c.values.size(); ++i)
        X(static_cast<Eigen::Index>(i), first) = (c.values[i] - mean_[j]) / scale_[j];
    } else {
      const auto& cats = imputer_.categories()[j];
      for (std::size_t i = 0; i < c.categories.size(); ++i) {
        auto it = std::lower_bound(cats.begin(), cats.end() - 1, *c.categories[i]);
        std::size_t pos = static_cast<std::size_t>(it - cats.begin());
        if (*c.categories[i] == kMissing) {
          pos = cats.size() - 1;
        } else if (it == cats.end() - 1 || *it != *c.categories[i]) {
          continue;  // category unseen in training: all indicators zero
        }
        X(static_cast<Eigen::Index>(i), first + static_cast<Eigen::Index>(pos)) = 1.0;
      }
    }
  }
  return X;
}

// ---------------------------------------------------------------------------
// Learners

LogisticModel train_logreg(const RowMatrix& X, std::span<const int> labels, std::size_t classes,
                           double l2_inverse, LogregOptions options) {
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw DataError("feature rows and labels differ");
  if (!(l2_inverse > 0)) throw ConfigError("L2 inverse strength must be positive");
  std::vector<std::size_t> count(classes, 0);
  for (int y : labels) ++count.at(static_cast<std::size_t>(y));
  if (std::count_if(count.begin(), count.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw DataError("logistic regression needs at least two classes");

  LogisticModel m;
  m.classes = classes;
  m.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), X.cols() + 1);
  m.trained.assign(classes, false);
  const Eigen::MatrixXd Xa = with_intercept(X);
  const double lambda = 1.0 / (l2_inverse * static_cast<double>(X.rows()));
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0) continue;
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = labels[i] == static_cast<int>(c) ? 1.0 : 0.0;
    const auto fit = fit_binary(Xa, y, lambda, options);
    m.weights.row(static_cast<Eigen::Index>(c)) = fit.w.transpose();
    m.trained[c] = true;
    m.max_gradient_norm = std::max(m.max_gradient_norm, fit.gradient_norm);
    if (!fit.converged) {
      m.converged = false;
      warn("logistic regression did not reach gradient norm " + format_real(options.tolerance) +
           " for class " + std::to_string(c) + " (norm " + format_real(fit.gradient_norm) + ")");
    }
  }
  return m;
}

Eigen::VectorXd logreg_gradient(const LogisticModel& model, const RowMatrix& X,
                                std::span<const int> labels, std::size_t c, double l2_inverse) {
  const Eigen::MatrixXd Xa = with_intercept(X);
  const auto n = static_cast<double>(X.rows());
  const Eigen::VectorXd w = model.weights.row(static_cast<Eigen::Index>(c)).transpose();
  const Eigen::VectorXd z = Xa * w;
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    r(i) = sigmoid(z(i)) - (labels[i] == static_cast<int>(c) ? 1.0 : 0.0);
  Eigen::VectorXd g = Xa.transpose() * r / n;
  g.head(X.cols()) += w.head(X.cols()) / (l2_inverse * n);
  return g;
}

KnnModel train_knn(const RowMatrix& X, std::span<const int> labels, std::size_t classes,
                   std::size_t k) {
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw DataError("feature rows and labels differ");
  if (k == 0 || k > labels.size())
    throw DataError("k-NN: k = " + std::to_string(k) + " with " + std::to_string(labels.size()) +
                    " training rows");
  return {classes, k, X, std::vector<int>(labels.begin(), labels.end())};
}

RowMatrix predict_proba(const Model& model, const RowMatrix& X) {
  if (const auto* lr = std::get_if<LogisticModel>(&model)) {
    if (X.cols() + 1 != lr->weights.cols()) throw DataError("feature width does not match the model");
    const Eigen::MatrixXd Z = with_intercept(X) * lr->weights.transpose();
    RowMatrix P(X.rows(), static_cast<Eigen::Index>(lr->classes));
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      for (Eigen::Index c = 0; c < P.cols(); ++c)
        P(i, c) = lr->trained[static_cast<std::size_t>(c)] ? sigmoid(Z(i, c)) : 0.0;
      P.row(i) /= P.row(i).sum();
    }
    return P;
  }
  const auto& knn = std::get<KnnModel>(model);
  if (X.cols() != knn.points.cols()) throw DataError("feature width does not match the model");
  return knn_proba_from_ranked(ranked_neighbor_labels(knn, X, knn.k), knn.k, knn.k, knn.classes);
}

// ---------------------------------------------------------------------------
// Scoring

double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double npos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) {
        rank_sum += midrank;
        npos += 1.0;
      }
    i = j;
  }
  const double nneg = static_cast<double>(n) - npos;
  return (rank_sum - npos * (npos + 1.0) / 2.0) / (npos * nneg);
}

double macro_auc(const RowMatrix& probabilities, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(probabilities.rows()) != n) throw DataError("scores and labels differ in length");
  if (probabilities.cols() < 2) throw DataError("macro AUC needs at least two classes");
  double total = 0.0;
  int scored = 0;
  std::vector<double> scores(n);
  std::vector<std::uint8_t> pos(n);
  for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
    std::size_t npos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probabilities(static_cast<Eigen::Index>(i), c);
      pos[i] = labels[i] == static_cast<int>(c);
      npos += pos[i];
    }
    if (npos == 0 || npos == n) {
      warn("macro AUC: class " + std::to_string(c) + " has no " + (npos == 0 ? "positives" : "negatives") +
           "; skipped");
      continue;
    }
    total += binary_auc(scores, pos);
    ++scored;
  }
  if (scored == 0) throw DataError("macro AUC: no class has both positives and negatives");
  return total / scored;
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<int> stratified_folds(std::span<const int> labels,
                                  std::span<const std::string> class_names, int folds,
                                  std::uint64_t seed) {
  if (folds < 2) throw ConfigError("at least two folds are required");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<int> fold(labels.size(), 0);
  std::size_t offset = 0;
  for (auto& [c, rows] : by_class) {
    if (rows.size() < static_cast<std::size_t>(folds)) {
      const std::string name = static_cast<std::size_t>(c) < class_names.size()
                                   ? class_names[static_cast<std::size_t>(c)]
                                   : std::to_string(c);
      throw DataError("cannot stratify: class '" + name + "' has " + std::to_string(rows.size()) +
                      " rows for " + std::to_string(folds) + " folds");
    }
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[uniform_below(rng, i)]);
    for (std::size_t j = 0; j < rows.size(); ++j)
      fold[rows[j]] = static_cast<int>((offset + j) % static_cast<std::size_t>(folds));
    offset += rows.size();
  }
  return fold;
}

Hyperparameters draw_hyperparameters(const SearchSpace& space, std::uint64_t seed, std::size_t i) {
  SplitMix64 rng(derive_seed(seed, i));
  const double lo = std::log(space.l2_min);
  const double hi = std::log(space.l2_max);
  Hyperparameters h;
  h.l2_inverse = std::exp(lo + uniform01(rng) * (hi - lo));
  h.k = space.k_min + uniform_below(rng, space.k_max - space.k_min + 1);
  return h;
}

RowMatrix Pipeline::predict_proba(const FeatureMatrix& data) const {
  return popnet::predict_proba(model, preprocessor.transform(data));
}

Pipeline fit_pipeline(const FeatureMatrix& train, Algorithm algorithm, const Hyperparameters& h) {
  Pipeline p{Preprocessor::fit(train), LogisticModel{}};
  const RowMatrix X = p.preprocessor.transform(train);
  if (algorithm == Algorithm::logreg) {
    p.model = train_logreg(X, train.labels, train.class_count(), h.l2_inverse);
  } else {
    p.model = train_knn(X, train.labels, train.class_count(), h.k);
  }
  return p;
}

namespace {

struct InnerFold {
  RowMatrix train;
  std::vector<int> train_labels;
  RowMatrix valid;
  std::vector<int> valid_labels;
  std::vector<int> ranked;  // k-NN only
  std::size_t kmax = 0;
};

double score_draw(const InnerFold& f, Algorithm algorithm, const Hyperparameters& h,
                  std::size_t classes) {
  if (algorithm == Algorithm::logreg) {
    const Model m = train_logreg(f.train, f.train_labels, classes, h.l2_inverse);
    return macro_auc(predict_proba(m, f.valid), f.valid_labels);
  }
  if (h.k > f.kmax)
    throw DataError("k-NN: k = " + std::to_string(h.k) + " exceeds the inner training size");
  return macro_auc(knn_proba_from_ranked(f.ranked, f.kmax, h.k, classes), f.valid_labels);
}

void check_options(const FeatureMatrix& data, const CvOptions& o) {
  data.validate();
  if (o.budget < 1) throw ConfigError("search budget must be at least 1");
  if (!(o.space.l2_min > 0 && o.space.l2_min <= o.space.l2_max))
    throw ConfigError("invalid L2 search range");
  if (o.space.k_min < 1 || o.space.k_min > o.space.k_max) throw ConfigError("invalid k search range");
}

}  // namespace

namespace {

struct SearchResult {
  Hyperparameters chosen;
  double score = 0.0;
};

// Random search scored by stratified CV over `train`.
SearchResult search(const FeatureMatrix& train, Algorithm algorithm, const CvOptions& o,
                    std::uint64_t fold_seed, std::uint64_t search_seed) {
  const std::size_t classes = train.class_count();
  const auto inner = stratified_folds(train.labels, train.class_names, o.inner_folds, fold_seed);
  std::vector<InnerFold> folds(static_cast<std::size_t>(o.inner_folds));
  for (int f = 0; f < o.inner_folds; ++f) {
    const FeatureMatrix a = train.subset(rows_where(inner, f, false));
    const FeatureMatrix b = train.subset(rows_where(inner, f, true));
    const auto pre = Preprocessor::fit(a);
    auto& fold = folds[static_cast<std::size_t>(f)];
    fold.train = pre.transform(a);
    fold.train_labels = a.labels;
    fold.valid = pre.transform(b);
    fold.valid_labels = b.labels;
    if (algorithm == Algorithm::knn) {
      fold.kmax = std::min(o.space.k_max, a.rows());
      const KnnModel m = train_knn(fold.train, fold.train_labels, classes, fold.kmax);
      fold.ranked = ranked_neighbor_labels(m, fold.valid, fold.kmax);
    }
  }

  std::vector<Hyperparameters> draws(o.budget);
  std::vector<double> scores(o.budget);
  for (std::size_t j = 0; j < o.budget; ++j) draws[j] = draw_hyperparameters(o.space, search_seed, j);
  detail::parallel_chunks(o.budget, o.threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t j = begin; j < end; ++j) {
      double sum = 0.0;
      for (const auto& fold : folds) sum += score_draw(fold, algorithm, draws[j], classes);
      scores[j] = sum / static_cast<double>(folds.size());
    }
  });
  const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  return {draws[best], scores[best]};
}

}  // namespace

CvReport nested_cv(const FeatureMatrix& data, Algorithm algorithm, const CvOptions& o) {
  check_options(data, o);
  const auto outer = stratified_folds(data.labels, data.class_names, o.outer_folds,
                                      derive_seed(o.seed, fnv1a("outer")));
  CvReport report{algorithm, data.feature_set, {}, 0.0, 0.0};
  for (int of = 0; of < o.outer_folds; ++of) {
    const auto fold_index = static_cast<std::uint64_t>(of);
    const FeatureMatrix train = data.subset(rows_where(outer, of, false));
    const auto best = search(train, algorithm, o, derive_seed(o.seed, fnv1a("inner"), fold_index),
                             derive_seed(o.seed, fnv1a("search"), fold_index));
    const Pipeline p = fit_pipeline(train, algorithm, best.chosen);
    const FeatureMatrix test = data.subset(rows_where(outer, of, true));
    report.folds.push_back({of, best.chosen, best.score, macro_auc(p.predict_proba(test), test.labels)});
  }
  finish_report(report);
  return report;
}

FoldResult tune_hyperparameters(const FeatureMatrix& data, Algorithm algorithm, const CvOptions& o) {
  check_options(data, o);
  const auto best = search(data, algorithm, o, derive_seed(o.seed, fnv1a("tune-folds")),
                           derive_seed(o.seed, fnv1a("tune-search")));
  return {-1, best.chosen, best.score, NAN};
}

CvReport plain_cv(const FeatureMatrix& data, Algorithm algorithm, const Hyperparameters& h,
                  const CvOptions& o) {
  check_options(data, o);
  const auto outer = stratified_folds(data.labels, data.class_names, o.outer_folds,
                                      derive_seed(o.seed, fnv1a("outer")));
  CvReport report{algorithm, data.feature_set, {}, 0.0, 0.0};
  for (int of = 0; of < o.outer_folds; ++of) {
    const FeatureMatrix train = data.subset(rows_where(outer, of, false));
    const FeatureMatrix test = data.subset(rows_where(outer, of, true));
    const Pipeline p = fit_pipeline(train, algorithm, h);
    report.folds.push_back({of, h, NAN, macro_auc(p.predict_proba(test), test.labels)});
  }
  finish_report(report);
  return report;
}

void write_cv_report(std::span<const CvReport> reports, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.row({"fold", "algorithm", "feature_set", "l2_inverse", "k", "inner_macro_auc", "macro_auc"});
  for (const auto& report : reports) {
    const bool lr = report.algorithm == Algorithm::logreg;
    for (const auto& f : report.folds)
      w.row({std::to_string(f.fold), std::string(algorithm_name(report.algorithm)),
             std::string(feature_set_name(report.feature_set)), lr ? format_real(f.chosen.l2_inverse) : "",
             lr ? "" : std::to_string(f.chosen.k), format_real(f.inner_score), format_real(f.macro_auc)});
  }
  w.close();
}

void write_cv_report(const CvReport& report, const std::filesystem::path& path) {
  write_cv_report(std::span<const CvReport>(&report, 1), path);
}

FeatureMatrix build_features(const RowMatrix* embedding, const AttributeTable* attributes,
                             std::span<const int> labels, std::vector<std::string> class_names,
                             FeatureSet set, const CovariateSpec& covariates) {
  const bool want_emb = set != FeatureSet::covariates;
  const bool want_cov = set != FeatureSet::embeddings;
  if (want_emb && embedding == nullptr) throw ConfigError("feature set needs an embedding");
  if (want_cov && attributes == nullptr) throw ConfigError("feature set needs an attribute table");

  // Keep only classes that occur, preserving their order.
  std::vector<int> remap(class_names.size(), -1);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_names.size()) throw DataError("label index out of range");
    remap[static_cast<std::size_t>(y)] = 0;
  }
  FeatureMatrix fm;
  fm.feature_set = set;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (remap[c] < 0) continue;
    remap[c] = static_cast<int>(fm.class_names.size());
    fm.class_names.push_back(class_names[c]);
  }
  for (int y : labels) fm.labels.push_back(remap[static_cast<std::size_t>(y)]);

  if (want_emb) {
    if (static_cast<std::size_t>(embedding->rows()) != labels.size())
      throw DataError("embedding rows do not match the labels");
    for (Eigen::Index d = 0; d < embedding->cols(); ++d) {
      std::vector<double> col(labels.size());
      for (std::size_t i = 0; i < col.size(); ++i) col[i] = (*embedding)(static_cast<Eigen::Index>(i), d);
      fm.add_continuous("dim_" + std::to_string(d), std::move(col));
    }
  }
  if (want_cov) {
    if (attributes->row_count() != labels.size()) throw DataError("attribute rows do not match the labels");
    for (const auto& name : covariates.continuous) fm.add_continuous(name, attributes->numeric(name));
    for (const auto& name : covariates.categorical) fm.add_categorical(name, attributes->categorical(name));
  }
  fm.validate();
  return fm;
}

}  // namespace popnet

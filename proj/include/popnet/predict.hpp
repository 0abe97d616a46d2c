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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "popnet/attributes.hpp"
#include "popnet/common.hpp"

namespace popnet {

enum class FeatureKind : std::uint8_t { continuous, categorical };
enum class FeatureSet : std::uint8_t { embeddings, covariates, embeddings_covariates };

std::string_view feature_set_name(FeatureSet s);
FeatureSet parse_feature_set(std::string_view name);

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<double> values;                         // continuous; NaN = missing
  std::vector<std::optional<std::string>> categories;  // categorical; nullopt = missing
};

/// Labeled samples with named continuous and categorical features. Labels are
/// class indices into class_names.
struct FeatureMatrix {
  std::vector<FeatureColumn> columns;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  FeatureSet feature_set = FeatureSet::embeddings;

  std::size_t rows() const { return labels.size(); }
  std::size_t class_count() const { return class_names.size(); }
  void add_continuous(std::string name, std::vector<double> values);
  void add_categorical(std::string name, std::vector<std::optional<std::string>> values);
  /// Throws DataError on duplicate names, ragged columns or out-of-range labels.
  void validate() const;
  FeatureMatrix subset(std::span<const std::size_t> rows) const;
};

/// Training-fold statistics only: the median of every continuous column and
/// the category list (plus "missing") of every categorical column.
class Imputer {
 public:
  /// Throws DataError for a continuous column with no observed value.
  static Imputer fit(const FeatureMatrix& train);
  FeatureMatrix apply(const FeatureMatrix& data) const;

  const std::vector<double>& medians() const { return medians_; }
  const std::vector<std::vector<std::string>>& categories() const { return categories_; }

 private:
  std::vector<std::string> names_;
  std::vector<double> medians_;                       // NaN for categorical columns
  std::vector<std::vector<std::string>> categories_;  // empty for continuous columns
};

/// Imputation, then standardization of continuous columns (training mean and
/// sd) and one-hot coding of categorical columns over the training categories.
class Preprocessor {
 public:
  static Preprocessor fit(const FeatureMatrix& train);
  RowMatrix transform(const FeatureMatrix& data) const;

  std::size_t output_width() const { return width_; }
  /// Encoded column range [first, last) of each input feature.
  const std::vector<std::pair<std::size_t, std::size_t>>& groups() const { return groups_; }
  const Imputer& imputer() const { return imputer_; }

 private:
  Imputer imputer_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<std::pair<std::size_t, std::size_t>> groups_;
  std::size_t width_ = 0;
};

/// One-vs-rest L2 logistic regression. Per class, minimizes
/// (1/n) sum logloss + |w|^2 / (2 C n) with an unpenalized intercept.
struct LogisticModel {
  std::size_t classes = 0;
  Eigen::MatrixXd weights;  // classes x (features + 1), intercept last
  std::vector<bool> trained;  // classes absent from training get probability 0
  bool converged = true;
  double max_gradient_norm = 0.0;
};

struct KnnModel {
  std::size_t classes = 0;
  std::size_t k = 1;
  RowMatrix points;
  std::vector<int> labels;
};

using Model = std::variant<LogisticModel, KnnModel>;

struct LogregOptions {
  double tolerance = 1e-6;
  int max_iterations = 100;
};

/// Throws DataError when fewer than two classes are present. Non-convergence
/// emits a warning and keeps the best iterate.
LogisticModel train_logreg(const RowMatrix& X, std::span<const int> labels, std::size_t classes,
                           double l2_inverse, LogregOptions options = {});
/// Throws DataError when k exceeds the training size or is zero.
KnnModel train_knn(const RowMatrix& X, std::span<const int> labels, std::size_t classes,
                   std::size_t k);

/// Rows are class probabilities summing to 1.
RowMatrix predict_proba(const Model& model, const RowMatrix& X);

/// Gradient of the logistic objective of class c at the model weights.
Eigen::VectorXd logreg_gradient(const LogisticModel& model, const RowMatrix& X,
                                std::span<const int> labels, std::size_t c, double l2_inverse);

/// Unweighted mean over classes of one-vs-rest AUC with ties counted half.
/// Classes lacking positives or negatives are skipped with a warning; a
/// DataError is raised when none remains.
double macro_auc(const RowMatrix& probabilities, std::span<const int> labels);
/// AUC of one score vector against a boolean target (ties count half).
double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

enum class Algorithm : std::uint8_t { logreg, knn };
std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct Hyperparameters {
  double l2_inverse = 1.0;
  std::size_t k = 5;
};

/// Fold index per row; rows of every class are shuffled and dealt round-robin.
/// A class with fewer rows than folds is a DataError naming it.
std::vector<int> stratified_folds(std::span<const int> labels, std::span<const std::string> class_names,
                                  int folds, std::uint64_t seed);

struct SearchSpace {
  double l2_min = 0.001;
  double l2_max = 100.0;
  std::size_t k_min = 2;
  std::size_t k_max = 100;
};

/// Draw i of the seeded random search: log-uniform C, uniform integer k.
Hyperparameters draw_hyperparameters(const SearchSpace& space, std::uint64_t seed, std::size_t i);

struct FoldResult {
  int fold = 0;
  Hyperparameters chosen;
  double inner_score = 0.0;
  double macro_auc = 0.0;
};

struct CvReport {
  Algorithm algorithm = Algorithm::logreg;
  FeatureSet feature_set = FeatureSet::embeddings;
  std::vector<FoldResult> folds;
  double mean = 0.0;
  double sd = 0.0;
};

struct CvOptions {
  int outer_folds = 5;
  int inner_folds = 5;
  std::size_t budget = 100;
  SearchSpace space;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Preprocessor plus learner fitted on `train`.
struct Pipeline {
  Preprocessor preprocessor;
  Model model;

  RowMatrix predict_proba(const FeatureMatrix& data) const;
};

Pipeline fit_pipeline(const FeatureMatrix& train, Algorithm algorithm, const Hyperparameters& h);

/// Nested stratified cross-validation with random hyperparameter search.
CvReport nested_cv(const FeatureMatrix& data, Algorithm algorithm, const CvOptions& options);

/// Plain stratified CV of one configuration over the same outer folds that
/// nested_cv uses for this seed.
CvReport plain_cv(const FeatureMatrix& data, Algorithm algorithm, const Hyperparameters& h,
                  const CvOptions& options);

/// Single-loop random search: inner_folds-fold CV over all rows, budget draws.
/// The returned fold index is -1 and its macro_auc is NaN.
FoldResult tune_hyperparameters(const FeatureMatrix& data, Algorithm algorithm, const CvOptions& options);

/// One row per outer fold of every report, in order.
void write_cv_report(std::span<const CvReport> reports, const std::filesystem::path& path);
void write_cv_report(const CvReport& report, const std::filesystem::path& path);

/// Covariate roster used by the covariates feature sets.
struct CovariateSpec {
  std::vector<std::string> continuous = {"age", "income_percentile", "urbanicity"};
  std::vector<std::string> categorical = {"education", "gender", "parents_born_abroad"};
};

/// Joins embedding rows (one per node, `dim_<k>` features) and attribute
/// columns for the given feature set. `attributes` must be aligned to the
/// embedding rows.
FeatureMatrix build_features(const RowMatrix* embedding, const AttributeTable* attributes,
                             std::span<const int> labels, std::vector<std::string> class_names,
                             FeatureSet set, const CovariateSpec& covariates = {});

}  // namespace popnet

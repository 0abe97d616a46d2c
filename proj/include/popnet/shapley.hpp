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

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "popnet/predict.hpp"
#include "popnet/utility.hpp"

namespace popnet {

/// Maps a batch of encoded rows to the target-class probability of each row.
using BatchPredictor = std::function<Eigen::VectorXd(const RowMatrix&)>;

struct ShapleyValues {
  RowMatrix values;            // samples x features
  Eigen::VectorXd prediction;  // f(x) per sample
  Eigen::VectorXd baseline;    // mean f over the drawn background rows, per sample
};

/// Permutation-sampling Shapley values. Feature j owns the encoded columns
/// groups[j]; absent features take the values of a background row drawn per
/// permutation. By construction the values of a sample sum to
/// prediction - baseline.
ShapleyValues shapley_sampling(const BatchPredictor& f, const RowMatrix& X,
                               const RowMatrix& background,
                               std::span<const std::pair<std::size_t, std::size_t>> groups,
                               std::size_t n_permutations, std::uint64_t seed,
                               unsigned threads = 1);

struct DecileSummary {
  std::array<double, 10> mean_value{};
  /// Mean feature value rescaled to [0, 1] over all samples (0.5 when the
  /// feature is constant; NaN for categorical features).
  std::array<double, 10> mean_feature{};
};

/// Samples sorted by value and split into ten groups whose sizes differ by at
/// most one. DataError for fewer than ten samples.
DecileSummary decile_aggregate(std::span<const double> values, std::span<const double> feature_values);

struct ShapleyReport {
  std::string target_class;
  std::vector<std::string> features;
  RowMatrix values;
  std::vector<double> mean_abs;
  std::vector<DecileSummary> deciles;

  std::vector<FeatureImportance> importance() const;
};

struct ShapleyOptions {
  std::size_t n_permutations = 200;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Explains the target-class probability of a fitted pipeline on `rows`, with
/// background rows taken from the training data.
ShapleyReport explain_pipeline(const Pipeline& pipeline, const FeatureMatrix& train,
                               const FeatureMatrix& rows, int target_class,
                               const ShapleyOptions& options);

/// Columns: feature, mean_abs_shapley, shapley_d1..d10, value_d1..d10.
void write_shapley(const ShapleyReport& report, const std::filesystem::path& path);
std::vector<FeatureImportance> read_shapley_importance(const std::filesystem::path& path);

}  // namespace popnet

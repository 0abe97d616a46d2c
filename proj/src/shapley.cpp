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


#include "popnet/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parallel.hpp"
#include "popnet/csv.hpp"
#include "text_util.hpp"

namespace popnet {

ShapleyValues shapley_sampling(const BatchPredictor& f, const RowMatrix& X,
                               const RowMatrix& background,
                               std::span<const std::pair<std::size_t, std::size_t>> groups,
                               std::size_t n_permutations, std::uint64_t seed, unsigned threads) {
  if (n_permutations < 1) throw ConfigError("Shapley sampling needs at least one permutation");
  if (background.rows() == 0) throw DataError("Shapley sampling needs background rows");
  if (X.cols() != background.cols()) throw DataError("background width differs from the samples");
  const std::size_t F = groups.size();
  const Eigen::Index n = X.rows();
  ShapleyValues out{RowMatrix::Zero(n, static_cast<Eigen::Index>(F)), Eigen::VectorXd(n),
                    Eigen::VectorXd(n)};
  constexpr std::size_t kChunk = 128;

  detail::parallel_chunks(static_cast<std::size_t>(n), threads,
                          [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<std::size_t> perm(F);
    std::vector<std::size_t> order;
    for (std::size_t s = begin; s < end; ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      SplitMix64 rng(derive_seed(seed, s));
      double baseline = 0.0;
      for (std::size_t p0 = 0; p0 < n_permutations; p0 += kChunk) {
        const std::size_t count = std::min(kChunk, n_permutations - p0);
        RowMatrix batch(static_cast<Eigen::Index>(count * (F + 1)), X.cols());
        order.assign(count * F, 0);
        for (std::size_t p = 0; p < count; ++p) {
          std::iota(perm.begin(), perm.end(), std::size_t{0});
          for (std::size_t i = F; i > 1; --i) std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
          const auto b = static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(background.rows())));
          auto base = static_cast<Eigen::Index>(p * (F + 1));
          batch.row(base) = background.row(b);
          for (std::size_t j = 0; j < F; ++j) {
            batch.row(base + 1) = batch.row(base);
            ++base;
            const auto [first, last] = groups[perm[j]];
            for (std::size_t c = first; c < last; ++c)
              batch(base, static_cast<Eigen::Index>(c)) = X(row, static_cast<Eigen::Index>(c));
            order[p * F + j] = perm[j];
          }
        }
        const Eigen::VectorXd y = f(batch);
        for (std::size_t p = 0; p < count; ++p) {
          const auto base = static_cast<Eigen::Index>(p * (F + 1));
          baseline += y(base);
          for (std::size_t j = 0; j < F; ++j)
            out.values(row, static_cast<Eigen::Index>(order[p * F + j])) +=
                y(base + static_cast<Eigen::Index>(j) + 1) - y(base + static_cast<Eigen::Index>(j));
        }
      }
      const auto P = static_cast<double>(n_permutations);
      out.values.row(row) /= P;
      out.baseline(row) = baseline / P;
    }
  });
  out.prediction = f(X);
  return out;
}

DecileSummary decile_aggregate(std::span<const double> values, std::span<const double> feature_values) {
  const std::size_t n = values.size();
  if (n < 10) throw DataError("decile aggregation needs at least 10 samples");
  if (feature_values.size() != n) throw DataError("feature values do not match the Shapley values");
  double lo = INFINITY, hi = -INFINITY;
  for (double v : feature_values) {
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  DecileSummary d;
  for (std::size_t g = 0; g < 10; ++g) {
    const std::size_t first = g * n / 10;
    const std::size_t last = (g + 1) * n / 10;
    double sv = 0.0, sf = 0.0;
    for (std::size_t i = first; i < last; ++i) {
      sv += values[order[i]];
      const double x = feature_values[order[i]];
      sf += hi > lo ? (x - lo) / (hi - lo) : (std::isnan(x) ? x : 0.5);
    }
    const auto size = static_cast<double>(last - first);
    d.mean_value[g] = sv / size;
    d.mean_feature[g] = sf / size;
  }
  return d;
}

std::vector<FeatureImportance> ShapleyReport::importance() const {
  std::vector<FeatureImportance> out;
  for (std::size_t j = 0; j < features.size(); ++j) out.push_back({features[j], mean_abs[j]});
  return out;
}

ShapleyReport explain_pipeline(const Pipeline& pipeline, const FeatureMatrix& train,
                               const FeatureMatrix& rows, int target_class,
                               const ShapleyOptions& options) {
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= rows.class_count())
    throw ConfigError("Shapley target class out of range");
  const RowMatrix X = pipeline.preprocessor.transform(rows);
  const RowMatrix background = pipeline.preprocessor.transform(train);
  const BatchPredictor f = [&](const RowMatrix& batch) -> Eigen::VectorXd {
    return predict_proba(pipeline.model, batch).col(target_class);
  };
  const auto sv = shapley_sampling(f, X, background, pipeline.preprocessor.groups(),
                                   options.n_permutations, options.seed, options.threads);

  ShapleyReport r;
  r.target_class = rows.class_names[static_cast<std::size_t>(target_class)];
  r.values = sv.values;
  const FeatureMatrix filled = pipeline.preprocessor.imputer().apply(rows);
  for (std::size_t j = 0; j < filled.columns.size(); ++j) {
    const auto& col = filled.columns[j];
    r.features.push_back(col.name);
    const Eigen::VectorXd v = sv.values.col(static_cast<Eigen::Index>(j));
    r.mean_abs.push_back(v.cwiseAbs().mean());
    std::vector<double> feature = col.kind == FeatureKind::continuous
                                      ? col.values
                                      : std::vector<double>(rows.rows(), NAN);
    r.deciles.push_back(decile_aggregate(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), feature));
  }
  return r;
}

void write_shapley(const ShapleyReport& report, const std::filesystem::path& path) {
  CsvWriter w(path);
  std::vector<std::string> header{"feature", "mean_abs_shapley"};
  for (int g = 1; g <= 10; ++g) header.push_back("shapley_d" + std::to_string(g));
  for (int g = 1; g <= 10; ++g) header.push_back("value_d" + std::to_string(g));
  w.row(header);
  for (std::size_t j = 0; j < report.features.size(); ++j) {
    std::vector<std::string> row{report.features[j], format_real(report.mean_abs[j])};
    for (double x : report.deciles[j].mean_value) row.push_back(format_real(x));
    for (double x : report.deciles[j].mean_feature) row.push_back(format_real(x));
    w.row(row);
  }
  w.close();
}

std::vector<FeatureImportance> read_shapley_importance(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  if (table.empty() || table[0].size() < 2 || table[0][0] != "feature" || table[0][1] != "mean_abs_shapley")
    throw DataError(path.string() + ": not a Shapley report");
  std::vector<FeatureImportance> out;
  for (std::size_t i = 1; i < table.size(); ++i) {
    double v = 0.0;
    if (table[i].size() < 2 || !detail::parse_double(table[i][1], v))
      throw DataError(path.string() + ": row " + std::to_string(i + 1) + " is malformed");
    out.push_back({table[i][0], v});
  }
  return out;
}

}  // namespace popnet

#pragma once

#include <array>
#include <cmath>

namespace popnet::detail {

/// Precomputed logistic function on [-kMax, kMax], word2vec style.
class SigmoidTable {
 public:
  static constexpr float kMax = 6.0f;
  static constexpr int kSize = 4096;

  SigmoidTable() {
    for (int i = 0; i < kSize; ++i) {
      const double x = (2.0 * i / kSize - 1.0) * kMax;
      table_[i] = static_cast<float>(1.0 / (1.0 + std::exp(-x)));
    }
  }

  /// Gradient scale (label - sigmoid(f)) with saturation outside the table.
  float residual(float f, float label) const {
    if (f >= kMax) return label - 1.0f;
    if (f <= -kMax) return label;
    const int i = static_cast<int>((f + kMax) * (kSize / kMax / 2.0f));
    return label - table_[i < kSize ? i : kSize - 1];
  }

  static const SigmoidTable& instance() {
    static const SigmoidTable t;
    return t;
  }

 private:
  std::array<float, kSize> table_{};
};

}  // namespace popnet::detail

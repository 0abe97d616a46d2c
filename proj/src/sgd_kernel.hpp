#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>

#include "sigmoid_table.hpp"

// Negative-sampling update shared by skip-gram and LINE. In Shared mode the
// parameter rows are touched through relaxed atomic_ref so concurrent
// workers may lose updates but never race in the language sense.

namespace popnet::detail {

template <bool Shared>
inline float load(float& x) {
  if constexpr (Shared) {
    return std::atomic_ref<float>(x).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool Shared>
inline void store(float& x, float v) {
  if constexpr (Shared) {
    std::atomic_ref<float>(x).store(v, std::memory_order_relaxed);
  } else {
    x = v;
  }
}

inline void prefetch_row(const float* row, std::size_t dim) {
  for (std::size_t d = 0; d < dim; d += 16) __builtin_prefetch(row + d, 1);
}

inline float dot(const float* __restrict a, const float* __restrict b, std::size_t dim) {
  float f = 0.0f;
#pragma omp simd reduction(+ : f)
  for (std::size_t d = 0; d < dim; ++d) f += a[d] * b[d];
  return f;
}

// grad += g * y, then y += g * source.
inline void dual_axpy(float g, const float* __restrict source, float* __restrict y,
                      float* __restrict grad, std::size_t dim) {
#pragma omp simd
  for (std::size_t d = 0; d < dim; ++d) {
    grad[d] += g * y[d];
    y[d] += g * source[d];
  }
}

/// One logistic update of context row y against the local source copy.
/// Shared mode stages y through `scratch` so the arithmetic stays vectorized.
template <bool Shared>
inline void logistic_step(const float* __restrict source, float* y, float label, float lr,
                          std::size_t dim, float* __restrict grad, float* __restrict scratch) {
  const auto& sigmoid = SigmoidTable::instance();
  if constexpr (Shared) {
    for (std::size_t d = 0; d < dim; ++d) scratch[d] = load<true>(y[d]);
    const float g = sigmoid.residual(dot(source, scratch, dim), label) * lr;
    dual_axpy(g, source, scratch, grad, dim);
    for (std::size_t d = 0; d < dim; ++d) store<true>(y[d], scratch[d]);
  } else {
    const float g = sigmoid.residual(dot(source, y, dim), label) * lr;
    dual_axpy(g, source, y, grad, dim);
  }
}

/// Steps against rows[0] (label 1) and then rows[1..count) (label 0). When no
/// row repeats, the steps only interact through `grad`, so all dot products
/// are taken up front; the result is identical to the one-by-one order.
template <bool Shared>
inline void logistic_steps(const float* __restrict source, float* const* rows, std::size_t count, float lr,
                           std::size_t dim, float* __restrict grad, float* __restrict scratch) {
  bool distinct = !Shared;
  for (std::size_t a = 1; a < count && distinct; ++a)
    for (std::size_t b = 0; b < a; ++b) distinct = distinct && rows[a] != rows[b];
  if (!distinct) {
    for (std::size_t r = 0; r < count; ++r)
      logistic_step<Shared>(source, rows[r], r == 0 ? 1.0f : 0.0f, lr, dim, grad, scratch);
    return;
  }
  constexpr std::size_t kMaxRows = 32;
  float f[kMaxRows];
  const std::size_t head = std::min(count, kMaxRows);
  for (std::size_t r = 0; r < head; ++r) f[r] = dot(source, rows[r], dim);
  const auto& sigmoid = SigmoidTable::instance();
  for (std::size_t r = 0; r < head; ++r)
    dual_axpy(sigmoid.residual(f[r], r == 0 ? 1.0f : 0.0f) * lr, source, rows[r], grad, dim);
  for (std::size_t r = head; r < count; ++r) logistic_step<Shared>(source, rows[r], 0.0f, lr, dim, grad, scratch);
}

template <bool Shared>
inline void copy_in(float* x, float* __restrict local, std::size_t dim) {
  for (std::size_t d = 0; d < dim; ++d) local[d] = load<Shared>(x[d]);
}

template <bool Shared>
inline void apply_grad(float* x, const float* __restrict grad, std::size_t dim) {
#pragma omp simd
  for (std::size_t d = 0; d < dim; ++d) store<Shared>(x[d], load<Shared>(x[d]) + grad[d]);
}

}  // namespace popnet::detail

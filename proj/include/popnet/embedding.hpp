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
#include <span>
#include <string>
#include <vector>

#include "popnet/common.hpp"

namespace popnet {

enum class EmbeddingMethod : std::uint8_t { unknown = 0, deepwalk = 1, line = 2 };

std::string embedding_method_name(EmbeddingMethod m);

/// n x D node embeddings, row per node, 32-bit floats.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;
  EmbeddingMethod method = EmbeddingMethod::unknown;
  bool dine = false;
  std::uint64_t config_hash = 0;  // carried in the run manifest, not the binary
  std::vector<std::string> ids;   // external ids; empty means "0..n-1"

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t n, std::size_t d) : rows(n), dim(d), values(n * d, 0.0f) {}

  std::span<float> row(std::size_t v) { return {values.data() + v * dim, dim}; }
  std::span<const float> row(std::size_t v) const { return {values.data() + v * dim, dim}; }
  float& at(std::size_t v, std::size_t d) { return values[v * dim + d]; }
  float at(std::size_t v, std::size_t d) const { return values[v * dim + d]; }

  bool all_finite() const;
  RowMatrix to_matrix() const;
  static EmbeddingMatrix from_matrix(const RowMatrix& m);
};

/// Binary layout: "PNEB", u32 version, u64 n, u32 D, u32 flags, then n ids
/// (u32 byte length + bytes), then n*D f32, all little-endian.
/// flags bit 0 = DINE-transformed, bits 8..15 = method code.
void write_embedding(const EmbeddingMatrix& e, const std::filesystem::path& path);
EmbeddingMatrix read_embedding(const std::filesystem::path& path);
/// `node_id\tv0\t...\tv{D-1}` with a header row; floats in shortest
/// round-trip form.
void write_embedding_tsv(const EmbeddingMatrix& e, const std::filesystem::path& path);

}  // namespace popnet

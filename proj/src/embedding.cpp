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


#include "popnet/embedding.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"

namespace popnet {

namespace {
constexpr std::uint32_t kEmbeddingVersion = 1;
constexpr std::uint32_t kFlagDine = 1u;
}  // namespace

std::string embedding_method_name(EmbeddingMethod m) {
  switch (m) {
    case EmbeddingMethod::deepwalk:
      return "deepwalk";
    case EmbeddingMethod::line:
      return "line";
    default:
      return "unknown";
  }
}

bool EmbeddingMatrix::all_finite() const {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

RowMatrix EmbeddingMatrix::to_matrix() const {
  RowMatrix m(rows, dim);
  for (std::size_t i = 0; i < values.size(); ++i) m.data()[i] = values[i];
  return m;
}

EmbeddingMatrix EmbeddingMatrix::from_matrix(const RowMatrix& m) {
  EmbeddingMatrix e(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (std::size_t i = 0; i < e.values.size(); ++i) e.values[i] = static_cast<float>(m.data()[i]);
  return e;
}

void write_embedding(const EmbeddingMatrix& e, const std::filesystem::path& path) {
  if (e.values.size() != e.rows * e.dim) throw DataError("embedding shape mismatch");
  if (!e.ids.empty() && e.ids.size() != e.rows) throw DataError("embedding id table size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding " + path.string());
  out.write("PNEB", 4);
  detail::write_le<std::uint32_t>(out, kEmbeddingVersion);
  detail::write_le<std::uint64_t>(out, e.rows);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.dim));
  const std::uint32_t flags =
      (e.dine ? kFlagDine : 0u) | (static_cast<std::uint32_t>(e.method) << 8);
  detail::write_le<std::uint32_t>(out, flags);
  for (std::size_t v = 0; v < e.rows; ++v) {
    const std::string id = e.ids.empty() ? std::to_string(v) : e.ids[v];
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  detail::write_le_array<float>(out, e.values);
  if (!out) throw DataError("failed writing " + path.string());
}

EmbeddingMatrix read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding " + path.string());
  detail::expect_magic(in, "PNEB", path.string());
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kEmbeddingVersion) {
    throw DataError(path.string() + ": unsupported embedding version " + std::to_string(version));
  }
  EmbeddingMatrix e;
  e.rows = detail::read_le<std::uint64_t>(in, "n");
  e.dim = detail::read_le<std::uint32_t>(in, "D");
  const auto flags = detail::read_le<std::uint32_t>(in, "flags");
  e.dine = (flags & kFlagDine) != 0;
  e.method = static_cast<EmbeddingMethod>((flags >> 8) & 0xffu);
  e.ids.resize(e.rows);
  for (auto& id : e.ids) {
    const auto len = detail::read_le<std::uint32_t>(in, "id length");
    id.resize(len);
    in.read(id.data(), len);
    if (!in) throw DataError(path.string() + ": truncated id table");
  }
  e.values.resize(e.rows * e.dim);
  detail::read_le_array<float>(in, e.values, "matrix");
  if (!e.all_finite()) throw DataError(path.string() + ": non-finite embedding values");
  return e;
}

void write_embedding_tsv(const EmbeddingMatrix& e, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "node_id";
  for (std::size_t d = 0; d < e.dim; ++d) out << "\tv" << d;
  out << '\n';
  char buf[32];
  for (std::size_t v = 0; v < e.rows; ++v) {
    out << (e.ids.empty() ? std::to_string(v) : e.ids[v]);
    for (float x : e.row(v)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
      out << '\t' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace popnet

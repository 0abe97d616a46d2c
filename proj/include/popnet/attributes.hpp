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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "popnet/graph.hpp"

namespace popnet {

/// Person-level attribute table keyed by external node id. Missing values are
/// std::nullopt in memory and the literal `NA` on disk.
class AttributeTable {
 public:
  using Cell = std::optional<std::string>;

  AttributeTable() = default;
  explicit AttributeTable(std::vector<std::string> columns);

  /// Appends a row; throws DataError on duplicate id or wrong width.
  void add_row(std::string external_id, std::vector<Cell> cells);

  std::size_t row_count() const { return ids_.size(); }
  const std::vector<std::string>& columns() const { return columns_; }
  bool has_column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const;
  const std::vector<std::string>& row_ids() const { return ids_.externals(); }
  const IdMap& ids() const { return ids_; }

  const Cell& at(std::size_t row, std::size_t col) const { return cells_[row * columns_.size() + col]; }
  Cell& at(std::size_t row, std::size_t col) { return cells_[row * columns_.size() + col]; }

  /// Column parsed as reals, NaN for missing. Throws DataError on junk.
  std::vector<double> numeric(std::string_view name) const;
  std::vector<Cell> categorical(std::string_view name) const;

  /// Rows reordered to follow `ids`; ids absent from the table get all-missing rows.
  AttributeTable aligned_to(const IdMap& ids) const;

  friend bool operator==(const AttributeTable&, const AttributeTable&);

 private:
  std::vector<std::string> columns_;
  IdMap ids_;
  std::vector<Cell> cells_;
};

AttributeTable read_attribute_tsv(std::istream& in);
AttributeTable load_attribute_file(const std::filesystem::path& path);
void write_attribute_file(const AttributeTable& table, const std::filesystem::path& path);

}  // namespace popnet

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


#include "popnet/attributes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "text_util.hpp"

namespace popnet {

AttributeTable::AttributeTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (columns_[i] == columns_[j]) throw DataError("duplicate attribute column '" + columns_[i] + "'");
    }
  }
}

void AttributeTable::add_row(std::string external_id, std::vector<Cell> cells) {
  if (cells.size() != columns_.size()) {
    throw DataError("attribute row for '" + external_id + "' has " + std::to_string(cells.size()) +
                    " values, expected " + std::to_string(columns_.size()));
  }
  if (ids_.contains(external_id)) throw DataError("duplicate attribute row '" + external_id + "'");
  ids_.intern(external_id);
  for (auto& c : cells) cells_.push_back(std::move(c));
}

bool AttributeTable::has_column(std::string_view name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

std::size_t AttributeTable::column_index(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw DataError("unknown attribute '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns_.begin());
}

std::vector<double> AttributeTable::numeric(std::string_view name) const {
  const auto col = column_index(name);
  std::vector<double> out(row_count(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < row_count(); ++r) {
    const auto& cell = at(r, col);
    if (!cell) continue;
    if (!detail::parse_double(*cell, out[r])) {
      throw DataError("attribute '" + std::string(name) + "' has non-numeric value '" + *cell + "'");
    }
  }
  return out;
}

std::vector<AttributeTable::Cell> AttributeTable::categorical(std::string_view name) const {
  const auto col = column_index(name);
  std::vector<Cell> out;
  out.reserve(row_count());
  for (std::size_t r = 0; r < row_count(); ++r) out.push_back(at(r, col));
  return out;
}

AttributeTable AttributeTable::aligned_to(const IdMap& ids) const {
  AttributeTable out(columns_);
  for (const auto& ext : ids.externals()) {
    std::vector<Cell> row(columns_.size());
    if (ids_.contains(ext)) {
      const auto r = ids_.at(ext);
      for (std::size_t c = 0; c < columns_.size(); ++c) row[c] = at(r, c);
    }
    out.add_row(ext, std::move(row));
  }
  return out;
}

bool operator==(const AttributeTable& a, const AttributeTable& b) {
  return a.columns_ == b.columns_ && a.ids_.externals() == b.ids_.externals() && a.cells_ == b.cells_;
}

AttributeTable read_attribute_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("attribute file is empty");
  const auto header = detail::split(detail::chomp(line), '\t');
  if (header.empty() || header[0] != "node_id") throw DataError("line 1: expected header starting with 'node_id'");
  std::vector<std::string> columns(header.begin() + 1, header.end());
  AttributeTable table(columns);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::chomp(line);
    if (text.empty()) continue;
    const auto fields = detail::split(text, '\t');
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    }
    std::vector<AttributeTable::Cell> cells;
    cells.reserve(columns.size());
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i] == "NA") {
        cells.emplace_back(std::nullopt);
      } else {
        cells.emplace_back(std::string(fields[i]));
      }
    }
    try {
      table.add_row(std::string(fields[0]), std::move(cells));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

AttributeTable load_attribute_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open attribute file " + path.string());
  try {
    return read_attribute_tsv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_attribute_file(const AttributeTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write attribute file " + path.string());
  out << "node_id";
  for (const auto& c : table.columns()) out << '\t' << c;
  out << '\n';
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    out << table.row_ids()[r];
    for (std::size_t c = 0; c < table.columns().size(); ++c) {
      const auto& cell = table.at(r, c);
      out << '\t' << (cell ? *cell : std::string("NA"));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace popnet

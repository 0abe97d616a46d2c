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
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace popnet {

/// Shortest decimal that round-trips; NaN prints as `NA`.
std::string format_real(double x);

/// RFC-4180 writer: UTF-8, LF line ends, fields quoted only when needed.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);

  void row(std::initializer_list<std::string_view> fields);
  void row(const std::vector<std::string>& fields);
  /// Flushes and throws DataError if any write failed.
  void close();

  static std::string quote(std::string_view field);

 private:
  template <typename It>
  void write_row(It first, It last);

  std::filesystem::path path_;
  std::ofstream out_;
};

using CsvTable = std::vector<std::vector<std::string>>;

/// Parses RFC-4180 text including quoted fields with embedded separators,
/// doubled quotes and line breaks. The header is row 0.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace popnet

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
#include <span>
#include <vector>

#include "popnet/common.hpp"

namespace popnet {

/// Walker/Vose alias table: O(n) build, O(1) draws from a discrete
/// distribution proportional to non-negative weights.
class AliasTable {
 public:
  AliasTable() = default;
  /// Throws DataError if weights are empty, negative, non-finite or all zero.
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const { return prob_.size(); }
  /// Normalized probability of outcome i.
  double probability(std::size_t i) const { return normalized_[i]; }

  template <typename Urbg>
  std::size_t sample(Urbg& rng) const {
    const double x = uniform01(rng) * static_cast<double>(prob_.size());
    const auto i = static_cast<std::size_t>(x);
    return (x - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
  std::vector<double> normalized_;
};

}  // namespace popnet

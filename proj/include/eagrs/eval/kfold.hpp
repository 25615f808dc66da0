// Copyright 2026 The eagrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/rng.hpp"

namespace eagrs::eval {

struct FoldSplit {
  std::vector<std::size_t> train, val, test;
};

/// Stratified assignment of subjects to k folds.
struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignment;  // subject -> fold

  std::vector<std::size_t> members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == fold) out.push_back(i);
    return out;
  }

  /// Rotation `fold`: test = fold, validation = fold + 1 (mod k), training = the rest.
  FoldSplit split(std::size_t fold) const {
    FoldSplit s;
    const std::size_t val_fold = (fold + 1) % k;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] == fold) {
        s.test.push_back(i);
      } else if (k > 1 && assignment[i] == val_fold) {
        s.val.push_back(i);
      } else {
        s.train.push_back(i);
      }
    }
    return s;
  }
};

/// Each class is shuffled and dealt round-robin; the deal continues across
/// classes so overall fold sizes also stay within one of each other.
inline FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::kInvalidConfig, "k must be >= 2");
  FoldPlan plan{k, seed, std::vector<std::size_t>(labels.size(), 0)};
  RngStream rng = RngStream(seed).split(0xF01D);
  std::size_t next_fold = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    if (members.size() < k) {
      throw Error(Errc::kClassTooSmall, "class " + std::to_string(cls) + " has " +
                                            std::to_string(members.size()) + " < k members");
    }
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t i : members) {
      plan.assignment[i] = next_fold;
      next_fold = (next_fold + 1) % k;
    }
  }
  return plan;
}

}  // namespace eagrs::eval

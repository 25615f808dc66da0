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

#include <algorithm>
#include <span>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"

namespace eagrs::eval {

/// SR[r] = (# subjects in the group with ROI r selected) / (# subjects in the group).
inline Vector selection_ratio(std::span<const Vector> selections, std::span<const int> labels, int group) {
  if (selections.size() != labels.size()) throw Error(Errc::kLengthMismatch, "selections vs labels");
  std::size_t members = 0;
  Vector sr;
  for (std::size_t n = 0; n < selections.size(); ++n) {
    if (labels[n] != group) continue;
    if (sr.empty()) sr.assign(selections[n].size(), 0.0);
    if (selections[n].size() != sr.size()) throw Error(Errc::kLengthMismatch, "selection vector width");
    for (std::size_t r = 0; r < sr.size(); ++r) sr[r] += selections[n][r] >= 0.5 ? 1.0 : 0.0;
    ++members;
  }
  if (members == 0) throw Error(Errc::kEmptyGroup, "no subjects in group");
  for (double& v : sr) v /= static_cast<double>(members);
  return sr;
}

struct SrBands {
  std::vector<std::size_t> moderate;  // 0.5 < SR <= 0.75
  std::vector<std::size_t> high;      // SR > 0.75
};

inline SrBands sr_bands(std::span<const double> sr) {
  SrBands b;
  for (std::size_t r = 0; r < sr.size(); ++r) {
    if (sr[r] > 0.75) {
      b.high.push_back(r);
    } else if (sr[r] > 0.5) {
      b.moderate.push_back(r);
    }
  }
  return b;
}

/// ROI indices ordered by decreasing SR; ties keep the lower index first.
inline std::vector<std::size_t> rank_by_sr(std::span<const double> sr) {
  std::vector<std::size_t> idx(sr.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return sr[a] > sr[b]; });
  return idx;
}

}  // namespace eagrs::eval

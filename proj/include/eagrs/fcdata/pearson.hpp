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
#include <cmath>
#include <string>

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"

namespace eagrs::fcdata {

/// ROI x timepoint BOLD signals.
struct BoldSeries {
  Matrix values;  // rows = ROIs, cols = timepoints

  std::size_t rois() const { return values.rows(); }
  std::size_t timepoints() const { return values.cols(); }
};

/// Sample Pearson correlation between every pair of ROI rows.
inline Matrix pearson_fc(const BoldSeries& ts) {
  const std::size_t r = ts.rois();
  const std::size_t t = ts.timepoints();
  if (t < 3) throw Error(Errc::kDimensionMismatch, "need at least 3 timepoints, got " + std::to_string(t));
  require_finite(ts.values.data(), "BOLD series");

  Matrix centered(r, t);
  Vector norm(r);
  for (std::size_t i = 0; i < r; ++i) {
    const auto row = ts.values.row(i);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(t);
    double ss = 0.0;
    for (std::size_t k = 0; k < t; ++k) {
      centered(i, k) = row[k] - mean;
      ss += centered(i, k) * centered(i, k);
    }
    if (ss == 0.0) throw Error(Errc::kZeroVariance, "roi " + std::to_string(i));
    norm[i] = std::sqrt(ss);
  }

  Matrix fc(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    fc(i, i) = 1.0;
    for (std::size_t j = i + 1; j < r; ++j) {
      double c = dot(centered.row(i), centered.row(j)) / (norm[i] * norm[j]);
      c = std::clamp(c, -1.0, 1.0);
      fc(i, j) = c;
      fc(j, i) = c;
    }
  }
  return fc;
}

}  // namespace eagrs::fcdata

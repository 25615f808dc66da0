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
#include <span>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"

namespace eagrs::eval {

/// Linear soft-margin SVM (hinge loss, L2 penalty) trained by dual coordinate
/// descent on standardized features. The bias is an extra constant feature.
class LinearSvm {
 public:
  static LinearSvm fit(std::span<const Vector> x, std::span<const int> labels, double c,
                       std::size_t max_iter = 1000, double tol = 1e-6) {
    if (x.empty() || x.size() != labels.size()) throw Error(Errc::kLengthMismatch, "svm training data");
    LinearSvm svm;
    const std::size_t d = x.front().size();
    svm.mean_.assign(d, 0.0);
    svm.scale_.assign(d, 1.0);
    for (const auto& row : x)
      for (std::size_t k = 0; k < d; ++k) svm.mean_[k] += row[k];
    for (double& m : svm.mean_) m /= static_cast<double>(x.size());
    for (std::size_t k = 0; k < d; ++k) {
      double ss = 0.0;
      for (const auto& row : x) ss += (row[k] - svm.mean_[k]) * (row[k] - svm.mean_[k]);
      const double sd = std::sqrt(ss / static_cast<double>(x.size()));
      svm.scale_[k] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    std::vector<Vector> z;
    z.reserve(x.size());
    for (const auto& row : x) z.push_back(svm.standardize(row));

    svm.w_.assign(d + 1, 0.0);
    Vector alpha(x.size(), 0.0);
    Vector qii(x.size());
    for (std::size_t i = 0; i < z.size(); ++i) qii[i] = dot(z[i], z[i]) + 1.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
      double max_pg = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double y = labels[i] == 1 ? 1.0 : -1.0;
        const double g = y * svm.raw_decision(z[i]) - 1.0;
        double pg = g;
        if (alpha[i] == 0.0) pg = std::min(g, 0.0);
        if (alpha[i] == c) pg = std::max(g, 0.0);
        max_pg = std::max(max_pg, std::abs(pg));
        if (pg == 0.0) continue;
        const double old = alpha[i];
        alpha[i] = std::clamp(old - g / qii[i], 0.0, c);
        const double delta = (alpha[i] - old) * y;
        for (std::size_t k = 0; k < d; ++k) svm.w_[k] += delta * z[i][k];
        svm.w_[d] += delta;
      }
      if (max_pg < tol) break;
    }
    return svm;
  }

  /// Signed distance proxy; positive predicts class 1.
  double decision(std::span<const double> x) const { return raw_decision(standardize(x)); }

 private:
  Vector standardize(std::span<const double> x) const {
    Vector z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean_[k]) * scale_[k];
    return z;
  }

  double raw_decision(std::span<const double> z) const {
    double s = w_.back();
    for (std::size_t k = 0; k < z.size(); ++k) s += w_[k] * z[k];
    return s;
  }

  Vector mean_, scale_, w_;
};

}  // namespace eagrs::eval

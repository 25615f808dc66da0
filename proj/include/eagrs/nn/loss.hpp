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
#include <string>

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"

namespace eagrs::nn {

inline constexpr double kProbabilityClamp = 1e-12;

/// Mean of squared differences.
inline double mse_loss(std::span<const double> target, std::span<const double> pred) {
  if (target.size() != pred.size()) {
    throw Error(Errc::kDimensionMismatch, "mse lengths " + std::to_string(target.size()) +
                                              " vs " + std::to_string(pred.size()));
  }
  if (target.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(target.size());
}

/// d mse / d pred, scaled by `weight`.
inline Vector mse_grad(std::span<const double> target, std::span<const double> pred,
                       double weight = 1.0) {
  Vector g(pred.size());
  const double scale = 2.0 * weight / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

inline void check_probability(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::kInvalidProbability, "entry outside [0,1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(Errc::kInvalidProbability, "sum " + std::to_string(total));
  }
}

/// -sum y log(p) with p clamped to [1e-12, 1].
inline double cross_entropy_loss(std::span<const double> onehot, std::span<const double> prob) {
  if (onehot.size() != prob.size()) throw Error(Errc::kDimensionMismatch, "cross entropy");
  check_probability(prob);
  double s = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (onehot[i] != 0.0) s -= onehot[i] * std::log(std::max(prob[i], kProbabilityClamp));
  }
  return s;
}

/// Batch mean of per-sample cross entropy.
inline double cross_entropy_loss(std::span<const Vector> onehots, std::span<const Vector> probs) {
  if (onehots.size() != probs.size() || onehots.empty()) {
    throw Error(Errc::kDimensionMismatch, "cross entropy batch");
  }
  double s = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) s += cross_entropy_loss(onehots[n], probs[n]);
  return s / static_cast<double>(probs.size());
}

/// d CE / d prob for one sample, scaled by `weight`.
inline Vector cross_entropy_grad(std::span<const double> onehot, std::span<const double> prob,
                                 double weight = 1.0) {
  Vector g(prob.size(), 0.0);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (onehot[i] != 0.0 && prob[i] > kProbabilityClamp) g[i] = -weight * onehot[i] / prob[i];
  }
  return g;
}

}  // namespace eagrs::nn

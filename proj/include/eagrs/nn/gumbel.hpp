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

#include <span>
#include <string>

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"
#include "eagrs/nn/activation.hpp"
#include "eagrs/rng.hpp"

namespace eagrs::nn {

enum class GateMode { kSample, kHardEval };

/// Per-ROI binary concrete gate (two-class Gumbel-softmax).
///
/// Sample mode: y = sigmoid((logit + g1 - g0) / tau) with g0, g1 ~ Gumbel(0, 1).
/// Hard-eval mode: y = 1[sigmoid(logit) >= 0.5]; ties select.
class GumbelGate {
 public:
  GumbelGate() = default;
  explicit GumbelGate(double tau) : tau_(tau) { validate(); }

  double temperature() const { return tau_; }
  void set_temperature(double tau) {
    tau_ = tau;
    validate();
  }

  /// Gumbel difference g1 - g0 for each of n gates.
  static Vector draw_noise(RngStream& rng, std::size_t n) {
    Vector noise(n);
    for (double& v : noise) {
      const double g1 = rng.gumbel();
      const double g0 = rng.gumbel();
      v = g1 - g0;
    }
    return noise;
  }

  /// Sample-mode gate with externally supplied (frozen) noise.
  const Vector& forward(std::span<const double> logits, std::span<const double> noise) {
    validate();
    if (noise.size() != logits.size()) throw Error(Errc::kDimensionMismatch, "gate noise");
    output_.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      output_[i] = sigmoid((logits[i] + noise[i]) / tau_);
    }
    return output_;
  }

  const Vector& forward(std::span<const double> logits, RngStream& rng) {
    const Vector noise = draw_noise(rng, logits.size());
    return forward(logits, noise);
  }

  Vector hard(std::span<const double> logits) const {
    Vector out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = sigmoid(logits[i]) >= 0.5 ? 1.0 : 0.0;
    return out;
  }

  /// d/dlogit of the last sample-mode forward.
  Vector backward(std::span<const double> dy) const {
    if (output_.size() != dy.size()) throw Error(Errc::kMissingForwardCache, "gate backward");
    Vector dl(dy.size());
    for (std::size_t i = 0; i < dy.size(); ++i) {
      dl[i] = dy[i] * output_[i] * (1.0 - output_[i]) / tau_;
    }
    return dl;
  }

 private:
  void validate() const {
    if (!(tau_ > 0.0)) throw Error(Errc::kNonPositiveTemperature, std::to_string(tau_));
  }

  double tau_ = 0.01;
  Vector output_;
};

}  // namespace eagrs::nn

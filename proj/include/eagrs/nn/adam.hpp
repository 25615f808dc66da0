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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/nn/dense.hpp"

namespace eagrs::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-5;
};

/// Adam with bias correction. Weight decay is coupled: lambda * theta is added
/// to the gradient before the moment updates.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return t_; }

  void step(std::span<const ParamBlock> blocks) {
    if (m_.empty()) {
      for (const auto& b : blocks) {
        m_.emplace_back(b.value.size(), 0.0);
        v_.emplace_back(b.value.size(), 0.0);
      }
    }
    if (m_.size() != blocks.size()) throw Error(Errc::kShapeMismatch, "adam block count changed");
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      if (blocks[k].value.size() != m_[k].size() || blocks[k].grad.size() != m_[k].size()) {
        throw Error(Errc::kShapeMismatch, "adam block " + std::to_string(k));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      auto theta = blocks[k].value;
      auto grad = blocks[k].grad;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i] + cfg_.weight_decay * theta[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Scales every gradient in `blocks` by `factor` (batch averaging).
inline void scale_grads(std::span<const ParamBlock> blocks, double factor) {
  for (const auto& b : blocks)
    for (double& g : b.grad) g *= factor;
}

}  // namespace eagrs::nn

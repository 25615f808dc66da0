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
#include <functional>
#include <limits>
#include <span>
#include <utility>

#include "eagrs/error.hpp"
#include "eagrs/nn/dense.hpp"

namespace eagrs::nn {

enum class Stencil {
  kTwoPoint,   // (f(x+h) - f(x-h)) / 2h
  kFourPoint,  // fourth-order central difference
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_block = 0;
  std::size_t worst_index = 0;
  double backprop = 0.0;
  double numeric = 0.0;
};

/// Compares the gradients already stored in `blocks` against central finite
/// differences of `loss`. Error per parameter is
/// |g_bp - g_fd| / max(|g_bp|, |g_fd|, 1e-12).
inline GradCheckResult gradient_check_blocks(std::span<const ParamBlock> blocks,
                                             const std::function<double()>& loss, double eps,
                                             Stencil stencil = Stencil::kTwoPoint) {
  auto eval = [&] {
    const double v = loss();
    if (!std::isfinite(v)) throw Error(Errc::kNonFiniteLoss, "loss is not finite");
    return v;
  };
  GradCheckResult result;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto value = blocks[b].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      auto at = [&](double offset) {
        value[i] = orig + offset;
        const double v = eval();
        value[i] = orig;
        return v;
      };
      double numeric = 0.0;
      if (stencil == Stencil::kTwoPoint) {
        numeric = (at(eps) - at(-eps)) / (2.0 * eps);
      } else {
        numeric = (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
      }
      const double bp = blocks[b].grad[i];
      const double err =
          std::abs(bp - numeric) / std::max({std::abs(bp), std::abs(numeric), 1e-12});
      if (err > result.max_rel_error) result = {err, b, i, bp, numeric};
    }
  }
  return result;
}

/// Loss of a network output: returns (value, dL/doutput).
using OutputLoss = std::function<std::pair<double, Vector>(std::span<const double>)>;

/// Backprops `loss` through `net` at `input`, then checks every parameter.
inline double gradient_check(Mlp& net, const OutputLoss& loss, std::span<const double> input,
                             double eps, Stencil stencil = Stencil::kTwoPoint) {
  net.zero_grad();
  const Vector out = net.forward(input);
  auto [value, grad] = loss(out);
  if (!std::isfinite(value)) throw Error(Errc::kNonFiniteLoss, "loss is not finite");
  net.backward(grad);
  const auto blocks = net.params();
  return gradient_check_blocks(
             blocks, [&] { return loss(net.forward(input)).first; }, eps, stencil)
      .max_rel_error;
}

}  // namespace eagrs::nn

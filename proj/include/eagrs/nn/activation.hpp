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
#include <string>
#include <string_view>

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"

namespace eagrs::nn {

// Tags are persisted in checkpoints; do not renumber.
enum class Activation : std::uint32_t {
  kIdentity = 0,
  kSelu = 1,
  kTanh = 2,
  kRelu = 3,
  kSigmoid = 4,
  kSoftmax = 5,
};

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

inline Activation activation_from_tag(std::uint32_t tag) {
  if (tag > static_cast<std::uint32_t>(Activation::kSoftmax)) {
    throw Error(Errc::kUnknownActivation, "tag " + std::to_string(tag));
  }
  return static_cast<Activation>(tag);
}

inline Activation activation_from_name(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "selu") return Activation::kSelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softmax") return Activation::kSoftmax;
  throw Error(Errc::kUnknownActivation, std::string(name));
}

inline std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kSelu: return "selu";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
  }
  return "unknown";
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double selu(double z) {
  return z > 0.0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * std::expm1(z);
}

/// Applies `kind` to z, writing into y (same length).
inline void activate(Activation kind, std::span<const double> z, std::span<double> y) {
  switch (kind) {
    case Activation::kIdentity:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i];
      return;
    case Activation::kSelu:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = selu(z[i]);
      return;
    case Activation::kTanh:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = std::tanh(z[i]);
      return;
    case Activation::kRelu:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] > 0.0 ? z[i] : 0.0;
      return;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = sigmoid(z[i]);
      return;
    case Activation::kSoftmax: {
      double zmax = -INFINITY;
      for (double v : z) zmax = std::max(zmax, v);
      double total = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        y[i] = std::exp(z[i] - zmax);
        total += y[i];
      }
      for (std::size_t i = 0; i < z.size(); ++i) y[i] /= total;
      return;
    }
  }
  throw Error(Errc::kUnknownActivation, "tag " + std::to_string(static_cast<std::uint32_t>(kind)));
}

inline Vector activate(Activation kind, std::span<const double> z) {
  Vector y(z.size());
  activate(kind, z, y);
  return y;
}

/// Vector-Jacobian product: given pre-activation z, output y and upstream
/// gradient dy, writes dL/dz into dz.
inline void activation_vjp(Activation kind, std::span<const double> z,
                           std::span<const double> y, std::span<const double> dy,
                           std::span<double> dz) {
  switch (kind) {
    case Activation::kIdentity:
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = dy[i];
      return;
    case Activation::kSelu:
      for (std::size_t i = 0; i < z.size(); ++i)
        dz[i] = dy[i] * (z[i] > 0.0 ? kSeluLambda : y[i] + kSeluLambda * kSeluAlpha);
      return;
    case Activation::kTanh:
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = dy[i] * (1.0 - y[i] * y[i]);
      return;
    case Activation::kRelu:
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = z[i] > 0.0 ? dy[i] : 0.0;
      return;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = dy[i] * y[i] * (1.0 - y[i]);
      return;
    case Activation::kSoftmax: {
      const double inner = dot(y, dy);
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = y[i] * (dy[i] - inner);
      return;
    }
  }
  throw Error(Errc::kUnknownActivation, "tag " + std::to_string(static_cast<std::uint32_t>(kind)));
}

struct ActivationResult {
  Vector value;
  Matrix jacobian;  // dy_i / dz_j; diagonal for elementwise kinds
};

inline ActivationResult activation_and_grad(Activation kind, std::span<const double> z) {
  require_finite(z, "activation input");
  ActivationResult out{activate(kind, z), Matrix(z.size(), z.size())};
  Vector unit(z.size(), 0.0);
  Vector col(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    unit[j] = 1.0;
    // VJP with e_j yields row j of J.
    activation_vjp(kind, z, out.value, unit, col);
    for (std::size_t i = 0; i < z.size(); ++i) out.jacobian(j, i) = col[i];
    unit[j] = 0.0;
  }
  return out;
}

}  // namespace eagrs::nn

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

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"
#include "eagrs/nn/activation.hpp"
#include "eagrs/rng.hpp"

namespace eagrs::nn {

/// A trainable tensor and its gradient accumulator, both flat.
struct ParamBlock {
  std::span<double> value;
  std::span<double> grad;
};

/// y = act(W x + b). Caches input, pre-activation and output of the last
/// forward pass for backprop and relevance propagation.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act, bool bias_enabled = true)
      : weights_(out, in), bias_(out, 0.0), act_(act), bias_enabled_(bias_enabled),
        grad_w_(out, in), grad_b_(out, 0.0) {}

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)); zero bias.
  void init_glorot(RngStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
    for (double& w : weights_.data()) w = rng.uniform(-limit, limit);
    std::fill(bias_.begin(), bias_.end(), 0.0);
  }

  std::size_t in_dim() const { return weights_.cols(); }
  std::size_t out_dim() const { return weights_.rows(); }
  Activation activation() const { return act_; }
  bool bias_enabled() const { return bias_enabled_; }

  /// Drops the additive term; the stored bias is zeroed so it cannot leak back.
  void disable_bias() {
    bias_enabled_ = false;
    std::fill(bias_.begin(), bias_.end(), 0.0);
  }

  Matrix& weights() { return weights_; }
  const Matrix& weights() const { return weights_; }
  Vector& bias() { return bias_; }
  const Vector& bias() const { return bias_; }

  const Vector& cached_input() const { return input_; }
  const Vector& cached_pre() const { return pre_; }
  const Vector& cached_output() const { return output_; }
  bool has_cache() const { return !output_.empty(); }

  const Vector& forward(std::span<const double> x) {
    if (x.size() != in_dim()) {
      throw Error(Errc::kDimensionMismatch, "dense input " + std::to_string(x.size()) +
                                                " != " + std::to_string(in_dim()));
    }
    input_.assign(x.begin(), x.end());
    pre_.resize(out_dim());
    const std::size_t n_in = in_dim();
    const double* w = weights_.data().data();
    for (std::size_t o = 0; o < out_dim(); ++o) {
      const double* wr = w + o * n_in;
      double s = bias_enabled_ ? bias_[o] : 0.0;
      for (std::size_t i = 0; i < n_in; ++i) s += wr[i] * input_[i];
      pre_[o] = s;
    }
    output_.resize(out_dim());
    activate(act_, pre_, output_);
    return output_;
  }

  /// Backprop of dL/dy through the cached pass. Accumulates parameter
  /// gradients when `accumulate` is set; returns dL/dx.
  Vector backward(std::span<const double> dy, bool accumulate = true) {
    if (!has_cache()) throw Error(Errc::kMissingForwardCache, "dense backward before forward");
    Vector dz(out_dim());
    activation_vjp(act_, pre_, output_, dy, dz);
    const std::size_t n_in = in_dim();
    Vector dx(n_in, 0.0);
    const double* w = weights_.data().data();
    double* gw = grad_w_.data().data();
    for (std::size_t o = 0; o < out_dim(); ++o) {
      const double g = dz[o];
      if (g == 0.0) continue;
      const double* wr = w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) dx[i] += wr[i] * g;
      if (accumulate) {
        double* gr = gw + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) gr[i] += g * input_[i];
        if (bias_enabled_) grad_b_[o] += g;
      }
    }
    return dx;
  }

  void zero_grad() {
    std::fill(grad_w_.data().begin(), grad_w_.data().end(), 0.0);
    std::fill(grad_b_.begin(), grad_b_.end(), 0.0);
  }

  std::vector<ParamBlock> params() {
    std::vector<ParamBlock> out{{weights_.data(), grad_w_.data()}};
    if (bias_enabled_) out.push_back({bias_, grad_b_});
    return out;
  }

  void clear_cache() {
    input_.clear();
    pre_.clear();
    output_.clear();
  }

 private:
  Matrix weights_;
  Vector bias_;
  Activation act_ = Activation::kIdentity;
  bool bias_enabled_ = true;
  Matrix grad_w_;
  Vector grad_b_;
  Vector input_, pre_, output_;
};

/// Feed-forward stack of dense layers.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  /// Builds dims[0] -> dims[1] -> ... with one activation per layer.
  static Mlp build(std::span<const std::size_t> dims, std::span<const Activation> acts,
                   RngStream& rng, bool bias_enabled = true) {
    if (dims.size() < 2 || acts.size() + 1 != dims.size()) {
      throw Error(Errc::kShapeMismatch, "mlp needs one activation per layer");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      layers.emplace_back(dims[l], dims[l + 1], acts[l], bias_enabled);
      layers.back().init_glorot(rng);
    }
    return Mlp(std::move(layers));
  }

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  DenseLayer& operator[](std::size_t i) { return layers_[i]; }
  const DenseLayer& operator[](std::size_t i) const { return layers_[i]; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }

  Vector forward(std::span<const double> x) {
    Vector h(x.begin(), x.end());
    for (auto& layer : layers_) h = layer.forward(h);
    return h;
  }

  Vector backward(std::span<const double> dy, bool accumulate = true) {
    Vector g(dy.begin(), dy.end());
    for (std::size_t l = layers_.size(); l-- > 0;) g = layers_[l].backward(g, accumulate);
    return g;
  }

  void zero_grad() {
    for (auto& layer : layers_) layer.zero_grad();
  }

  std::vector<ParamBlock> params() {
    std::vector<ParamBlock> out;
    for (auto& layer : layers_) {
      auto p = layer.params();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  void disable_bias() {
    for (auto& layer : layers_) layer.disable_bias();
  }

 private:
  std::vector<DenseLayer> layers_;
};

/// 2x1 kernel slid over the ROI axis of an R x 2 input:
/// out[r] = k0 * in[r][0] + k1 * in[r][1] + b.
class Conv1DChannelMerge {
 public:
  Conv1DChannelMerge() = default;
  Conv1DChannelMerge(double k0, double k1, double b) : kernel_{k0, k1}, bias_{b} {}

  void init_glorot(RngStream& rng) {
    const double limit = std::sqrt(6.0 / 3.0);
    kernel_[0] = rng.uniform(-limit, limit);
    kernel_[1] = rng.uniform(-limit, limit);
    bias_[0] = 0.0;
  }

  /// `channels` is row-major R x 2.
  Vector forward(std::span<const double> channels) {
    if (channels.size() % 2 != 0) {
      throw Error(Errc::kDimensionMismatch, "channel merge expects R x 2 input");
    }
    input_.assign(channels.begin(), channels.end());
    const std::size_t r = channels.size() / 2;
    Vector out(r);
    for (std::size_t i = 0; i < r; ++i) {
      out[i] = kernel_[0] * channels[2 * i] + kernel_[1] * channels[2 * i + 1] + bias_[0];
    }
    return out;
  }

  void backward(std::span<const double> dy) {
    if (input_.empty()) throw Error(Errc::kMissingForwardCache, "channel merge backward");
    for (std::size_t i = 0; i < dy.size(); ++i) {
      grad_k_[0] += dy[i] * input_[2 * i];
      grad_k_[1] += dy[i] * input_[2 * i + 1];
      grad_b_[0] += dy[i];
    }
  }

  void zero_grad() { grad_k_ = {0.0, 0.0}, grad_b_ = {0.0}; }

  std::vector<ParamBlock> params() { return {{kernel_, grad_k_}, {bias_, grad_b_}}; }

  std::array<double, 2>& kernel() { return kernel_; }
  const std::array<double, 2>& kernel() const { return kernel_; }
  double& bias() { return bias_[0]; }
  double bias() const { return bias_[0]; }

 private:
  std::array<double, 2> kernel_{0.0, 0.0};
  std::array<double, 1> bias_{0.0};
  std::array<double, 2> grad_k_{0.0, 0.0};
  std::array<double, 1> grad_b_{0.0};
  Vector input_;
};

}  // namespace eagrs::nn

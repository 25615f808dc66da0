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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/fcdata/mask.hpp"
#include "eagrs/matrix.hpp"
#include "eagrs/nn/adam.hpp"
#include "eagrs/nn/checkpoint.hpp"
#include "eagrs/nn/dense.hpp"
#include "eagrs/nn/loss.hpp"
#include "eagrs/rng.hpp"

namespace eagrs::sae {

using nn::Activation;
using nn::DenseLayer;

/// Hidden widths {1.5 D, 0.3 D}: the 9000/1800 over D = 5995 ratios.
inline std::vector<std::size_t> default_hidden_dims(std::size_t d) {
  auto scaled = [d](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(d))));
  };
  return {scaled(1.5), scaled(0.3)};
}

/// Stacked autoencoder. Encoder E_l maps dims[l-1] -> dims[l]; generator G_l
/// maps dims[l] -> dims[l-1]. SELU follows E_1 only; every other layer is tanh.
class SaeModel {
 public:
  SaeModel() = default;

  SaeModel(std::size_t input_dim, std::span<const std::size_t> hidden, RngStream& rng) {
    if (hidden.empty()) throw Error(Errc::kShapeMismatch, "SAE needs at least one hidden layer");
    dims_.push_back(input_dim);
    dims_.insert(dims_.end(), hidden.begin(), hidden.end());
    for (std::size_t l = 1; l < dims_.size(); ++l) {
      encoder_.emplace_back(dims_[l - 1], dims_[l], l == 1 ? Activation::kSelu : Activation::kTanh);
      encoder_.back().init_glorot(rng);
    }
    for (std::size_t l = 1; l < dims_.size(); ++l) {
      generator_.emplace_back(dims_[l], dims_[l - 1], Activation::kTanh);
      generator_.back().init_glorot(rng);
    }
    trained_.assign(depth(), false);
  }

  /// Rebuilds a trained model from checkpoint layers [E_1..E_L, G_1..G_L].
  static SaeModel from_layers(std::vector<DenseLayer> layers) {
    if (layers.empty() || layers.size() % 2 != 0) {
      throw Error(Errc::kParseError, "SAE checkpoint needs an even, nonzero layer count");
    }
    SaeModel m;
    const std::size_t depth = layers.size() / 2;
    m.encoder_.assign(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(depth));
    m.generator_.assign(layers.begin() + static_cast<std::ptrdiff_t>(depth), layers.end());
    m.dims_.push_back(m.encoder_.front().in_dim());
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& e = m.encoder_[l];
      const auto& g = m.generator_[l];
      if (e.in_dim() != m.dims_.back() || g.in_dim() != e.out_dim() || g.out_dim() != e.in_dim()) {
        throw Error(Errc::kShapeMismatch, "SAE checkpoint layer " + std::to_string(l + 1) + " dims");
      }
      m.dims_.push_back(e.out_dim());
    }
    m.trained_.assign(depth, true);
    return m;
  }

  std::vector<DenseLayer> layers() const {
    std::vector<DenseLayer> out = encoder_;
    out.insert(out.end(), generator_.begin(), generator_.end());
    for (auto& l : out) l.clear_cache();
    return out;
  }

  void save(const std::filesystem::path& path) const { nn::save_layers(path, layers()); }
  static SaeModel load(const std::filesystem::path& path) {
    return from_layers(nn::load_layers(path));
  }

  std::size_t depth() const { return encoder_.size(); }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t code_dim() const { return dims_.back(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t roi_count() const { return roi_count_for_dim(input_dim()); }

  /// Zero-based level index: encoder(0) is E_1.
  DenseLayer& encoder(std::size_t l) { return encoder_[l]; }
  const DenseLayer& encoder(std::size_t l) const { return encoder_[l]; }
  DenseLayer& generator(std::size_t l) { return generator_[l]; }
  const DenseLayer& generator(std::size_t l) const { return generator_[l]; }

  bool trained(std::size_t l) const { return trained_[l]; }
  bool fully_trained() const {
    return !trained_.empty() && std::all_of(trained_.begin(), trained_.end(), [](bool b) { return b; });
  }
  void mark_trained(std::size_t l) { trained_[l] = true; }

  /// Encodes through E_1..E_levels.
  Vector encode(std::span<const double> x, std::size_t levels) {
    Vector h(x.begin(), x.end());
    for (std::size_t l = 0; l < levels; ++l) h = encoder_[l].forward(h);
    return h;
  }

  /// Decodes a level-`level` code back to input space through G_level..G_1.
  Vector decode(std::span<const double> h, std::size_t level) {
    Vector x(h.begin(), h.end());
    for (std::size_t l = level; l-- > 0;) x = generator_[l].forward(x);
    return x;
  }

  /// Full G(E(x)) pass regardless of training state.
  Vector forward(std::span<const double> x) { return decode(encode(x, depth()), depth()); }

  /// G(E(x~)) on a fully trained model; caches stay populated.
  Vector reconstruct(std::span<const double> masked) {
    if (!fully_trained()) throw Error(Errc::kUntrainedModel, "reconstruct before training every layer");
    return forward(masked);
  }

  /// Copy of the encoder stack with biases removed.
  nn::Mlp bias_free_encoder() const {
    std::vector<DenseLayer> layers = encoder_;
    for (auto& l : layers) {
      l.disable_bias();
      l.clear_cache();
    }
    return nn::Mlp(std::move(layers));
  }

  /// Forward path used for relevance: E_1..E_L then G_L..G_1.
  std::vector<const DenseLayer*> forward_path() const {
    std::vector<const DenseLayer*> path;
    for (const auto& e : encoder_) path.push_back(&e);
    for (std::size_t l = generator_.size(); l-- > 0;) path.push_back(&generator_[l]);
    return path;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> encoder_;
  std::vector<DenseLayer> generator_;
  std::vector<bool> trained_;
};

struct Step1Config {
  double q = 0.1;
  double alpha = 0.5;
  double lr = 1e-3;
  std::size_t batch = 50;
  std::size_t epochs = 300;
  double weight_decay = 5e-5;
  std::uint64_t seed = 0;
  // Early stopping on validation loss; 0 disables it.
  std::size_t patience = 0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::kInvalidConfig, "alpha must be in [0,1]");
    if (!(q >= 0.0 && q < 1.0)) throw Error(Errc::kInvalidRatio, "q must be in [0,1)");
    if (batch == 0) throw Error(Errc::kInvalidConfig, "batch must be positive");
  }
};

struct EpochLog {
  std::size_t layer = 0;  // 1-based
  std::size_t epoch = 0;  // 1-based
  double rec_loss_x = 0.0;
  double rec_loss_h = 0.0;  // 0 for layer 1
  double objective = 0.0;
};

struct LayerLoss {
  double rec_x = 0.0;
  double rec_h = 0.0;
  double objective = 0.0;
};

/// Objective for training level `level` (1-based) on one masked sample;
/// accumulates gradients into E_level and G_level when `backprop` is set.
///
/// Level 1: L_rec(X, G_1(E_1(X~))).
/// Level l >= 2: alpha * L_rec(X, X^) + (1 - alpha) * L_rec(h_{l-1}, h^_{l-1}),
/// where h^_{l-1} = G_l(E_l(h_{l-1})) and X^ decodes h^_{l-1} through the
/// frozen G_{l-1}..G_1.
inline LayerLoss layer_objective(SaeModel& model, std::span<const double> target,
                                 std::span<const double> masked, std::size_t level, double alpha,
                                 bool backprop) {
  const std::size_t li = level - 1;
  if (level == 1) {
    const Vector h1 = model.encoder(0).forward(masked);
    const Vector xhat = model.generator(0).forward(h1);
    LayerLoss loss;
    loss.rec_x = nn::mse_loss(target, xhat);
    loss.objective = loss.rec_x;
    if (backprop) {
      const Vector g = nn::mse_grad(target, xhat);
      model.encoder(0).backward(model.generator(0).backward(g));
    }
    return loss;
  }
  const Vector h_prev = model.encode(masked, li);
  const Vector h = model.encoder(li).forward(h_prev);
  const Vector h_prev_hat = model.generator(li).forward(h);
  const Vector xhat = model.decode(h_prev_hat, li);
  LayerLoss loss;
  loss.rec_x = nn::mse_loss(target, xhat);
  loss.rec_h = nn::mse_loss(h_prev, h_prev_hat);
  loss.objective = alpha * loss.rec_x + (1.0 - alpha) * loss.rec_h;
  if (backprop) {
    Vector g = nn::mse_grad(target, xhat, alpha);
    for (std::size_t l = li; l-- > 0;) g = model.generator(l).backward(g, /*accumulate=*/false);
    if (alpha != 1.0) {
      const Vector gh = nn::mse_grad(h_prev, h_prev_hat, 1.0 - alpha);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gh[i];
    }
    model.encoder(li).backward(model.generator(li).backward(g));
  }
  return loss;
}

/// Data for Step 1: flattened FC vectors, one per subject.
using FlatDataset = std::vector<Vector>;

namespace detail {

inline std::vector<nn::ParamBlock> level_params(SaeModel& model, std::size_t li) {
  auto p = model.encoder(li).params();
  auto g = model.generator(li).params();
  p.insert(p.end(), g.begin(), g.end());
  return p;
}

inline double mean_validation_objective(SaeModel& model, const FlatDataset& val, std::size_t level,
                                        const Step1Config& cfg) {
  const std::size_t r = roi_count_for_dim(model.input_dim());
  RngStream rng = RngStream(cfg.seed).split(0x7A1D);
  double total = 0.0;
  for (const auto& x : val) {
    const auto mask = fcdata::sample_mask(r, cfg.q, rng);
    const Vector masked = fcdata::apply_mask_flat(x, r, mask);
    total += layer_objective(model, x, masked, level, cfg.alpha, false).objective;
  }
  return total / static_cast<double>(val.size());
}

}  // namespace detail

/// Trains (E_level, G_level) with every lower level frozen. A fresh ROI mask
/// is drawn for each sample on every pass.
inline std::vector<EpochLog> train_layer(SaeModel& model, const FlatDataset& data,
                                         const Step1Config& cfg, std::size_t level,
                                         const FlatDataset& validation = {}) {
  cfg.validate();
  if (data.empty()) throw Error(Errc::kDimensionMismatch, "empty training data");
  if (level < 1 || level > model.depth()) throw Error(Errc::kIndexOutOfRange, "level " + std::to_string(level));
  for (std::size_t l = 0; l + 1 < level; ++l) {
    if (!model.trained(l)) {
      throw Error(Errc::kPrerequisiteNotTrained, "level " + std::to_string(l + 1) + " is not trained");
    }
  }
  const std::size_t li = level - 1;
  const std::size_t r = model.roi_count();
  RngStream rng = RngStream(cfg.seed).split(level);
  nn::AdamState adam({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  auto params = detail::level_params(model, li);

  std::vector<EpochLog> log;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<DenseLayer> best_layers;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = rng.permutation(data.size());
    EpochLog entry{level, epoch, 0.0, 0.0, 0.0};
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      model.encoder(li).zero_grad();
      model.generator(li).zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const Vector& x = data[order[k]];
        const auto mask = fcdata::sample_mask(r, cfg.q, rng);
        const Vector masked = fcdata::apply_mask_flat(x, r, mask);
        const LayerLoss loss = layer_objective(model, x, masked, level, cfg.alpha, true);
        entry.rec_loss_x += loss.rec_x;
        entry.rec_loss_h += loss.rec_h;
        entry.objective += loss.objective;
      }
      nn::scale_grads(params, 1.0 / static_cast<double>(end - start));
      adam.step(params);
    }
    const double n = static_cast<double>(data.size());
    entry.rec_loss_x /= n;
    entry.rec_loss_h /= n;
    entry.objective /= n;
    if (!std::isfinite(entry.objective)) {
      throw Error(Errc::kDiverged, "level " + std::to_string(level) + " epoch " + std::to_string(epoch));
    }
    log.push_back(entry);

    if (cfg.patience > 0 && !validation.empty()) {
      const double v = detail::mean_validation_objective(model, validation, level, cfg);
      if (v < best_val) {
        best_val = v;
        since_best = 0;
        best_layers = {model.encoder(li), model.generator(li)};
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  if (!best_layers.empty()) {
    model.encoder(li) = best_layers[0];
    model.generator(li) = best_layers[1];
  }
  model.mark_trained(li);
  return log;
}

/// Greedy training of every level in order.
inline std::vector<EpochLog> train_sae(SaeModel& model, const FlatDataset& data, const Step1Config& cfg,
                                       const FlatDataset& validation = {}) {
  std::vector<EpochLog> log;
  for (std::size_t level = 1; level <= model.depth(); ++level) {
    auto part = train_layer(model, data, cfg, level, validation);
    log.insert(log.end(), part.begin(), part.end());
  }
  return log;
}

/// Mean reconstruction error over the masked connections only, against the
/// zero-imputation baseline on the same entries. Masks come from `seed`.
struct MaskedReconstruction {
  double model_mse = 0.0;
  double zero_mse = 0.0;
  std::size_t entries = 0;
};

inline MaskedReconstruction masked_reconstruction_error(SaeModel& model, const FlatDataset& data,
                                                        double q, std::uint64_t seed) {
  const std::size_t r = model.roi_count();
  RngStream rng(seed);
  MaskedReconstruction out;
  for (const auto& x : data) {
    const auto mask = fcdata::sample_mask(r, q, rng);
    const Vector masked = fcdata::apply_mask_flat(x, r, mask);
    const Vector xhat = model.forward(masked);
    for (std::size_t p : fcdata::masked_positions(r, mask)) {
      out.model_mse += (xhat[p] - x[p]) * (xhat[p] - x[p]);
      out.zero_mse += x[p] * x[p];
      ++out.entries;
    }
  }
  if (out.entries > 0) {
    out.model_mse /= static_cast<double>(out.entries);
    out.zero_mse /= static_cast<double>(out.entries);
  }
  return out;
}

}  // namespace eagrs::sae

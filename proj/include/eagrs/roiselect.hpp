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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/lrp.hpp"
#include "eagrs/matrix.hpp"
#include "eagrs/nn/adam.hpp"
#include "eagrs/nn/dense.hpp"
#include "eagrs/nn/gumbel.hpp"
#include "eagrs/nn/loss.hpp"
#include "eagrs/rng.hpp"

namespace eagrs::roiselect {

using nn::Activation;
using nn::GateMode;

/// ROI-level summaries of the mean relevance map.
struct RepVectors {
  Vector fv;  // sum of the at-or-above-row-mean entries
  Vector fc;  // count of those entries

  std::size_t rois() const { return fv.size(); }

  /// Row-major R x 2 channel stack [fv | fc].
  Vector channels() const {
    Vector out(2 * fv.size());
    for (std::size_t r = 0; r < fv.size(); ++r) {
      out[2 * r] = fv[r];
      out[2 * r + 1] = fc[r];
    }
    return out;
  }
};

/// Per row r of S_bar: k[j] = 0 if S_bar[r][j] < mean(S_bar[r]) else 1;
/// fv[r] = sum_j S_bar[r][j] k[j]; fc[r] = sum_j k[j].
inline RepVectors representative_vectors(const Matrix& sbar) {
  require_finite(sbar.data(), "mean relevance");
  const std::size_t r = sbar.rows();
  RepVectors out{Vector(r, 0.0), Vector(r, 0.0)};
  for (std::size_t s = 0; s < r; ++s) {
    const auto row = sbar.row(s);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    for (double v : row) {
      if (v < mean) continue;
      out.fv[s] += v;
      out.fc[s] += 1.0;
    }
  }
  return out;
}

inline RepVectors representative_vectors(const lrp::RelevanceTensor& tensor,
                                         lrp::MeanAxis axis = lrp::MeanAxis::kTarget) {
  require_finite(tensor.values, "relevance tensor");
  return representative_vectors(lrp::mean_relevance(tensor, axis));
}

/// f'[i][j] = (g_i + g_j) / 2.
inline Matrix symmetrize_gate(std::span<const double> g) {
  const std::size_t r = g.size();
  Matrix out(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) out(i, j) = 0.5 * (g[i] + g[j]);
  return out;
}

/// flatten(X .* f') for f' = symmetrize_gate(g), computed on the flat FC.
inline Vector gate_connections(std::span<const double> flat_fc, std::span<const double> g) {
  const std::size_t r = g.size();
  Vector out(flat_fc.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j, ++k) out[k] = flat_fc[k] * 0.5 * (g[i] + g[j]);
  return out;
}

/// Gradient w.r.t. g of gate_connections, given dL/d(gated connections).
inline Vector gate_connections_backward(std::span<const double> flat_fc, std::span<const double> dgated,
                                        std::size_t r) {
  Vector dg(r, 0.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j, ++k) {
      const double v = 0.5 * dgated[k] * flat_fc[k];
      dg[i] += v;
      dg[j] += v;
    }
  }
  return dg;
}

/// {512, 15 R}: the 512/1650 widths at R = 110.
inline std::vector<std::size_t> psi_hidden_dims(std::size_t r) { return {512, 15 * r}; }

/// ROI selection network: channel merge, dense ReLU stack, per-ROI gate.
class PsiNetwork {
 public:
  PsiNetwork() = default;
  PsiNetwork(std::size_t r, double tau, RngStream& rng, std::vector<std::size_t> hidden = {})
      : gate_(tau) {
    if (hidden.empty()) hidden = psi_hidden_dims(r);
    merge_.init_glorot(rng);
    std::vector<std::size_t> dims{r};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(r);
    std::vector<Activation> acts(dims.size() - 1, Activation::kRelu);
    acts.back() = Activation::kIdentity;
    dense_ = nn::Mlp::build(dims, acts, rng);
  }

  std::size_t rois() const { return dense_.out_dim(); }
  nn::Conv1DChannelMerge& merge() { return merge_; }
  nn::Mlp& dense() { return dense_; }
  const nn::Mlp& dense() const { return dense_; }
  nn::GumbelGate& gate() { return gate_; }

  /// Pre-gate logits for an R x 2 channel stack.
  Vector logits(std::span<const double> channels) {
    if (channels.size() != 2 * rois()) {
      throw Error(Errc::kDimensionMismatch, "psi expects R x 2 input with R=" + std::to_string(rois()));
    }
    return dense_.forward(merge_.forward(channels));
  }

  /// Sample mode uses `noise` (Gumbel differences); hard-eval ignores it.
  Vector forward(std::span<const double> channels, GateMode mode, std::span<const double> noise = {}) {
    const Vector z = logits(channels);
    if (mode == GateMode::kHardEval) return gate_.hard(z);
    return gate_.forward(z, noise);
  }

  /// Backprop from dL/dgate of the last sample-mode forward.
  void backward(std::span<const double> dgate) {
    const Vector dz = gate_.backward(dgate);
    merge_.backward(dense_.backward(dz));
  }

  void zero_grad() {
    merge_.zero_grad();
    dense_.zero_grad();
  }

  std::vector<nn::ParamBlock> params() {
    auto p = merge_.params();
    auto d = dense_.params();
    p.insert(p.end(), d.begin(), d.end());
    return p;
  }

  /// Layers for checkpointing: the merge as a 2 -> 1 identity layer, then the dense stack.
  std::vector<nn::DenseLayer> layers() const {
    nn::DenseLayer merge(2, 1, Activation::kIdentity, true);
    merge.weights()(0, 0) = merge_.kernel()[0];
    merge.weights()(0, 1) = merge_.kernel()[1];
    merge.bias()[0] = merge_.bias();
    std::vector<nn::DenseLayer> out{merge};
    for (auto l : dense_.layers()) {
      l.clear_cache();
      out.push_back(std::move(l));
    }
    return out;
  }

 private:
  nn::Conv1DChannelMerge merge_;
  nn::Mlp dense_;
  nn::GumbelGate gate_;
};

/// Ablation switches. Cases II and III bypass the network entirely and are
/// handled by the linear-SVM path.
enum class AblationCase { kFull, kI, kII, kIII, kIV, kV, kVI };

inline std::string_view ablation_name(AblationCase c) {
  switch (c) {
    case AblationCase::kFull: return "full";
    case AblationCase::kI: return "I";
    case AblationCase::kII: return "II";
    case AblationCase::kIII: return "III";
    case AblationCase::kIV: return "IV";
    case AblationCase::kV: return "V";
    case AblationCase::kVI: return "VI";
  }
  return "?";
}

inline AblationCase ablation_from_name(std::string_view name) {
  for (auto c : {AblationCase::kFull, AblationCase::kI, AblationCase::kII, AblationCase::kIII,
                 AblationCase::kIV, AblationCase::kV, AblationCase::kVI}) {
    if (ablation_name(c) == name) return c;
  }
  throw Error(Errc::kInvalidConfig, "unknown ablation case '" + std::string(name) + "'");
}

inline bool uses_selection_network(AblationCase c) {
  return c == AblationCase::kFull || c == AblationCase::kV || c == AblationCase::kVI;
}

inline bool uses_svm(AblationCase c) { return c == AblationCase::kII || c == AblationCase::kIII; }

/// Case I classifies plain FC and needs no Step 2 output.
inline bool needs_relevance(AblationCase c) { return c != AblationCase::kI; }

/// y^ = C(E(flatten(X .* f'))) with a bias-free encoder.
inline Vector classify(nn::Mlp& encoder, nn::Mlp& classifier, const Matrix& fc, const Matrix& fprime) {
  if (encoder.empty()) throw Error(Errc::kUntrainedEncoder, "empty encoder");
  for (const auto& l : encoder.layers()) {
    if (l.bias_enabled()) throw Error(Errc::kUntrainedEncoder, "encoder biases must be removed");
  }
  if (fprime.rows() != fc.rows() || fprime.cols() != fc.cols()) {
    throw Error(Errc::kDimensionMismatch, "gate matrix shape");
  }
  Matrix gated(fc.rows(), fc.cols());
  for (std::size_t i = 0; i < fc.size(); ++i) gated.data()[i] = fc.data()[i] * fprime.data()[i];
  return classifier.forward(encoder.forward(flatten_upper(gated)));
}

/// Per-channel affine standardization of the R x 2 input of psi.
struct ChannelScaler {
  double mean[2] = {0.0, 0.0};
  double scale[2] = {1.0, 1.0};

  static ChannelScaler fit(std::span<const RepVectors* const> reps) {
    ChannelScaler s;
    for (int c = 0; c < 2; ++c) {
      double sum = 0.0, sq = 0.0, n = 0.0;
      for (const RepVectors* rv : reps) {
        const Vector& v = c == 0 ? rv->fv : rv->fc;
        for (double x : v) {
          sum += x;
          sq += x * x;
          n += 1.0;
        }
      }
      if (n == 0.0) continue;
      s.mean[c] = sum / n;
      const double var = sq / n - s.mean[c] * s.mean[c];
      s.scale[c] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    }
    return s;
  }

  Vector apply(const RepVectors& rv) const {
    Vector out = rv.channels();
    for (std::size_t r = 0; r < rv.rois(); ++r) {
      out[2 * r] = (out[2 * r] - mean[0]) * scale[0];
      out[2 * r + 1] = (out[2 * r + 1] - mean[1]) * scale[1];
    }
    return out;
  }
};

/// One subject as seen by Step 3.
struct Sample {
  const Vector* flat_fc = nullptr;
  const RepVectors* rep = nullptr;
  int label = 0;
};

struct Prediction {
  double score = 0.0;  // P(ASD)
  int label = 0;
  Vector selection;    // hard gate, all ones when psi is bypassed
};

/// psi + encoder + classifier trained jointly under cross entropy.
class DiagnosisModel {
 public:
  DiagnosisModel() = default;

  DiagnosisModel(const sae::SaeModel& sae, AblationCase ablation, double tau, RngStream& rng,
                 std::size_t classifier_hidden = 10, std::vector<std::size_t> psi_hidden = {})
      : ablation_(ablation), rois_(sae.roi_count()), encoder_(sae.bias_free_encoder()) {
    if (uses_svm(ablation)) throw Error(Errc::kInvalidConfig, "cases II/III use the SVM path");
    if (!sae.fully_trained()) throw Error(Errc::kUntrainedEncoder, "SAE is not trained");
    if (uses_selection_network(ablation)) psi_ = PsiNetwork(rois_, tau, rng, std::move(psi_hidden));
    const std::size_t clf_in = encoder_.out_dim() + (ablation == AblationCase::kIV ? 2 * rois_ : 0);
    const std::size_t dims[] = {clf_in, classifier_hidden, 2};
    const Activation acts[] = {Activation::kRelu, Activation::kSoftmax};
    classifier_ = nn::Mlp::build(dims, acts, rng);
  }

  AblationCase ablation() const { return ablation_; }
  std::size_t rois() const { return rois_; }
  PsiNetwork& psi() { return psi_; }
  nn::Mlp& encoder() { return encoder_; }
  nn::Mlp& classifier() { return classifier_; }
  ChannelScaler& scaler() { return scaler_; }

  /// psi input for a subject after ablation channel masking and scaling.
  Vector psi_input(const RepVectors& rep) const {
    Vector ch = scaler_.apply(rep);
    for (std::size_t r = 0; r < rois_; ++r) {
      if (ablation_ == AblationCase::kVI) ch[2 * r] = 0.0;
      if (ablation_ == AblationCase::kV) ch[2 * r + 1] = 0.0;
    }
    return ch;
  }

  /// Class probabilities. In sample mode `noise` must hold R Gumbel differences.
  Vector forward(const Sample& s, GateMode mode, std::span<const double> noise = {}) {
    if (uses_selection_network(ablation_)) {
      gate_ = psi_.forward(psi_input(*s.rep), mode, noise);
    } else {
      gate_.assign(rois_, 1.0);
    }
    Vector h = encoder_.forward(gate_connections(*s.flat_fc, gate_));
    if (ablation_ == AblationCase::kIV) {
      const Vector extra = scaler_.apply(*s.rep);
      h.insert(h.end(), extra.begin(), extra.end());
    }
    return classifier_.forward(h);
  }

  const Vector& last_gate() const { return gate_; }

  /// Backprop of dL/dprob through the last forward (sample mode).
  void backward(const Sample& s, std::span<const double> dprob) {
    Vector dh = classifier_.backward(dprob);
    dh.resize(encoder_.out_dim());
    const Vector dx = encoder_.backward(dh);
    if (uses_selection_network(ablation_)) {
      psi_.backward(gate_connections_backward(*s.flat_fc, dx, rois_));
    }
  }

  void zero_grad() {
    if (uses_selection_network(ablation_)) psi_.zero_grad();
    encoder_.zero_grad();
    classifier_.zero_grad();
  }

  std::vector<nn::ParamBlock> params() {
    std::vector<nn::ParamBlock> p;
    if (uses_selection_network(ablation_)) p = psi_.params();
    auto e = encoder_.params();
    auto c = classifier_.params();
    p.insert(p.end(), e.begin(), e.end());
    p.insert(p.end(), c.begin(), c.end());
    return p;
  }

  /// Checkpoint order: psi (when used), encoder, classifier.
  std::vector<nn::DenseLayer> layers() const {
    std::vector<nn::DenseLayer> out;
    if (uses_selection_network(ablation_)) out = psi_.layers();
    for (const nn::Mlp* m : {&encoder_, &classifier_}) {
      for (auto l : m->layers()) {
        l.clear_cache();
        out.push_back(std::move(l));
      }
    }
    return out;
  }

  Prediction predict(const Sample& s) {
    const Vector prob = forward(s, GateMode::kHardEval);
    return {prob[1], prob[1] >= prob[0] ? 1 : 0, gate_};
  }

 private:
  AblationCase ablation_ = AblationCase::kFull;
  std::size_t rois_ = 0;
  PsiNetwork psi_;
  nn::Mlp encoder_;
  nn::Mlp classifier_;
  ChannelScaler scaler_;
  Vector gate_;
};

inline Vector onehot(int label) { return label == 1 ? Vector{0.0, 1.0} : Vector{1.0, 0.0}; }

struct Step3Config {
  double lr = 1e-4;
  std::size_t batch = 50;
  std::size_t epochs = 300;
  double weight_decay = 5e-5;
  double tau = 0.01;
  std::uint64_t seed = 0;
  // Stop after this many epochs without validation improvement; 0 runs all epochs.
  std::size_t patience = 0;
};

struct Step3Log {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct Step3Result {
  std::vector<Step3Log> log;
  std::size_t best_epoch = 0;
};

inline double mean_eval_loss(DiagnosisModel& model, std::span<const Sample> data,
                             std::span<const std::size_t> idx) {
  double total = 0.0;
  for (std::size_t i : idx) {
    const Vector prob = model.forward(data[i], GateMode::kHardEval);
    total += nn::cross_entropy_loss(onehot(data[i].label), prob);
  }
  return total / static_cast<double>(idx.size());
}

/// Joint Adam training of psi, encoder and classifier. Gumbel noise is drawn
/// fresh on every forward. When `val_idx` is nonempty the parameters with the
/// lowest hard-gate validation loss are kept.
inline Step3Result train_step3(DiagnosisModel& model, std::span<const Sample> data,
                               std::span<const std::size_t> train_idx, std::span<const std::size_t> val_idx,
                               const Step3Config& cfg) {
  if (train_idx.empty()) throw Error(Errc::kDimensionMismatch, "empty training split");
  const bool with_reps = needs_relevance(model.ablation());
  for (std::size_t i : train_idx) {
    if (data[i].flat_fc == nullptr) throw Error(Errc::kDimensionMismatch, "sample " + std::to_string(i) + " has no FC");
    if (with_reps && data[i].rep == nullptr) {
      throw Error(Errc::kMissingRelevance, "sample " + std::to_string(i) + " has no representative vectors");
    }
  }
  if (with_reps) {
    std::vector<const RepVectors*> train_reps;
    for (std::size_t i : train_idx) train_reps.push_back(data[i].rep);
    model.scaler() = ChannelScaler::fit(train_reps);
  }

  RngStream rng = RngStream(cfg.seed).split(0x5733);
  nn::AdamState adam({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  auto params = model.params();
  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());

  Step3Result result;
  double best_val = std::numeric_limits<double>::infinity();
  std::optional<DiagnosisModel> best;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      model.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = data[order[k]];
        const Vector noise = nn::GumbelGate::draw_noise(rng, model.rois());
        const Vector prob = model.forward(s, GateMode::kSample, noise);
        const Vector y = onehot(s.label);
        total += nn::cross_entropy_loss(y, prob);
        model.backward(s, nn::cross_entropy_grad(y, prob));
      }
      nn::scale_grads(params, 1.0 / static_cast<double>(end - start));
      adam.step(params);
    }
    Step3Log entry{epoch, total / static_cast<double>(order.size())};
    if (!std::isfinite(entry.train_loss)) throw Error(Errc::kDiverged, "step 3 epoch " + std::to_string(epoch));
    if (!val_idx.empty()) {
      entry.val_loss = mean_eval_loss(model, data, val_idx);
      if (entry.val_loss < best_val) {
        best_val = entry.val_loss;
        best = model;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
        result.log.push_back(entry);
        break;
      }
    }
    result.log.push_back(entry);
  }
  if (best) model = *best;
  if (val_idx.empty()) result.best_epoch = result.log.size();
  return result;
}

}  // namespace eagrs::roiselect

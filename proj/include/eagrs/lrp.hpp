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
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/fcdata/dataset.hpp"
#include "eagrs/fcdata/mask.hpp"
#include "eagrs/matrix.hpp"
#include "eagrs/nn/checkpoint.hpp"
#include "eagrs/nn/dense.hpp"
#include "eagrs/parallel.hpp"
#include "eagrs/sae.hpp"

namespace eagrs::lrp {

using nn::DenseLayer;

struct RelevanceRule {
  enum class Kind { kZero, kEpsilon };
  Kind kind = Kind::kEpsilon;
  double epsilon = 1e-6;

  static RelevanceRule zero() { return {Kind::kZero, 0.0}; }
  static RelevanceRule eps(double e = 1e-6) { return {Kind::kEpsilon, e}; }

  double stabilizer(double z) const {
    if (kind == Kind::kZero) return 0.0;
    return z >= 0.0 ? epsilon : -epsilon;
  }
};

/// Inputs and pre-activations of every layer on one forward pass. Held apart
/// from the layers so a shared model can be traced by many workers.
struct ForwardTrace {
  std::vector<Vector> inputs;  // inputs[l] feeds layer l
  std::vector<Vector> pres;    // pres[l] = W_l inputs[l] + b_l
  Vector output;

  bool empty() const { return pres.empty(); }
};

inline ForwardTrace trace_forward(std::span<const DenseLayer* const> path, std::span<const double> x) {
  ForwardTrace trace;
  Vector h(x.begin(), x.end());
  for (const DenseLayer* layer : path) {
    if (h.size() != layer->in_dim()) throw Error(Errc::kDimensionMismatch, "trace input");
    Vector z(layer->out_dim());
    const auto& w = layer->weights();
    for (std::size_t o = 0; o < z.size(); ++o) {
      double s = layer->bias_enabled() ? layer->bias()[o] : 0.0;
      const auto wr = w.row(o);
      for (std::size_t i = 0; i < h.size(); ++i) s += wr[i] * h[i];
      z[o] = s;
    }
    Vector y(z.size());
    nn::activate(layer->activation(), z, y);
    trace.inputs.push_back(std::move(h));
    trace.pres.push_back(std::move(z));
    h = std::move(y);
  }
  trace.output = std::move(h);
  return trace;
}

inline ForwardTrace trace_forward(const sae::SaeModel& model, std::span<const double> x) {
  const auto path = model.forward_path();
  return trace_forward(path, x);
}

/// Redistributes output relevance to the input through every layer of `path`:
/// R_i = sum_j a_i w_ji R_j / (z_j + eps * sign(z_j)).
/// Activations are passed through as identity; a unit with z_j = 0 under the
/// zero rule passes nothing down.
inline Vector propagate(std::span<const DenseLayer* const> path, const ForwardTrace& trace,
                        Vector relevance, const RelevanceRule& rule) {
  if (trace.pres.size() != path.size()) throw Error(Errc::kMissingForwardCache, "trace does not match path");
  for (std::size_t l = path.size(); l-- > 0;) {
    const DenseLayer& layer = *path[l];
    const Vector& a = trace.inputs[l];
    const Vector& z = trace.pres[l];
    if (relevance.size() != layer.out_dim()) throw Error(Errc::kDimensionMismatch, "relevance width");
    Vector c(layer.in_dim(), 0.0);
    const auto& w = layer.weights();
    for (std::size_t j = 0; j < z.size(); ++j) {
      if (relevance[j] == 0.0) continue;
      const double denom = z[j] + rule.stabilizer(z[j]);
      if (denom == 0.0) continue;
      const double s = relevance[j] / denom;
      const auto wr = w.row(j);
      for (std::size_t i = 0; i < c.size(); ++i) c[i] += wr[i] * s;
    }
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= a[i];
    relevance = std::move(c);
  }
  return relevance;
}

/// Input relevance for one output unit, seeded with that unit's output value.
inline Vector lrp_backward(const sae::SaeModel& model, const ForwardTrace& trace, std::size_t output_unit,
                           const RelevanceRule& rule = RelevanceRule::eps()) {
  if (trace.empty()) throw Error(Errc::kMissingForwardCache, "no forward trace");
  if (output_unit >= trace.output.size()) {
    throw Error(Errc::kUnitOutOfRange, std::to_string(output_unit) + " >= " + std::to_string(trace.output.size()));
  }
  Vector seed(trace.output.size(), 0.0);
  seed[output_unit] = trace.output[output_unit];
  const auto path = model.forward_path();
  return propagate(path, trace, std::move(seed), rule);
}

inline Vector lrp_backward(const sae::SaeModel& model, std::span<const double> masked_input,
                           std::size_t output_unit, const RelevanceRule& rule = RelevanceRule::eps()) {
  return lrp_backward(model, trace_forward(model, masked_input), output_unit, rule);
}

/// Relevance map of the reconstruction of connection (masked_roi, target):
/// zero when target == masked_roi, otherwise the input relevance reshaped to
/// R x R with the masked ROI's row cleared.
inline Matrix phi(const sae::SaeModel& model, const ForwardTrace& trace, std::size_t masked_roi,
                  std::size_t target, const RelevanceRule& rule = RelevanceRule::eps()) {
  const std::size_t r = model.roi_count();
  if (masked_roi >= r || target >= r) throw Error(Errc::kUnitOutOfRange, "roi index");
  if (masked_roi == target) return Matrix(r, r);
  Matrix map = unflatten_upper(lrp_backward(model, trace, upper_index(masked_roi, target, r), rule), r);
  for (std::size_t k = 0; k < r; ++k) map(masked_roi, k) = 0.0;
  return map;
}

/// Masked input for seed ROI r: the FC with the r-th seed-based network removed.
inline Vector seed_masked_input(const Matrix& fc, std::size_t seed_roi) {
  return fcdata::apply_mask_flat(flatten_upper(fc), fc.rows(), fcdata::single_roi_mask(seed_roi));
}

/// s'_r = sum over targets j != r of phi(r, j).
///
/// Relevance propagation is linear in the seed relevance for a fixed forward
/// pass, so the sum is computed with one backward pass seeded at every
/// connection (r, j) simultaneously.
inline Matrix relevance_for_seed(const sae::SaeModel& model, const Matrix& fc, std::size_t seed_roi,
                                 const RelevanceRule& rule = RelevanceRule::eps()) {
  const std::size_t r = model.roi_count();
  if (fc.rows() != r || !fc.square()) throw Error(Errc::kDimensionMismatch, "FC size does not match model");
  if (seed_roi >= r) throw Error(Errc::kUnitOutOfRange, "seed roi " + std::to_string(seed_roi));
  const ForwardTrace trace = trace_forward(model, seed_masked_input(fc, seed_roi));
  Vector seed(trace.output.size(), 0.0);
  for (std::size_t j = 0; j < r; ++j) {
    if (j == seed_roi) continue;
    const std::size_t unit = upper_index(seed_roi, j, r);
    seed[unit] = trace.output[unit];
  }
  const auto path = model.forward_path();
  Matrix map = unflatten_upper(propagate(path, trace, std::move(seed), rule), r);
  for (std::size_t k = 0; k < r; ++k) map(seed_roi, k) = 0.0;
  return map;
}

/// Per-subject R x R x R relevance: slice s holds s'_s. Index [s][i][k].
struct RelevanceTensor {
  std::size_t r = 0;
  std::string subject_id;
  std::vector<double> values;

  double& at(std::size_t s, std::size_t i, std::size_t k) { return values[(s * r + i) * r + k]; }
  double at(std::size_t s, std::size_t i, std::size_t k) const { return values[(s * r + i) * r + k]; }

  Matrix slice(std::size_t s) const {
    return Matrix(r, r, std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(s * r * r),
                                            values.begin() + static_cast<std::ptrdiff_t>((s + 1) * r * r)));
  }
};

/// Stacks relevance_for_seed over every seed ROI. Seeds may run on `workers`
/// threads; each writes a disjoint slice.
inline RelevanceTensor global_relevance(const sae::SaeModel& model, const Matrix& fc,
                                        const RelevanceRule& rule = RelevanceRule::eps(),
                                        std::size_t workers = 1, std::string subject_id = {}) {
  const std::size_t r = model.roi_count();
  RelevanceTensor tensor{r, std::move(subject_id), std::vector<double>(r * r * r, 0.0)};
  parallel_for(r, workers, [&](std::size_t s) {
    const Matrix map = relevance_for_seed(model, fc, s, rule);
    std::copy(map.data().begin(), map.data().end(), tensor.values.begin() + static_cast<std::ptrdiff_t>(s * r * r));
  });
  return tensor;
}

enum class MeanAxis {
  kTarget,  // average over the last index: S_bar[s][i] = mean_k S[s][i][k]
  kSource,  // average over the middle index: S_bar[s][k] = mean_i S[s][i][k]
};

/// R x R average of the relevance tensor; row s comes only from slice s.
inline Matrix mean_relevance(const RelevanceTensor& t, MeanAxis axis = MeanAxis::kTarget) {
  const std::size_t r = t.r;
  Matrix out(r, r);
  for (std::size_t s = 0; s < r; ++s) {
    for (std::size_t a = 0; a < r; ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < r; ++b) sum += axis == MeanAxis::kTarget ? t.at(s, a, b) : t.at(s, b, a);
      out(s, a) = sum / static_cast<double>(r);
    }
  }
  return out;
}

// Relevance file layout (little-endian):
//   "EAGR" | u32 version | u32 R | u32 subject_count | subject_count x f32[R*R*R]
inline constexpr char kRelevanceMagic[4] = {'E', 'A', 'G', 'R'};
inline constexpr std::uint32_t kRelevanceVersion = 1;

inline std::vector<std::uint8_t> serialize_tensors(std::span<const RelevanceTensor> tensors) {
  std::vector<std::uint8_t> out(std::begin(kRelevanceMagic), std::end(kRelevanceMagic));
  const std::size_t r = tensors.empty() ? 0 : tensors.front().r;
  nn::detail::put_u32(out, kRelevanceVersion);
  nn::detail::put_u32(out, static_cast<std::uint32_t>(r));
  nn::detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.r != r) throw Error(Errc::kDimensionMismatch, "mixed ROI counts in relevance file");
    for (double v : t.values) nn::detail::put_f32(out, static_cast<float>(v));
  }
  return out;
}

inline std::vector<RelevanceTensor> deserialize_tensors(std::span<const std::uint8_t> bytes) {
  nn::detail::ByteReader in(bytes);
  in.magic(kRelevanceMagic);
  const std::uint32_t version = in.u32();
  if (version != kRelevanceVersion) throw Error(Errc::kParseError, "relevance version " + std::to_string(version));
  const std::uint32_t r = in.u32();
  const std::uint32_t count = in.u32();
  std::vector<RelevanceTensor> out(count);
  for (auto& t : out) {
    t.r = r;
    t.values.resize(static_cast<std::size_t>(r) * r * r);
    for (double& v : t.values) v = in.f32();
  }
  if (!in.done()) throw Error(Errc::kParseError, "trailing bytes in relevance file");
  return out;
}

inline void save_tensors(const std::filesystem::path& path, std::span<const RelevanceTensor> tensors) {
  const auto bytes = serialize_tensors(tensors);
  nn::detail::write_file(path, bytes);
}

inline std::vector<RelevanceTensor> load_tensors(const std::filesystem::path& path) {
  return deserialize_tensors(nn::detail::read_file(path));
}

/// Writes an R x R mean relevance map as CSV for inspection.
inline void write_mean_relevance_csv(const std::filesystem::path& path, const Matrix& mean) {
  fcdata::write_fc_csv(path, mean);
}

}  // namespace eagrs::lrp

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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/fcdata/pearson.hpp"
#include "eagrs/fcdata/subject.hpp"
#include "eagrs/matrix.hpp"
#include "eagrs/parallel.hpp"
#include "eagrs/rng.hpp"

namespace eagrs::fcdata {

/// ROIs whose mutual correlations are boosted for subjects of `label`.
/// Several groups with the same label split that class into subtypes.
struct PlantedGroup {
  int label = kLabelASD;
  std::vector<std::size_t> rois;
};

struct SyntheticConfig {
  std::size_t r = 16;
  std::size_t n_per_class = 100;
  std::size_t t = 200;
  std::vector<PlantedGroup> planted;
  double effect_size = 0.6;
  std::uint64_t seed = 7;
  // Shared latent-factor structure common to every subject.
  std::size_t base_factors = 3;
  double base_loading = 0.5;
  // Per-subject perturbation of the shared loadings.
  double subject_jitter = 0.15;

  /// Planted ROIs of a class, sorted and de-duplicated.
  std::vector<std::size_t> planted_rois(int label) const {
    std::vector<std::size_t> out;
    for (const auto& g : planted)
      if (g.label == label) out.insert(out.end(), g.rois.begin(), g.rois.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Default plant: the first max(2, r/4) ROIs for ASD.
  static SyntheticConfig with_default_plant(std::size_t r, std::size_t n_per_class,
                                            std::size_t t, double effect, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.r = r;
    cfg.n_per_class = n_per_class;
    cfg.t = t;
    cfg.effect_size = effect;
    cfg.seed = seed;
    PlantedGroup g;
    for (std::size_t i = 0; i < std::max<std::size_t>(2, r / 4); ++i) g.rois.push_back(i);
    cfg.planted.push_back(g);
    return cfg;
  }

  void validate() const {
    if (r < 2) throw Error(Errc::kInvalidConfig, "synthetic r must be >= 2");
    if (n_per_class < 1) throw Error(Errc::kInvalidConfig, "n_per_class must be >= 1");
    if (t < 3) throw Error(Errc::kInvalidConfig, "timepoints must be >= 3");
    if (!(effect_size >= 0.0)) throw Error(Errc::kInvalidConfig, "effect_size must be >= 0");
    for (const auto& g : planted) {
      if (g.label != kLabelASD && g.label != kLabelTD) throw Error(Errc::kInvalidConfig, "planted label");
      for (std::size_t roi : g.rois)
        if (roi >= r) throw Error(Errc::kInvalidConfig, "planted roi " + std::to_string(roi) + " >= r");
    }
  }
};

namespace detail {

/// Clips eigenvalues at 1e-10 and rescales to unit diagonal. Returns the
/// factor F with F F^T equal to the repaired correlation matrix.
inline Eigen::MatrixXd repaired_correlation_factor(Eigen::MatrixXd c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success) throw Error(Errc::kDegenerateCovariance, "eigensolver failed");
  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(1e-10);
  Eigen::MatrixXd factor = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  const Eigen::VectorXd diag = factor.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) {
      throw Error(Errc::kDegenerateCovariance, "non-positive variance after repair");
    }
    factor.row(i) /= std::sqrt(diag(i));
  }
  return factor;
}

}  // namespace detail

/// Population correlation for one subject before sampling. Planted pairs
/// (i != j in the subject's group) move toward +1 by `effect_size`:
/// c' = min(1, c + effect_size * (1 - c)). sample_bold repairs the result
/// when the boost leaves it indefinite.
inline Matrix subject_correlation(const SyntheticConfig& cfg, const Eigen::MatrixXd& base_loadings,
                                  const PlantedGroup* group, RngStream& rng) {
  const auto r = static_cast<Eigen::Index>(cfg.r);
  Eigen::MatrixXd loadings = base_loadings;
  for (Eigen::Index i = 0; i < loadings.size(); ++i) loadings.data()[i] += cfg.subject_jitter * rng.normal();
  Eigen::MatrixXd cov = loadings * loadings.transpose();
  cov.diagonal().array() += 1.0;
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  Matrix c(cfg.r, cfg.r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) c(i, j) = cov(i, j) / (sd(i) * sd(j));
  if (group != nullptr) {
    for (std::size_t a : group->rois) {
      for (std::size_t b : group->rois) {
        if (a == b) continue;
        c(a, b) = std::min(1.0, c(a, b) + cfg.effect_size * (1.0 - c(a, b)));
      }
    }
  }
  return c;
}

/// Draws T samples from N(0, C) after PSD repair and returns the ROI x T series.
inline BoldSeries sample_bold(const Matrix& corr, std::size_t t, RngStream& rng) {
  const auto r = static_cast<Eigen::Index>(corr.rows());
  Eigen::MatrixXd c(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) c(i, j) = corr(i, j);
  const Eigen::MatrixXd factor = detail::repaired_correlation_factor(c);
  BoldSeries ts{Matrix(corr.rows(), t)};
  Eigen::VectorXd z(r);
  for (std::size_t k = 0; k < t; ++k) {
    for (Eigen::Index i = 0; i < r; ++i) z(i) = rng.normal();
    const Eigen::VectorXd x = factor * z;
    for (Eigen::Index i = 0; i < r; ++i) ts.values(i, k) = x(i);
  }
  return ts;
}

/// Balanced cohort: subjects 0..n-1 are TD, n..2n-1 are ASD. Subject i draws
/// from root.split(i + 1), so output is independent of `workers`.
inline std::vector<Subject> generate_cohort(const SyntheticConfig& cfg, std::size_t workers = 1) {
  cfg.validate();
  const RngStream root(cfg.seed);
  RngStream base_rng = root.split(0xBA5E);
  const auto r = static_cast<Eigen::Index>(cfg.r);
  Eigen::MatrixXd base(r, static_cast<Eigen::Index>(cfg.base_factors));
  for (Eigen::Index i = 0; i < base.size(); ++i) base.data()[i] = cfg.base_loading * base_rng.normal();

  std::vector<const PlantedGroup*> groups_by_label[2];
  for (const auto& g : cfg.planted) groups_by_label[g.label].push_back(&g);

  const std::size_t n = 2 * cfg.n_per_class;
  std::vector<Subject> cohort(n);
  parallel_for(n, workers, [&](std::size_t i) {
    RngStream rng = root.split(i + 1);
    const int label = i < cfg.n_per_class ? kLabelTD : kLabelASD;
    const std::size_t within = i % cfg.n_per_class;
    const auto& groups = groups_by_label[label];
    const PlantedGroup* group = groups.empty() ? nullptr : groups[within % groups.size()];
    const Matrix corr = subject_correlation(cfg, base, group, rng);
    char id[32];
    std::snprintf(id, sizeof(id), "sub%04zu", i);
    cohort[i] = Subject{id, pearson_fc(sample_bold(corr, cfg.t, rng)), label, "synthetic"};
  });
  return cohort;
}

/// Index of the planted group (among groups sharing the subject's label) used
/// by generate_cohort for subject i, or -1 when its class has no plant.
inline int planted_group_of(const SyntheticConfig& cfg, std::size_t i) {
  const int label = i < cfg.n_per_class ? kLabelTD : kLabelASD;
  int count = 0;
  for (const auto& g : cfg.planted) count += g.label == label ? 1 : 0;
  if (count == 0) return -1;
  return static_cast<int>((i % cfg.n_per_class) % static_cast<std::size_t>(count));
}

}  // namespace eagrs::fcdata

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
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "eagrs/error.hpp"

namespace eagrs::eval {

/// Mann-Whitney AUC: P(score of a random positive > score of a random
/// negative), ties counted one half. Labels: 1 = positive (ASD).
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::kLengthMismatch, "scores vs labels");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie groups.
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::kSingleClass, "AUC needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

struct ConfusionMetrics {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  double acc = 0.0;
  double sen = 0.0;   // NaN when there are no positives
  double spec = 0.0;  // NaN when there are no negatives
  bool sen_defined = true;
  bool spec_defined = true;
};

inline ConfusionMetrics confusion_metrics(std::span<const int> pred, std::span<const int> labels) {
  if (pred.size() != labels.size()) throw Error(Errc::kLengthMismatch, "pred vs labels");
  ConfusionMetrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (labels[i] == 1) {
      (pred[i] == 1 ? m.tp : m.fn)++;
    } else {
      (pred[i] == 1 ? m.fp : m.tn)++;
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b, bool& defined) {
    defined = b > 0;
    return defined ? static_cast<double>(a) / static_cast<double>(b) : std::numeric_limits<double>::quiet_NaN();
  };
  bool acc_defined = true;
  m.acc = ratio(m.tp + m.tn, pred.size(), acc_defined);
  m.sen = ratio(m.tp, m.tp + m.fn, m.sen_defined);
  m.spec = ratio(m.tn, m.tn + m.fp, m.spec_defined);
  return m;
}

struct McNemarResult {
  std::size_t b = 0;  // only classifier A correct
  std::size_t c = 0;  // only classifier B correct
  double chi2 = 0.0;
  double p = 1.0;
};

/// Continuity-corrected McNemar: chi2 = (|b - c| - 1)^2 / (b + c), with the
/// one-degree-of-freedom tail p = erfc(sqrt(chi2 / 2)).
inline McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c) {
  if (b + c == 0) throw Error(Errc::kNoDiscordantPairs, "b + c = 0");
  McNemarResult r{b, c, 0.0, 1.0};
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
  r.chi2 = diff * diff / static_cast<double>(b + c);
  r.p = std::erfc(std::sqrt(r.chi2 / 2.0));
  return r;
}

/// Counts discordant pairs between two classifiers and tests them.
inline McNemarResult mcnemar(std::span<const int> pred_a, std::span<const int> pred_b,
                             std::span<const int> labels) {
  if (pred_a.size() != labels.size() || pred_b.size() != labels.size()) {
    throw Error(Errc::kLengthMismatch, "mcnemar inputs");
  }
  McNemarResult r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a_ok = pred_a[i] == labels[i];
    const bool b_ok = pred_b[i] == labels[i];
    if (a_ok && !b_ok) ++r.b;
    if (b_ok && !a_ok) ++r.c;
  }
  return mcnemar_from_counts(r.b, r.c);
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};

inline Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace eagrs::eval

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

#include "json.hpp"

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"

namespace eagrs::eval {

struct Merge {
  std::size_t a = 0;  // cluster ids: leaves 0..n-1, merge k creates n + k
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<Merge> merges;

  /// Leaf labels after applying the first `count` merges; labels number the
  /// clusters in order of their lowest leaf.
  std::vector<int> labels_after(std::size_t count) const {
    std::vector<std::size_t> parent(leaves + merges.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t k = 0; k < count; ++k) {
      parent[find(merges[k].a)] = leaves + k;
      parent[find(merges[k].b)] = leaves + k;
    }
    std::vector<int> labels(leaves, -1);
    std::vector<int> root_label(parent.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < leaves; ++i) {
      const std::size_t root = find(i);
      if (root_label[root] < 0) root_label[root] = next++;
      labels[i] = root_label[root];
    }
    return labels;
  }

  std::vector<int> cut_by_count(std::size_t clusters) const {
    clusters = std::clamp<std::size_t>(clusters, 1, leaves);
    return labels_after(leaves - clusters);
  }

  /// Joins every merge whose height divided by the top merge height is at
  /// most `threshold`. A dendrogram whose heights are all zero is one cluster.
  std::vector<int> cut_by_normalized_height(double threshold) const {
    if (merges.empty()) return labels_after(0);
    const double top = merges.back().height;
    std::size_t count = 0;
    while (count < merges.size()) {
      const double h = top > 0.0 ? merges[count].height / top : 0.0;
      if (h > threshold) break;
      ++count;
    }
    return labels_after(count);
  }

  nlohmann::json to_json() const {
    nlohmann::json merges_json = nlohmann::json::array();
    for (const auto& m : merges) {
      merges_json.push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
    }
    return {{"leaves", leaves}, {"linkage", "ward"}, {"merges", merges_json}};
  }
};

/// Agglomerative Ward clustering on Euclidean features.
///
/// Works on squared distances with the Lance-Williams update
///   d(k, i+j) = ((n_i + n_k) d(k,i) + (n_j + n_k) d(k,j) - n_k d(i,j)) / (n_i + n_j + n_k),
/// and reports heights as sqrt(d), i.e. sqrt(2 * increase in within-cluster
/// sum of squares). Ties go to the lowest index pair.
inline Dendrogram ward_cluster(std::span<const Vector> features) {
  const std::size_t n = features.size();
  if (n < 2) throw Error(Errc::kTooFewSubjects, "ward clustering needs >= 2 subjects");
  for (const auto& f : features) {
    if (f.size() != features.front().size()) throw Error(Errc::kDimensionMismatch, "feature width");
    require_finite(f, "clustering features");
  }
  Matrix d2(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < features[i].size(); ++k) {
        const double diff = features[i][k] - features[j][k];
        s += diff * diff;
      }
      d2(i, j) = d2(j, i) = s;
    }
  }
  std::vector<std::size_t> size(n, 1), id(n);
  std::iota(id.begin(), id.end(), std::size_t{0});
  std::vector<bool> active(n, true);

  Dendrogram dendro{n, {}};
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (active[j] && d2(i, j) < best) {
          best = d2(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    const double ni = static_cast<double>(size[bi]);
    const double nj = static_cast<double>(size[bj]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double nk = static_cast<double>(size[k]);
      const double v = ((ni + nk) * d2(k, bi) + (nj + nk) * d2(k, bj) - nk * d2(bi, bj)) / (ni + nj + nk);
      d2(k, bi) = d2(bi, k) = std::max(0.0, v);
    }
    dendro.merges.push_back({std::min(id[bi], id[bj]), std::max(id[bi], id[bj]), std::sqrt(std::max(0.0, best)),
                             size[bi] + size[bj]});
    size[bi] += size[bj];
    id[bi] = n + step;
    active[bj] = false;
  }
  return dendro;
}

}  // namespace eagrs::eval

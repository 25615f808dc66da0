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
#include <span>
#include <string>
#include <vector>

#include "eagrs/error.hpp"
#include "eagrs/matrix.hpp"
#include "eagrs/rng.hpp"

namespace eagrs::fcdata {

/// ROIs whose seed-based networks (row and column) are removed.
struct MaskSet {
  std::vector<std::size_t> indices;  // sorted, distinct
  double q = 0.0;

  bool contains(std::size_t roi) const {
    return std::binary_search(indices.begin(), indices.end(), roi);
  }
  std::size_t size() const { return indices.size(); }
};

/// floor(q * r), at least one when q > 0.
inline std::size_t mask_count(std::size_t r, double q) {
  if (!(q >= 0.0 && q < 1.0)) throw Error(Errc::kInvalidRatio, "q=" + std::to_string(q));
  if (q == 0.0) return 0;
  // The epsilon keeps products like 0.29 * 100 from flooring to 28.
  const auto n = static_cast<std::size_t>(std::floor(q * static_cast<double>(r) + 1e-9));
  return std::max<std::size_t>(1, n);
}

/// Uniform draw of mask_count(r, q) distinct ROIs.
inline MaskSet sample_mask(std::size_t r, double q, RngStream& rng) {
  const std::size_t count = mask_count(r, q);
  std::vector<std::size_t> pool(r);
  for (std::size_t i = 0; i < r; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.uniform_index(r - i)]);
  }
  MaskSet m{{pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count)}, q};
  std::sort(m.indices.begin(), m.indices.end());
  return m;
}

inline MaskSet single_roi_mask(std::size_t roi) { return MaskSet{{roi}, 0.0}; }

inline void check_mask(const MaskSet& m, std::size_t r) {
  for (std::size_t i : m.indices) {
    if (i >= r) {
      throw Error(Errc::kIndexOutOfRange, "mask index " + std::to_string(i) + " >= " + std::to_string(r));
    }
  }
}

/// M .* X where M zeroes every row and column listed in the mask.
inline Matrix apply_mask(const Matrix& x, const MaskSet& m) {
  if (!x.square()) throw Error(Errc::kNonSquare, "apply_mask");
  check_mask(m, x.rows());
  Matrix out = x;
  for (std::size_t i : m.indices) {
    for (std::size_t k = 0; k < x.rows(); ++k) {
      out(i, k) = 0.0;
      out(k, i) = 0.0;
    }
  }
  return out;
}

/// Same as flatten_upper(apply_mask(unflatten_upper(v), m)) without the round trip.
inline Vector apply_mask_flat(std::span<const double> v, std::size_t r, const MaskSet& m) {
  check_mask(m, r);
  Vector out(v.begin(), v.end());
  for (std::size_t i : m.indices) {
    for (std::size_t k = 0; k < r; ++k) {
      if (k != i) out[upper_index(i, k, r)] = 0.0;
    }
  }
  return out;
}

/// Flat positions touched by the mask.
inline std::vector<std::size_t> masked_positions(std::size_t r, const MaskSet& m) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j)
      if (m.contains(i) || m.contains(j)) pos.push_back(upper_index(i, j, r));
  return pos;
}

}  // namespace eagrs::fcdata

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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eagrs/error.hpp"

namespace eagrs {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(Errc::kDimensionMismatch,
                  "matrix data length " + std::to_string(data_.size()) +
                      " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(Errc::kNonFinite, std::string(what) + " has non-finite entry");
  }
}

/// Number of off-diagonal upper-triangle entries of an r x r matrix.
constexpr std::size_t upper_dim(std::size_t r) { return r < 2 ? 0 : r * (r - 1) / 2; }

/// Position of connection (i, j), i != j, in the flattened vector. Entries are
/// ordered row-major over the strict upper triangle: (0,1), (0,2), ..., (1,2), ...
constexpr std::size_t upper_index(std::size_t i, std::size_t j, std::size_t r) {
  if (i > j) std::swap(i, j);
  return i * r - i * (i + 1) / 2 + (j - i - 1);
}

/// Inverse of upper_dim; throws when d is not triangular.
inline std::size_t roi_count_for_dim(std::size_t d) {
  std::size_t r = static_cast<std::size_t>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(d))) / 2.0));
  if (d == 0) return 1;
  if (upper_dim(r) != d) {
    throw Error(Errc::kDimensionMismatch, std::to_string(d) + " is not r(r-1)/2 for any r");
  }
  return r;
}

inline Vector flatten_upper(const Matrix& m, double symmetry_tol = 1e-9) {
  if (!m.square()) {
    throw Error(Errc::kNonSquare, std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  const std::size_t r = m.rows();
  Vector out;
  out.reserve(upper_dim(r));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j) {
      if (std::isnan(m(i, j)) || std::isnan(m(j, i))) {
        throw Error(Errc::kNonFinite, "NaN at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (std::abs(m(i, j) - m(j, i)) > symmetry_tol) {
        throw Error(Errc::kAsymmetricBeyondTolerance,
                    "entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      out.push_back(m(i, j));
    }
  }
  return out;
}

inline Matrix unflatten_upper(std::span<const double> v, std::size_t r) {
  if (v.size() != upper_dim(r)) {
    throw Error(Errc::kDimensionMismatch, "length " + std::to_string(v.size()) +
                                              " for r=" + std::to_string(r));
  }
  Matrix m(r, r);
  std::size_t k = 0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i + 1; j < r; ++j, ++k) {
      m(i, j) = v[k];
      m(j, i) = v[k];
    }
  }
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace eagrs

// Copyright 2026 The cvdetect Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvdetect/core/error.hpp"

namespace cvdetect {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Dense row-major tensor. Rank-4 tensors are laid out (n, c, h, w).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw ArgumentError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                          shape_str(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }
  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Number of leading-axis entries (batch size).
  std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
  /// Elements per leading-axis entry.
  std::size_t sample_size() const { return shape_.empty() || shape_[0] == 0 ? 0 : data_.size() / shape_[0]; }

  std::span<T> sample(std::size_t i) { return std::span<T>(data_).subspan(i * sample_size(), sample_size()); }
  std::span<const T> sample(std::size_t i) const {
    return std::span<const T>(data_).subspan(i * sample_size(), sample_size());
  }

  Tensor reshaped(Shape s) const& {
    check_reshape(s);
    return Tensor(std::move(s), data_);
  }
  Tensor reshaped(Shape s) && {
    check_reshape(s);
    return Tensor(std::move(s), std::move(data_));
  }

  /// Copy of leading-axis rows [begin, end).
  Tensor slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > batch()) throw ArgumentError("slice out of range");
    Shape s = shape_;
    s[0] = end - begin;
    const std::size_t k = sample_size();
    return Tensor(std::move(s), std::vector<T>(data_.begin() + begin * k, data_.begin() + end * k));
  }

  /// Gather leading-axis rows by index.
  Tensor gather(std::span<const std::size_t> idx) const {
    Shape s = shape_;
    s[0] = idx.size();
    Tensor out(std::move(s));
    const std::size_t k = sample_size();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= batch()) throw ArgumentError("gather index out of range");
      std::copy_n(data_.begin() + idx[i] * k, k, out.data_.begin() + i * k);
    }
    return out;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

  MatrixMap<T> matrix(std::size_t rows, std::size_t cols) {
    return MatrixMap<T>(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }
  ConstMatrixMap<T> matrix(std::size_t rows, std::size_t cols) const {
    return ConstMatrixMap<T>(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }

 private:
  void check_reshape(const Shape& s) const {
    if (shape_size(s) != data_.size())
      throw ArgumentError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
  }
  void check_same(const Tensor& o) const {
    if (o.shape_ != shape_) throw ArgumentError("shape mismatch " + shape_str(shape_) + " vs " + shape_str(o.shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

/// n x c x h x w pixel tensor with every value in [0,1].
using ImageBatch = Tensor<float>;

/// Throws ArgumentError unless `x` is rank 4 with all pixels in [0,1].
template <typename T>
void check_image_batch(const Tensor<T>& x) {
  if (x.rank() != 4) throw ArgumentError("image batch must be rank 4, got " + shape_str(x.shape()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= T{0} && x[i] <= T{1}))
      throw ArgumentError("pixel " + std::to_string(i) + " outside [0,1]");
  }
}

/// Concatenate along the leading axis. All trailing dims must agree.
template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts) {
  if (parts.empty()) return {};
  Shape s = parts.front().shape();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (!std::equal(p.shape().begin() + 1, p.shape().end(), s.begin() + 1, s.end()))
      throw ArgumentError("concat: trailing shape mismatch");
    n += p.batch();
  }
  s[0] = n;
  std::vector<T> data;
  data.reserve(shape_size(s));
  for (const auto& p : parts) data.insert(data.end(), p.storage().begin(), p.storage().end());
  return Tensor<T>(std::move(s), std::move(data));
}

}  // namespace cvdetect

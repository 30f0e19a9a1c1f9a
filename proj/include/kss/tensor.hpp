#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kss/error.hpp"

namespace kss {

/// Dense row-major matrix. Used for adjacency matrices, label embeddings
/// and weight matrices alike.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    detail::require_shape(values_.size() == rows * cols,
                          "Matrix: value count does not match shape");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  T& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }

  std::span<T> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

/// a * b
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ (" +
                                                  std::to_string(a.cols()) + " vs " +
                                                  std::to_string(b.rows()) + ")");
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

/// aᵀ * b
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require_shape(a.rows() == b.rows(), "matmul_tn: row counts differ");
  Matrix<T> out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto src = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T aki = a(k, i);
      auto dst = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aki * src[j];
    }
  }
  return out;
}

/// a * bᵀ
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require_shape(a.cols() == b.cols(), "matmul_nt: column counts differ");
  Matrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      T acc{};
      for (std::size_t k = 0; k < a.cols(); ++k) acc += ai[k] * bj[k];
      out(i, j) = acc;
    }
  }
  return out;
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(),
                     [](T v) { return std::isfinite(v); });
}

/// Activation tensor of one sample: C×H×W, or C×T×H×W when `temporal`.
/// Storage is channel-major with the (t, h, w) positions flattened.
template <typename T>
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
      : FeatureMap(channels, 1, height, width, false, fill) {}
  FeatureMap(std::size_t channels, std::size_t frames, std::size_t height,
             std::size_t width, T fill = T{})
      : FeatureMap(channels, frames, height, width, true, fill) {}

  std::size_t channels() const noexcept { return channels_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  bool temporal() const noexcept { return temporal_; }
  std::size_t positions() const noexcept { return frames_ * height_ * width_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& at(std::size_t c, std::size_t h, std::size_t w) {
    return values_[(c * height_ + h) * width_ + w];
  }
  const T& at(std::size_t c, std::size_t h, std::size_t w) const {
    return values_[(c * height_ + h) * width_ + w];
  }
  T& at(std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
    return values_[((c * frames_ + t) * height_ + h) * width_ + w];
  }
  const T& at(std::size_t c, std::size_t t, std::size_t h, std::size_t w) const {
    return values_[((c * frames_ + t) * height_ + h) * width_ + w];
  }

  /// Values of channel c over all positions.
  std::span<T> channel(std::size_t c) {
    return {values_.data() + c * positions(), positions()};
  }
  std::span<const T> channel(std::size_t c) const {
    return {values_.data() + c * positions(), positions()};
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  bool same_shape(const FeatureMap& o) const noexcept {
    return channels_ == o.channels_ && frames_ == o.frames_ && height_ == o.height_ &&
           width_ == o.width_ && temporal_ == o.temporal_;
  }

  std::string shape_string() const {
    std::string s = std::to_string(channels_) + "x";
    if (temporal_) s += std::to_string(frames_) + "x";
    return s + std::to_string(height_) + "x" + std::to_string(width_);
  }

  bool operator==(const FeatureMap&) const = default;

 private:
  FeatureMap(std::size_t c, std::size_t t, std::size_t h, std::size_t w, bool temporal,
             T fill)
      : channels_(c), frames_(t), height_(h), width_(w), temporal_(temporal),
        values_(c * t * h * w, fill) {
    detail::require_shape(c >= 1 && t >= 1 && h >= 1 && w >= 1,
                          "FeatureMap: all dimensions must be >= 1");
  }

  std::size_t channels_ = 0;
  std::size_t frames_ = 1;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  bool temporal_ = false;
  std::vector<T> values_;
};

}  // namespace kss

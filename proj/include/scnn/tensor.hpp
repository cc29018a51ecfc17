#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scnn/error.hpp"

namespace scnn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major n-dimensional array.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (shape_size(shape_) != data_.size()) {
      detail::fail(ErrorCategory::shape, "tensor", "shape ", shape_string(shape_), " holds ",
                   shape_size(shape_), " elements but ", data_.size(), " were given");
    }
  }

  static BasicTensor vector(std::vector<T> values) {
    const std::size_t n = values.size();
    return BasicTensor(Shape{n}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) {
      detail::fail(ErrorCategory::shape, "tensor", "cannot reshape ", shape_string(shape_), " to ",
                   shape_string(shape));
    }
    shape_ = std::move(shape);
  }

  BasicTensor reshaped(Shape shape) const {
    BasicTensor t = *this;
    t.reshape(std::move(shape));
    return t;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_shape() const {
    for (std::size_t d : shape_) {
      if (d == 0) detail::fail(ErrorCategory::shape, "tensor", "zero-sized dimension in ", shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

/// Euclidean distance between two equal-length vectors, accumulated in double.
template <typename T>
double l2_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    detail::fail(ErrorCategory::shape, "tensor", "l2_distance length mismatch: ", a.size(), " vs ", b.size());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

template <typename T>
double l2_distance(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 1 || b.rank() != 1) {
    detail::fail(ErrorCategory::shape, "tensor", "l2_distance expects rank-1 tensors, got ",
                 shape_string(a.shape()), " and ", shape_string(b.shape()));
  }
  return l2_distance(a.span(), b.span());
}

}  // namespace scnn

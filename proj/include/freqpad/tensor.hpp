#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "freqpad/error.hpp"

namespace freqpad {

// NCHW extent. Vectors and scalars use trailing 1s.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) +
           "," + std::to_string(w) + ")";
  }
};

template <typename T>
using Grid = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using GridMap = Eigen::Map<Grid<T>>;
template <typename T>
using ConstGridMap = Eigen::Map<const Grid<T>>;

// Dense row-major NCHW tensor with value semantics.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T value = T(0)) : shape_(shape), data_(shape.numel(), value) {}

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  T* sample(int n) { return data_.data() + n * shape_.sample(); }
  const T* sample(int n) const { return data_.data() + n * shape_.sample(); }
  T* plane(int n, int c) { return sample(n) + c * shape_.plane(); }
  const T* plane(int n, int c) const { return sample(n) + c * shape_.plane(); }

  GridMap<T> plane_map(int n, int c) { return GridMap<T>(plane(n, c), shape_.h, shape_.w); }
  ConstGridMap<T> plane_map(int n, int c) const {
    return ConstGridMap<T>(plane(n, c), shape_.h, shape_.w);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
  void zero() { fill(T(0)); }

  // Same data, new extent with equal element count.
  Tensor reshaped(Shape shape) const {
    require(shape.numel() == shape_.numel(), "reshape " + shape_.str() + " -> " + shape.str());
    Tensor out = *this;
    out.shape_ = shape;
    return out;
  }

  Tensor& operator+=(const Tensor& other) {
    require(other.shape_ == shape_, "tensor add shape mismatch " + shape_.str() + " vs " +
                                        other.shape_.str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(T scale) {
    for (auto& v : data_) v *= scale;
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
  a += b;
  return a;
}

// Copies sample `index` of `batch` into a single-sample tensor.
template <typename T>
Tensor<T> slice_sample(const Tensor<T>& batch, int index) {
  Shape s = batch.shape();
  s.n = 1;
  Tensor<T> out(s);
  std::copy_n(batch.sample(index), s.sample(), out.data());
  return out;
}

// Concatenates single-or-multi-sample tensors along the batch axis.
template <typename T>
Tensor<T> stack_samples(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "stack_samples: no inputs");
  Shape s = parts.front().shape();
  int total = 0;
  for (const auto& p : parts) {
    require(p.c() == s.c && p.h() == s.h && p.w() == s.w, "stack_samples: shape mismatch");
    total += p.n();
  }
  s.n = total;
  Tensor<T> out(s);
  T* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
  return out;
}

}  // namespace freqpad

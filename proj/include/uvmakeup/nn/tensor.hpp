#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uvmakeup/core/error.hpp"

namespace uvmakeup::nn {

/// NCHW extent. Scalars are {1,1,1,1}.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  friend bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + "]";
  }
};

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.numel(), ErrorCategory::shape_mismatch,
            "tensor data does not match shape " + shape_.str());
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool defined() const noexcept { return !data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  T operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(int n, int c, int y, int x) noexcept { return data_[offset(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const noexcept { return data_[offset(n, c, y, x)]; }

  T* plane(int n, int c) noexcept { return data_.data() + offset(n, c, 0, 0); }
  const T* plane(int n, int c) const noexcept { return data_.data() + offset(n, c, 0, 0); }
  T* sample(int n) noexcept { return data_.data() + offset(n, 0, 0, 0); }
  const T* sample(int n) const noexcept { return data_.data() + offset(n, 0, 0, 0); }

  T item() const {
    require(data_.size() == 1, ErrorCategory::shape_mismatch, "item() on non-scalar tensor");
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  std::vector<T> data_;
};

}  // namespace uvmakeup::nn

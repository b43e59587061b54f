#pragma once

#include <Eigen/Core>

#include <cassert>
#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eenn/errors.hpp"

namespace eenn {

using Index = std::int64_t;

/// Count of multiply-accumulate operations. Additive: the cost of a layer
/// sequence is the sum of the per-layer counts.
struct MacCount {
  std::uint64_t value = 0;

  constexpr MacCount() = default;
  constexpr explicit MacCount(std::uint64_t v) : value(v) {}

  constexpr MacCount& operator+=(MacCount other) {
    value += other.value;
    return *this;
  }
  friend constexpr MacCount operator+(MacCount a, MacCount b) {
    return MacCount(a.value + b.value);
  }
  friend constexpr bool operator==(MacCount a, MacCount b) = default;
  friend constexpr auto operator<=>(MacCount a, MacCount b) = default;
};

/// Dense tensor with explicit shape and row-major flat storage (last
/// dimension fastest). Storage is an Eigen vector so elementwise math can be
/// written as Eigen expressions over `data()`.
template <typename Scalar_>
class TensorT {
 public:
  using Scalar = Scalar_;
  using Storage = Eigen::Vector<Scalar, Eigen::Dynamic>;

  TensorT() = default;

  /// Zero tensor of the given shape. All dims must be >= 1.
  explicit TensorT(std::vector<Index> shape) : shape_(std::move(shape)) {
    data_.setZero(checked_size(shape_));
  }

  TensorT(std::vector<Index> shape, Storage data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static TensorT constant(std::vector<Index> shape, Scalar v) {
    TensorT t(std::move(shape));
    t.data_.setConstant(t.data_.size(), v);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<Index>& shape() const { return shape_; }
  Index dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const { return data_.size(); }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }

  Scalar& operator()(Index i0) {
    assert(rank() == 1);
    return data_[i0];
  }
  Scalar operator()(Index i0) const {
    assert(rank() == 1);
    return data_[i0];
  }
  Scalar& operator()(Index i0, Index i1) {
    assert(rank() == 2);
    return data_[i0 * shape_[1] + i1];
  }
  Scalar operator()(Index i0, Index i1) const {
    assert(rank() == 2);
    return data_[i0 * shape_[1] + i1];
  }
  Scalar& operator()(Index i0, Index i1, Index i2) {
    assert(rank() == 3);
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
  }
  Scalar operator()(Index i0, Index i1, Index i2) const {
    assert(rank() == 3);
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
  }
  Scalar& operator()(Index i0, Index i1, Index i2, Index i3) {
    assert(rank() == 4);
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
  }
  Scalar operator()(Index i0, Index i1, Index i2, Index i3) const {
    assert(rank() == 4);
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
  }

  /// Same elements under a new shape (element counts must agree).
  TensorT reshaped(std::vector<Index> new_shape) const {
    TensorT t;
    t.shape_ = std::move(new_shape);
    if (checked_size(t.shape_) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                       shape_string(t.shape_));
    }
    t.data_ = data_;
    return t;
  }

  std::string shape_str() const { return shape_string(shape_); }

  static std::string shape_string(const std::vector<Index>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  friend bool operator==(const TensorT& a, const TensorT& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Index checked_size(const std::vector<Index>& shape) {
    if (shape.empty()) {
      throw ShapeError("tensor shape must have at least one dimension");
    }
    Index n = 1;
    for (Index d : shape) {
      if (d < 1) {
        throw ShapeError("tensor dimensions must be >= 1, got " +
                         shape_string(shape));
      }
      n *= d;
    }
    return n;
  }

  std::vector<Index> shape_;
  Storage data_;
};

using Tensor = TensorT<float>;

}  // namespace eenn

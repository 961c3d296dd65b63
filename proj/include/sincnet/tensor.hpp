#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sincnet/error.hpp"

namespace sincnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array of doubles, rank 1 to 3 in practice.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(shape_size(shape_) == data_.size(), ErrorKind::Shape,
            "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Contiguous slice along the leading axes, e.g. row(b) of [B,C,T] is C*T long.
  std::span<double> slice(std::size_t i) {
    const std::size_t stride = data_.size() / shape_[0];
    return {data_.data() + i * stride, stride};
  }
  std::span<const double> slice(std::size_t i) const {
    const std::size_t stride = data_.size() / shape_[0];
    return {data_.data() + i * stride, stride};
  }

  Tensor reshaped(Shape shape) const& {
    require(shape_size(shape) == data_.size(), ErrorKind::Shape,
            "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
  }
  Tensor reshaped(Shape shape) && {
    require(shape_size(shape) == data_.size(), ErrorKind::Shape,
            "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), std::move(data_));
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline void require_shape(const Tensor& t, const Shape& expected, const std::string& what) {
  require(t.shape() == expected, ErrorKind::Shape,
          what + ": expected shape " + shape_string(expected) + ", got " + shape_string(t.shape()));
}

inline void require_rank(const Tensor& t, std::size_t rank, const std::string& what) {
  require(t.rank() == rank, ErrorKind::Shape,
          what + ": expected rank " + std::to_string(rank) + ", got shape " + shape_string(t.shape()));
}

}  // namespace sincnet

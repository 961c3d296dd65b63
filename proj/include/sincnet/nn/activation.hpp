#pragma once

#include "sincnet/tensor.hpp"

namespace sincnet::nn {

inline constexpr double kDefaultLeakySlope = 0.2;

inline Tensor leaky_relu(const Tensor& x, double slope = kDefaultLeakySlope) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  return y;
}

/// The derivative at exactly 0 is taken to be the slope.
inline Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope = kDefaultLeakySlope) {
  require(x.shape() == grad_out.shape(), ErrorKind::Shape, "leaky_relu backward: shape mismatch");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? grad_out[i] : slope * grad_out[i];
  return dx;
}

}  // namespace sincnet::nn

#pragma once

#include <cstddef>
#include <vector>

#include "sincnet/tensor.hpp"

namespace sincnet::nn {

struct MaxPoolResult {
  Tensor output;                     // [B, C, T / pool]
  std::vector<std::size_t> argmax;   // flat input index per output element
};

/// Non-overlapping max pooling along time. The trailing remainder is dropped
/// and ties resolve to the earliest index.
inline MaxPoolResult max_pool1d(const Tensor& x, std::size_t pool) {
  require(pool >= 1, ErrorKind::InvalidSpec, "pool width must be at least 1");
  require_rank(x, 3, "max_pool1d input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), t_in = x.dim(2);
  const std::size_t t_out = t_in / pool;
  require(t_out >= 1, ErrorKind::Shape,
          "max_pool1d: input length " + std::to_string(t_in) + " shorter than pool " +
              std::to_string(pool));
  MaxPoolResult r{Tensor({batch, channels, t_out}), std::vector<std::size_t>(batch * channels * t_out)};
  for (std::size_t row = 0; row < batch * channels; ++row) {
    const std::size_t in_base = row * t_in;
    for (std::size_t t = 0; t < t_out; ++t) {
      std::size_t best = in_base + t * pool;
      for (std::size_t j = 1; j < pool; ++j) {
        const std::size_t idx = in_base + t * pool + j;
        if (x[idx] > x[best]) best = idx;
      }
      r.output[row * t_out + t] = x[best];
      r.argmax[row * t_out + t] = best;
    }
  }
  return r;
}

inline Tensor max_pool1d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                  const Tensor& grad_out) {
  require(grad_out.size() == argmax.size(), ErrorKind::Shape,
          "max_pool1d backward: upstream gradient size mismatch");
  Tensor dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += grad_out[i];
  return dx;
}

}  // namespace sincnet::nn

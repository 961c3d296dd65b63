#pragma once

#include <cmath>
#include <random>

#include "sincnet/nn/conv1d.hpp"
#include "sincnet/tensor.hpp"

namespace sincnet::nn {

/// y = x W^T + b with x [B, D_in], W [D_out, D_in], b [D_out].
inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "dense input");
  require_rank(w, 2, "dense weights");
  require(x.dim(1) == w.dim(1), ErrorKind::Shape,
          "dense: input width " + std::to_string(x.dim(1)) + " does not match weights " +
              shape_string(w.shape()));
  require(b.size() == w.dim(0), ErrorKind::Shape, "dense: bias length does not match output width");
  const std::size_t batch = x.dim(0), d_in = x.dim(1), d_out = w.dim(0);
  Tensor y({batch, d_out});
  for (std::size_t n = 0; n < batch; ++n) {
    const double* xr = x.data() + n * d_in;
    for (std::size_t o = 0; o < d_out; ++o) y.at(n, o) = b[o] + detail::dot(w.data() + o * d_in, xr, d_in);
  }
  return y;
}

struct DenseGrads {
  Tensor weights;
  Tensor bias;
  Tensor input;
};

inline DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out,
                                 bool need_input_grad = true) {
  const std::size_t batch = x.dim(0), d_in = x.dim(1), d_out = w.dim(0);
  require_shape(grad_out, {batch, d_out}, "dense upstream gradient");
  DenseGrads g{Tensor({d_out, d_in}), Tensor({d_out}), Tensor()};
  for (std::size_t n = 0; n < batch; ++n) {
    const double* xr = x.data() + n * d_in;
    for (std::size_t o = 0; o < d_out; ++o) {
      const double go = grad_out.at(n, o);
      g.bias[o] += go;
      detail::axpy(go, xr, g.weights.data() + o * d_in, d_in);
    }
  }
  if (need_input_grad) {
    g.input = Tensor({batch, d_in});
    for (std::size_t n = 0; n < batch; ++n) {
      double* dx = g.input.data() + n * d_in;
      for (std::size_t o = 0; o < d_out; ++o) detail::axpy(grad_out.at(n, o), w.data() + o * d_in, dx, d_in);
    }
  }
  return g;
}

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Fills t with U(-bound, bound), bound = sqrt(6 / (fan_in + fan_out)).
template <class Engine>
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Engine& rng) {
  const double bound = glorot_bound(fan_in, fan_out);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = dist(rng);
}

}  // namespace sincnet::nn

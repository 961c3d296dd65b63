#pragma once

// Valid-mode 1-D cross-correlation over [batch, channels, time] tensors and its
// adjoint. Forward and input-gradient kernels accumulate each output over the
// kernel in ascending order; weight gradients use fixed-order simd reductions.

#include <algorithm>
#include <cstddef>
#include <span>

#include "sincnet/tensor.hpp"

namespace sincnet::nn {

namespace detail {

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline constexpr std::size_t kTile = 16;

/// y[t] += sum_k w[k] x[t + k] for t < n, k ascending. Outputs are kept in
/// registers for a tile while the kernel is swept.
inline void correlate_add(const double* x, const double* w, std::size_t k_len, double* y, std::size_t n) {
  std::size_t t = 0;
  for (; t + kTile <= n; t += kTile) {
    double acc[kTile];
    for (std::size_t j = 0; j < kTile; ++j) acc[j] = y[t + j];
    for (std::size_t k = 0; k < k_len; ++k) {
      const double wk = w[k];
      const double* xp = x + t + k;
#pragma omp simd
      for (std::size_t j = 0; j < kTile; ++j) acc[j] += wk * xp[j];
    }
    for (std::size_t j = 0; j < kTile; ++j) y[t + j] = acc[j];
  }
  for (; t < n; ++t) {
    double acc = y[t];
    for (std::size_t k = 0; k < k_len; ++k) acc += w[k] * x[t + k];
    y[t] = acc;
  }
}

/// dx[s] += sum_k w[k] g[s - k] over the valid k, k ascending (full
/// convolution of g, length n_g, with the kernel).
inline void convolve_full_add(const double* g, std::size_t n_g, const double* w, std::size_t k_len, double* dx) {
  const std::size_t n_x = n_g + k_len - 1;
  const auto edge = [&](std::size_t s) {
    double acc = dx[s];
    const std::size_t k_lo = s >= n_g ? s - n_g + 1 : 0;
    const std::size_t k_hi = std::min(k_len - 1, s);
    for (std::size_t k = k_lo; k <= k_hi; ++k) acc += w[k] * g[s - k];
    dx[s] = acc;
  };
  std::size_t s = 0;
  for (; s < k_len - 1 && s < n_x; ++s) edge(s);
  // Interior: every k in range.
  for (; s + kTile <= n_g; s += kTile) {
    double acc[kTile];
    for (std::size_t j = 0; j < kTile; ++j) acc[j] = dx[s + j];
    for (std::size_t k = 0; k < k_len; ++k) {
      const double wk = w[k];
      const double* gp = g + s - k;
#pragma omp simd
      for (std::size_t j = 0; j < kTile; ++j) acc[j] += wk * gp[j];
    }
    for (std::size_t j = 0; j < kTile; ++j) dx[s + j] = acc[j];
  }
  for (; s < n_x; ++s) edge(s);
}

/// out[k] += sum_t g[t] x[t + k] for k < k_len, four lags per pass.
inline void lag_products_add(const double* g, const double* x, std::size_t n, std::size_t k_len, double* out) {
  std::size_t k = 0;
  for (; k + 4 <= k_len; k += 4) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    const double* xp = x + k;
#pragma omp simd reduction(+ : a0, a1, a2, a3)
    for (std::size_t t = 0; t < n; ++t) {
      a0 += g[t] * xp[t];
      a1 += g[t] * xp[t + 1];
      a2 += g[t] * xp[t + 2];
      a3 += g[t] * xp[t + 3];
    }
    out[k] += a0;
    out[k + 1] += a1;
    out[k + 2] += a2;
    out[k + 3] += a3;
  }
  for (; k < k_len; ++k) out[k] += dot(g, x + k, n);
}

}  // namespace detail

struct Conv1dGrads {
  Tensor weights;  // [C_out, C_in, K]
  Tensor bias;     // [C_out], empty if the layer has no bias
  Tensor input;    // [B, C_in, T], empty if not requested
};

inline void check_conv1d_shapes(const Tensor& x, const Tensor& w, std::span<const double> bias) {
  require_rank(x, 3, "conv1d input");
  require_rank(w, 3, "conv1d weights");
  require(x.dim(1) == w.dim(1), ErrorKind::Shape,
          "conv1d: input has " + std::to_string(x.dim(1)) + " channels, weights expect " +
              std::to_string(w.dim(1)));
  require(x.dim(2) >= w.dim(2), ErrorKind::Shape,
          "conv1d: input length " + std::to_string(x.dim(2)) + " shorter than kernel " +
              std::to_string(w.dim(2)));
  require(bias.empty() || bias.size() == w.dim(0), ErrorKind::Shape,
          "conv1d: bias length does not match output channels");
}

/// y[b, o, t] = bias[o] + sum_{i,k} w[o, i, k] * x[b, i, t + k]
inline Tensor conv1d(const Tensor& x, const Tensor& w, std::span<const double> bias = {}) {
  check_conv1d_shapes(x, w, bias);
  const std::size_t batch = x.dim(0), c_in = x.dim(1), t_in = x.dim(2);
  const std::size_t c_out = w.dim(0), k_len = w.dim(2);
  const std::size_t t_out = t_in - k_len + 1;
  Tensor y({batch, c_out, t_out});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double* yrow = y.data() + (b * c_out + o) * t_out;
      if (!bias.empty()) std::fill(yrow, yrow + t_out, bias[o]);
      for (std::size_t i = 0; i < c_in; ++i) {
        const double* xrow = x.data() + (b * c_in + i) * t_in;
        const double* wrow = w.data() + (o * c_in + i) * k_len;
        detail::correlate_add(xrow, wrow, k_len, yrow, t_out);
      }
    }
  }
  return y;
}

/// Gradient of the weights only: dw[o, i, k] = sum_{b,t} g[b, o, t] x[b, i, t + k].
inline Tensor conv1d_weight_grad(const Tensor& x, const Tensor& grad_out, std::size_t k_len) {
  const std::size_t batch = x.dim(0), c_in = x.dim(1), t_in = x.dim(2);
  const std::size_t c_out = grad_out.dim(1), t_out = grad_out.dim(2);
  require(t_out + k_len - 1 == t_in && grad_out.dim(0) == batch, ErrorKind::Shape,
          "conv1d backward: upstream gradient shape " + shape_string(grad_out.shape()) +
              " inconsistent with input " + shape_string(x.shape()));
  Tensor dw({c_out, c_in, k_len});
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t i = 0; i < c_in; ++i) {
      double* dwrow = dw.data() + (o * c_in + i) * k_len;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* grow = grad_out.data() + (b * c_out + o) * t_out;
        const double* xrow = x.data() + (b * c_in + i) * t_in;
        detail::lag_products_add(grow, xrow, t_out, k_len, dwrow);
      }
    }
  }
  return dw;
}

/// Adjoint of the correlation with respect to its input (a full convolution).
inline Tensor conv1d_input_grad(const Tensor& w, const Tensor& grad_out, std::size_t t_in) {
  const std::size_t batch = grad_out.dim(0), c_out = grad_out.dim(1), t_out = grad_out.dim(2);
  const std::size_t c_in = w.dim(1), k_len = w.dim(2);
  require(w.dim(0) == c_out && t_out + k_len - 1 == t_in, ErrorKind::Shape,
          "conv1d backward: upstream gradient shape " + shape_string(grad_out.shape()) +
              " inconsistent with weights " + shape_string(w.shape()));
  Tensor dx({batch, c_in, t_in});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < c_out; ++o) {
      const double* grow = grad_out.data() + (b * c_out + o) * t_out;
      for (std::size_t i = 0; i < c_in; ++i) {
        double* dxrow = dx.data() + (b * c_in + i) * t_in;
        const double* wrow = w.data() + (o * c_in + i) * k_len;
        detail::convolve_full_add(grow, t_out, wrow, k_len, dxrow);
      }
    }
  }
  return dx;
}

inline Conv1dGrads conv1d_backward(const Tensor& x, const Tensor& w, bool has_bias,
                                   const Tensor& grad_out, bool need_input_grad = true) {
  check_conv1d_shapes(x, w, {});
  require_shape(grad_out, {x.dim(0), w.dim(0), x.dim(2) - w.dim(2) + 1}, "conv1d upstream gradient");
  Conv1dGrads grads;
  grads.weights = conv1d_weight_grad(x, grad_out, w.dim(2));
  if (has_bias) {
    const std::size_t batch = grad_out.dim(0), c_out = grad_out.dim(1), t_out = grad_out.dim(2);
    grads.bias = Tensor({c_out});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < c_out; ++o) {
        const double* grow = grad_out.data() + (b * c_out + o) * t_out;
        double acc = 0.0;
        for (std::size_t t = 0; t < t_out; ++t) acc += grow[t];
        grads.bias[o] += acc;
      }
    }
  }
  if (need_input_grad) grads.input = conv1d_input_grad(w, grad_out, x.dim(2));
  return grads;
}

}  // namespace sincnet::nn

#pragma once

// Layer normalization (per sample, over every feature of the layer) and batch
// normalization (per feature, over the batch), each with a learnable
// per-feature gain and bias.

#include <cmath>
#include <cstddef>
#include <vector>

#include "sincnet/tensor.hpp"

namespace sincnet::nn {

inline constexpr double kNormEpsilon = 1e-5;

struct NormCache {
  Tensor normalized;             // x_hat, same shape as the input
  std::vector<double> inv_std;   // one per sample (layer norm) or per feature (batch norm)
};

struct NormGrads {
  Tensor input;
  Tensor gain;
  Tensor bias;
};

/// x is [B, ...]; every sample is normalized over its D = size/B features.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, NormCache* cache = nullptr,
                         double eps = kNormEpsilon) {
  require(x.rank() >= 2, ErrorKind::Shape, "layer_norm expects a batch axis");
  const std::size_t batch = x.dim(0);
  const std::size_t d = x.size() / batch;
  require(d >= 2, ErrorKind::Shape, "layer_norm needs at least 2 features per sample");
  require(gain.size() == d && bias.size() == d, ErrorKind::Shape,
          "layer_norm gain/bias must have " + std::to_string(d) + " features");
  Tensor y(x.shape());
  Tensor x_hat(x.shape());
  std::vector<double> inv_std(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xs = x.data() + b * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xs[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xs[i] - mean) * (xs[i] - mean);
    var /= static_cast<double>(d);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[b] = istd;
    double* xh = x_hat.data() + b * d;
    double* ys = y.data() + b * d;
    for (std::size_t i = 0; i < d; ++i) {
      xh[i] = (xs[i] - mean) * istd;
      ys[i] = gain[i] * xh[i] + bias[i];
    }
  }
  if (cache) *cache = {std::move(x_hat), std::move(inv_std)};
  return y;
}

inline NormGrads layer_norm_backward(const NormCache& cache, const Tensor& gain, const Tensor& grad_out) {
  const Tensor& x_hat = cache.normalized;
  require(grad_out.shape() == x_hat.shape(), ErrorKind::Shape, "layer_norm backward: shape mismatch");
  const std::size_t batch = x_hat.dim(0);
  const std::size_t d = x_hat.size() / batch;
  NormGrads g{Tensor(x_hat.shape()), Tensor({d}), Tensor({d})};
  std::vector<double> dxh(d);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* gs = grad_out.data() + b * d;
    const double* xh = x_hat.data() + b * d;
    double mean_dxh = 0.0;
    double mean_dxh_xh = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      g.gain[i] += gs[i] * xh[i];
      g.bias[i] += gs[i];
      dxh[i] = gs[i] * gain[i];
      mean_dxh += dxh[i];
      mean_dxh_xh += dxh[i] * xh[i];
    }
    mean_dxh /= static_cast<double>(d);
    mean_dxh_xh /= static_cast<double>(d);
    double* dx = g.input.data() + b * d;
    for (std::size_t i = 0; i < d; ++i) {
      dx[i] = cache.inv_std[b] * (dxh[i] - mean_dxh - xh[i] * mean_dxh_xh);
    }
  }
  return g;
}

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = kNormEpsilon;

  explicit BatchNormState(std::size_t features = 0)
      : running_mean({features}, 0.0), running_var({features}, 1.0) {}
};

/// x is [B, D]. Training mode uses batch statistics and updates the running
/// averages (unbiased variance); inference uses the running averages.
inline Tensor batch_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, BatchNormState& state,
                         bool training, NormCache* cache = nullptr) {
  require_rank(x, 2, "batch_norm input");
  const std::size_t batch = x.dim(0), d = x.dim(1);
  require(gain.size() == d && bias.size() == d && state.running_mean.size() == d, ErrorKind::Shape,
          "batch_norm parameters must have " + std::to_string(d) + " features");
  Tensor y(x.shape());
  Tensor x_hat(x.shape());
  std::vector<double> inv_std(d);
  if (training) {
    require(batch >= 2, ErrorKind::InvalidBatch, "batch_norm in training mode needs a batch of at least 2");
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(b, j);
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = x.at(b, j) - mean[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double biased = var[j] / static_cast<double>(batch);
      const double unbiased = var[j] / static_cast<double>(batch - 1);
      inv_std[j] = 1.0 / std::sqrt(biased + state.eps);
      state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mean[j];
      state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * unbiased;
    }
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) x_hat.at(b, j) = (x.at(b, j) - mean[j]) * inv_std[j];
  } else {
    for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + state.eps);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j)
        x_hat.at(b, j) = (x.at(b, j) - state.running_mean[j]) * inv_std[j];
  }
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < d; ++j) y.at(b, j) = gain[j] * x_hat.at(b, j) + bias[j];
  if (cache) *cache = {std::move(x_hat), std::move(inv_std)};
  return y;
}

/// Backward of training-mode batch norm.
inline NormGrads batch_norm_backward(const NormCache& cache, const Tensor& gain, const Tensor& grad_out) {
  const Tensor& x_hat = cache.normalized;
  require(grad_out.shape() == x_hat.shape(), ErrorKind::Shape, "batch_norm backward: shape mismatch");
  const std::size_t batch = x_hat.dim(0), d = x_hat.dim(1);
  NormGrads g{Tensor(x_hat.shape()), Tensor({d}), Tensor({d})};
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < d; ++j) {
      g.bias[j] += grad_out.at(b, j);
      g.gain[j] += grad_out.at(b, j) * x_hat.at(b, j);
    }
  const double n = static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < d; ++j) {
      const double dxh = grad_out.at(b, j) * gain[j];
      g.input.at(b, j) = cache.inv_std[j] / n * (n * dxh - gain[j] * g.bias[j] - x_hat.at(b, j) * gain[j] * g.gain[j]);
    }
  return g;
}

}  // namespace sincnet::nn

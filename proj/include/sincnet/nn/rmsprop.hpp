#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sincnet/tensor.hpp"

namespace sincnet::nn {

struct RmspropSettings {
  double lr = 0.001;
  double alpha = 0.95;
  double eps = 1e-7;
};

/// Running mean of squared gradients, one accumulator per parameter tensor.
struct OptimizerState {
  RmspropSettings settings;
  std::vector<Tensor> square_avg;
  std::size_t steps = 0;
};

/// v <- alpha v + (1 - alpha) g^2 ;  theta <- theta - lr g / (sqrt(v) + eps)
inline void rmsprop_update(Tensor& param, const Tensor& grad, Tensor& square_avg, const RmspropSettings& s) {
  require(param.shape() == grad.shape(), ErrorKind::Shape,
          "rmsprop: gradient shape " + shape_string(grad.shape()) + " does not match parameter " +
              shape_string(param.shape()));
  if (square_avg.shape() != param.shape()) square_avg = Tensor(param.shape());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    square_avg[i] = s.alpha * square_avg[i] + (1.0 - s.alpha) * g * g;
    param[i] -= s.lr * g / (std::sqrt(square_avg[i]) + s.eps);
  }
}

inline void rmsprop_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
                         OptimizerState& state) {
  require(params.size() == grads.size(), ErrorKind::Shape, "rmsprop: parameter/gradient count mismatch");
  if (state.square_avg.size() != params.size()) {
    require(state.square_avg.empty(), ErrorKind::Shape, "rmsprop: optimizer state has the wrong arity");
    state.square_avg.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) state.square_avg[i] = Tensor(params[i]->shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    rmsprop_update(*params[i], *grads[i], state.square_avg[i], state.settings);
  }
  ++state.steps;
}

}  // namespace sincnet::nn

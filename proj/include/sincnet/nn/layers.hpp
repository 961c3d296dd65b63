#pragma once

// Stateful layer wrappers around the functional kernels. A layer caches what
// its backward needs only during training-mode forward calls.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sincnet/nn/activation.hpp"
#include "sincnet/nn/conv1d.hpp"
#include "sincnet/nn/dense.hpp"
#include "sincnet/nn/normalization.hpp"
#include "sincnet/nn/pooling.hpp"
#include "sincnet/sinc_layer.hpp"

namespace sincnet::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  /// Non-trainable state that still belongs in a checkpoint.
  virtual std::vector<std::pair<std::string, Tensor*>> buffers() { return {}; }

  /// Cleared on the first layer whose input is not itself trainable.
  bool need_input_grad = true;
};

class SincConv : public Layer {
 public:
  SincConv(std::vector<RawCutoffs> init, FilterSpec spec) : spec_(spec) {
    spec_.validate();
    cutoffs_.name = "cutoffs";
    cutoffs_.value = Tensor({init.size(), 2});
    for (std::size_t f = 0; f < init.size(); ++f) {
      cutoffs_.value.at(f, 0) = init[f].f1;
      cutoffs_.value.at(f, 1) = init[f].f2;
    }
    cutoffs_.grad = Tensor(cutoffs_.value.shape());
  }

  std::string kind() const override { return "sinc_conv"; }

  sinc_layer::SincLayerParams params() const {
    sinc_layer::SincLayerParams p{std::vector<RawCutoffs>(cutoffs_.value.dim(0)), spec_};
    for (std::size_t f = 0; f < p.raw_cutoffs.size(); ++f) {
      p.raw_cutoffs[f] = {cutoffs_.value.at(f, 0), cutoffs_.value.at(f, 1)};
    }
    return p;
  }

  Tensor forward(const Tensor& x, bool training) override {
    const auto p = params();
    require(x.rank() == 3 && x.dim(1) == 1 && x.dim(2) >= spec_.length, ErrorKind::Shape,
            "sinc layer input shape " + shape_string(x.shape()) + " invalid");
    Tensor weights = sinc_layer::bank_as_weights(sinc_layer::materialize(p));
    Tensor y = conv1d(x, weights);
    if (training) {
      input_ = x;
      weights_ = std::move(weights);
    }
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    const auto p = params();
    const Tensor tap_grad = conv1d_weight_grad(input_, grad_out, spec_.length);
    cutoffs_.grad = sinc_layer::cutoff_grad_from_tap_grad(p, tap_grad);
    if (!need_input_grad) return {};
    return conv1d_input_grad(weights_, grad_out, input_.dim(2));
  }

  std::vector<Parameter*> parameters() override { return {&cutoffs_}; }
  const FilterSpec& spec() const { return spec_; }

 private:
  FilterSpec spec_;
  Parameter cutoffs_;
  Tensor input_;
  Tensor weights_;
};

class Conv1d : public Layer {
 public:
  template <class Engine>
  Conv1d(std::size_t c_in, std::size_t c_out, std::size_t kernel, bool with_bias, Engine& rng) {
    weights_ = {"weights", Tensor({c_out, c_in, kernel}), Tensor({c_out, c_in, kernel})};
    glorot_uniform(weights_.value, c_in * kernel, c_out * kernel, rng);
    if (with_bias) bias_ = {"bias", Tensor({c_out}), Tensor({c_out})};
  }

  std::string kind() const override { return "conv1d"; }

  Tensor forward(const Tensor& x, bool training) override {
    Tensor y = conv1d(x, weights_.value, bias_.value.values());
    if (training) input_ = x;
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    auto g = conv1d_backward(input_, weights_.value, has_bias(), grad_out, need_input_grad);
    weights_.grad = std::move(g.weights);
    if (has_bias()) bias_.grad = std::move(g.bias);
    return std::move(g.input);
  }

  std::vector<Parameter*> parameters() override {
    if (has_bias()) return {&weights_, &bias_};
    return {&weights_};
  }

  bool has_bias() const { return !bias_.value.empty(); }
  const Tensor& weights() const { return weights_.value; }

 private:
  Parameter weights_;
  Parameter bias_;
  Tensor input_;
};

class MaxPool : public Layer {
 public:
  explicit MaxPool(std::size_t pool) : pool_(pool) {
    require(pool >= 1, ErrorKind::InvalidSpec, "pool width must be at least 1");
  }
  std::string kind() const override { return "max_pool"; }

  Tensor forward(const Tensor& x, bool training) override {
    auto r = max_pool1d(x, pool_);
    if (training) {
      input_shape_ = x.shape();
      argmax_ = std::move(r.argmax);
    }
    return std::move(r.output);
  }

  Tensor backward(const Tensor& grad_out) override {
    return max_pool1d_backward(input_shape_, argmax_, grad_out);
  }

 private:
  std::size_t pool_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

class LayerNorm : public Layer {
 public:
  explicit LayerNorm(const Shape& feature_shape) {
    const std::size_t d = shape_size(feature_shape);
    gain_ = {"gain", Tensor({d}, 1.0), Tensor({d})};
    bias_ = {"bias", Tensor({d}), Tensor({d})};
  }
  std::string kind() const override { return "layer_norm"; }

  Tensor forward(const Tensor& x, bool training) override {
    return layer_norm(x, gain_.value, bias_.value, training ? &cache_ : nullptr);
  }

  Tensor backward(const Tensor& grad_out) override {
    auto g = layer_norm_backward(cache_, gain_.value, grad_out);
    gain_.grad = std::move(g.gain);
    bias_.grad = std::move(g.bias);
    return std::move(g.input);
  }

  std::vector<Parameter*> parameters() override { return {&gain_, &bias_}; }

 private:
  Parameter gain_;
  Parameter bias_;
  NormCache cache_;
};

class BatchNorm : public Layer {
 public:
  explicit BatchNorm(std::size_t features, double momentum = 0.1) : state_(features) {
    state_.momentum = momentum;
    gain_ = {"gain", Tensor({features}, 1.0), Tensor({features})};
    bias_ = {"bias", Tensor({features}), Tensor({features})};
  }
  std::string kind() const override { return "batch_norm"; }

  Tensor forward(const Tensor& x, bool training) override {
    return batch_norm(x, gain_.value, bias_.value, state_, training, training ? &cache_ : nullptr);
  }

  Tensor backward(const Tensor& grad_out) override {
    auto g = batch_norm_backward(cache_, gain_.value, grad_out);
    gain_.grad = std::move(g.gain);
    bias_.grad = std::move(g.bias);
    return std::move(g.input);
  }

  std::vector<Parameter*> parameters() override { return {&gain_, &bias_}; }
  std::vector<std::pair<std::string, Tensor*>> buffers() override {
    return {{"running_mean", &state_.running_mean}, {"running_var", &state_.running_var}};
  }

 private:
  Parameter gain_;
  Parameter bias_;
  BatchNormState state_;
  NormCache cache_;
};

class LeakyRelu : public Layer {
 public:
  explicit LeakyRelu(double slope) : slope_(slope) {}
  std::string kind() const override { return "leaky_relu"; }

  Tensor forward(const Tensor& x, bool training) override {
    if (training) input_ = x;
    return leaky_relu(x, slope_);
  }
  Tensor backward(const Tensor& grad_out) override { return leaky_relu_backward(input_, grad_out, slope_); }

 private:
  double slope_;
  Tensor input_;
};

class Flatten : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, bool training) override {
    if (training) input_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }
  Tensor backward(const Tensor& grad_out) override { return grad_out.reshaped(input_shape_); }

 private:
  Shape input_shape_;
};

class Dense : public Layer {
 public:
  template <class Engine>
  Dense(std::size_t d_in, std::size_t d_out, Engine& rng) {
    weights_ = {"weights", Tensor({d_out, d_in}), Tensor({d_out, d_in})};
    bias_ = {"bias", Tensor({d_out}), Tensor({d_out})};
    glorot_uniform(weights_.value, d_in, d_out, rng);
  }
  std::string kind() const override { return "dense"; }

  Tensor forward(const Tensor& x, bool training) override {
    if (training) input_ = x;
    return dense(x, weights_.value, bias_.value);
  }

  Tensor backward(const Tensor& grad_out) override {
    auto g = dense_backward(input_, weights_.value, grad_out, need_input_grad);
    weights_.grad = std::move(g.weights);
    bias_.grad = std::move(g.bias);
    return std::move(g.input);
  }

  std::vector<Parameter*> parameters() override { return {&weights_, &bias_}; }

 private:
  Parameter weights_;
  Parameter bias_;
  Tensor input_;
};

/// Inverted dropout; the mask stream is reseeded by the network every step.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    require(rate >= 0.0 && rate < 1.0, ErrorKind::InvalidSpec, "dropout rate must be in [0, 1)");
  }
  std::string kind() const override { return "dropout"; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

  Tensor forward(const Tensor& x, bool training) override {
    if (!training || rate_ == 0.0) {
      mask_ = Tensor();
      return x;
    }
    mask_ = Tensor(x.shape());
    std::bernoulli_distribution keep(1.0 - rate_);
    const double scale = 1.0 / (1.0 - rate_);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = keep(rng_) ? scale : 0.0;
      y[i] = x[i] * mask_[i];
    }
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    if (mask_.empty()) return grad_out;
    Tensor dx(grad_out.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * mask_[i];
    return dx;
  }

 private:
  double rate_;
  std::mt19937_64 rng_;
  Tensor mask_;
};

}  // namespace sincnet::nn

#pragma once

// Full classifier: input layer norm, first-layer filterbank (sinc or learned
// taps), conv blocks, dense blocks with batch norm, softmax classifier.

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sincnet/json_util.hpp"
#include "sincnet/nn/layers.hpp"
#include "sincnet/nn/loss.hpp"
#include "sincnet/nn/rmsprop.hpp"

namespace sincnet::nn {

enum class FrontendKind { Sinc, Conv };

inline std::string to_string(FrontendKind k) { return k == FrontendKind::Sinc ? "sinc" : "conv"; }

inline FrontendKind frontend_from_string(const std::string& s) {
  if (s == "sinc") return FrontendKind::Sinc;
  if (s == "conv") return FrontendKind::Conv;
  fail(ErrorKind::Config, "unknown frontend '" + s + "' (expected sinc|conv)");
}

struct ConvBlockConfig {
  std::size_t filters = 60;
  std::size_t kernel = 5;
  std::size_t pool = 3;

  friend bool operator==(const ConvBlockConfig&, const ConvBlockConfig&) = default;
};

struct NetworkConfig {
  FrontendKind frontend = FrontendKind::Sinc;
  std::size_t frontend_filters = 80;
  std::size_t frontend_length = 251;
  WindowKind window = WindowKind::Hamming;
  std::size_t frontend_pool = 3;
  std::vector<ConvBlockConfig> conv_blocks{{60, 5, 3}, {60, 5, 3}};
  std::vector<std::size_t> fc_layers{2048, 2048, 2048};
  double leaky_slope = kDefaultLeakySlope;
  double dropout = 0.0;
  bool input_layer_norm = true;
  double batchnorm_momentum = 0.1;

  double sample_rate = 16000.0;
  double chunk_ms = 200.0;
  double overlap_ms = 10.0;
  std::size_t hop_samples = 0;  // 0: derived from chunk_ms - overlap_ms

  std::size_t n_classes = 0;
  RmspropSettings optimizer;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;

  std::size_t chunk_samples() const {
    return static_cast<std::size_t>(std::llround(chunk_ms / 1000.0 * sample_rate));
  }
  std::size_t hop() const {
    if (hop_samples > 0) return hop_samples;
    return chunk_samples() - static_cast<std::size_t>(std::llround(overlap_ms / 1000.0 * sample_rate));
  }

  FilterSpec filter_spec() const { return {frontend_length, window, sample_rate}; }

  void validate() const {
    filter_spec().validate();
    require(frontend_filters >= 1, ErrorKind::Config, "frontend_filters must be at least 1");
    require(chunk_samples() >= frontend_length, ErrorKind::Config,
            "chunk of " + std::to_string(chunk_samples()) + " samples is shorter than frontend_length");
    require(overlap_ms >= 0.0 && overlap_ms < chunk_ms, ErrorKind::Config, "overlap_ms must be in [0, chunk_ms)");
    require(batch_size >= 2, ErrorKind::Config, "batch_size must be at least 2 (batch norm)");
    require(leaky_slope >= 0.0, ErrorKind::Config, "leaky_slope must be non-negative");
    require(optimizer.lr > 0.0 && optimizer.alpha >= 0.0 && optimizer.alpha < 1.0 && optimizer.eps > 0.0,
            ErrorKind::Config, "optimizer settings out of range");
  }

  json to_json() const {
    json blocks = json::array();
    for (const auto& b : conv_blocks) blocks.push_back({{"filters", b.filters}, {"kernel", b.kernel}, {"pool", b.pool}});
    return {
        {"frontend", to_string(frontend)},
        {"frontend_filters", frontend_filters},
        {"frontend_length", frontend_length},
        {"window", sincnet::to_string(window)},
        {"frontend_pool", frontend_pool},
        {"conv_blocks", blocks},
        {"fc_layers", fc_layers},
        {"leaky_slope", leaky_slope},
        {"dropout", dropout},
        {"input_layer_norm", input_layer_norm},
        {"batchnorm_momentum", batchnorm_momentum},
        {"sample_rate", sample_rate},
        {"chunk_ms", chunk_ms},
        {"overlap_ms", overlap_ms},
        {"hop_samples", hop_samples},
        {"n_classes", n_classes},
        {"optimizer", {{"lr", optimizer.lr}, {"alpha", optimizer.alpha}, {"eps", optimizer.eps}}},
        {"batch_size", batch_size},
        {"seed", seed},
    };
  }

  static NetworkConfig from_json(const json& j, const std::string& path = "network") {
    NetworkConfig c;
    StrictObject o(j, path);
    std::string frontend = to_string(c.frontend);
    std::string window = sincnet::to_string(c.window);
    o.read("frontend", frontend);
    o.read("frontend_filters", c.frontend_filters);
    o.read("frontend_length", c.frontend_length);
    o.read("window", window);
    o.read("frontend_pool", c.frontend_pool);
    if (o.has("conv_blocks")) {
      const json& arr = o.raw("conv_blocks");
      require(arr.is_array(), ErrorKind::Config, o.field("conv_blocks") + ": expected an array");
      c.conv_blocks.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        StrictObject b(arr[i], o.field("conv_blocks") + "[" + std::to_string(i) + "]");
        ConvBlockConfig block;
        b.read("filters", block.filters);
        b.read("kernel", block.kernel);
        b.read("pool", block.pool);
        b.finish();
        c.conv_blocks.push_back(block);
      }
    }
    o.read("fc_layers", c.fc_layers);
    o.read("leaky_slope", c.leaky_slope);
    o.read("dropout", c.dropout);
    o.read("input_layer_norm", c.input_layer_norm);
    o.read("batchnorm_momentum", c.batchnorm_momentum);
    o.read("sample_rate", c.sample_rate);
    o.read("chunk_ms", c.chunk_ms);
    o.read("overlap_ms", c.overlap_ms);
    o.read("hop_samples", c.hop_samples);
    o.read("n_classes", c.n_classes);
    if (o.has("optimizer")) {
      StrictObject opt(o.raw("optimizer"), o.field("optimizer"));
      opt.read("lr", c.optimizer.lr);
      opt.read("alpha", c.optimizer.alpha);
      opt.read("eps", c.optimizer.eps);
      opt.finish();
    }
    o.read("batch_size", c.batch_size);
    o.read("seed", c.seed);
    o.finish();
    c.frontend = frontend_from_string(frontend);
    try {
      c.window = window_from_string(window);
    } catch (const Error& e) {
      fail(ErrorKind::Config, o.field("window") + ": " + e.what());
    }
    return c;
  }
};

/// Learnable parameter count of the first layer alone: 2F for sinc, F*L for
/// learned taps (no bias).
inline std::size_t first_layer_parameter_count(FrontendKind kind, std::size_t filters, std::size_t length) {
  return kind == FrontendKind::Sinc ? 2 * filters : filters * length;
}

class Network {
 public:
  explicit Network(NetworkConfig config) : config_(std::move(config)) {
    config_.validate();
    require(config_.n_classes >= 2, ErrorKind::Config, "network needs at least 2 output classes");
    build();
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const NetworkConfig& config() const { return config_; }
  std::size_t input_length() const { return config_.chunk_samples(); }

  /// x is [B, 1, T]; returns logits [B, n_classes].
  Tensor forward(const Tensor& x, bool training) {
    check_input(x);
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h, training);
    return h;
  }

  /// Like forward, but keeps every intermediate activation (diagnostics).
  std::vector<Tensor> forward_trace(const Tensor& x, bool training) {
    check_input(x);
    std::vector<Tensor> out;
    out.reserve(layers_.size() + 1);
    out.push_back(x);
    for (auto& layer : layers_) out.push_back(layer->forward(out.back(), training));
    return out;
  }

  /// Must follow a training-mode forward. Fills every parameter gradient.
  void backward(const Tensor& grad_logits) {
    Tensor g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      g = (*it)->backward(g);
      if (!(*it)->need_input_grad) break;
    }
  }

  /// Last hidden activations (post-activation output of the final dense
  /// block), inference mode: [B, width].
  Tensor embed(const Tensor& x) {
    check_input(x);
    Tensor h = x;
    for (std::size_t i = 0; i < embedding_end_; ++i) h = layers_[i]->forward(h, false);
    return h.reshaped({h.dim(0), h.size() / h.dim(0)});
  }

  std::size_t embedding_width() const { return embedding_width_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_)
      for (auto* p : layer->parameters()) out.push_back(p);
    return out;
  }

  /// Every tensor a checkpoint must carry, with stable names.
  std::vector<std::pair<std::string, Tensor*>> state_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string prefix = "L" + std::to_string(i) + "." + layers_[i]->kind() + ".";
      for (auto* p : layers_[i]->parameters()) out.emplace_back(prefix + p->name, &p->value);
      for (auto& [name, t] : layers_[i]->buffers()) out.emplace_back(prefix + name, t);
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

  std::size_t first_layer_parameter_count() {
    std::size_t n = 0;
    for (auto* p : frontend_->parameters()) n += p->value.size();
    return n;
  }

  bool is_sinc() const { return config_.frontend == FrontendKind::Sinc; }

  /// Only valid for the sinc frontend.
  sinc_layer::SincLayerParams sinc_params() const {
    require(is_sinc(), ErrorKind::InvalidInput, "network does not have a sinc frontend");
    return static_cast<const SincConv*>(frontend_)->params();
  }

  /// The first-layer filters as a bank (cutoffs present for sinc only).
  FilterBank frontend_bank() const {
    if (is_sinc()) return sinc_layer::materialize(sinc_params());
    const Tensor& w = static_cast<const Conv1d*>(frontend_)->weights();
    FilterBank bank;
    bank.n_filters = w.dim(0);
    bank.length = w.dim(2);
    bank.taps = w.storage();
    return bank;
  }

  /// Dropout masks depend on (seed, step) only.
  void set_step(std::uint64_t step) {
    for (auto* d : dropouts_) {
      std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                        static_cast<std::uint32_t>(step), 0xd50u};
      std::mt19937_64 mix(seq);
      d->reseed(mix());
    }
  }

 private:
  void check_input(const Tensor& x) const {
    require(x.rank() == 3 && x.dim(1) == 1 && x.dim(2) == input_length(), ErrorKind::Shape,
            "network input must be [B, 1, " + std::to_string(input_length()) + "], got " +
                shape_string(x.shape()));
  }

  void build() {
    std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32), 0x1417u};
    std::mt19937_64 rng(seq);

    std::size_t channels = 1;
    std::size_t length = input_length();
    if (config_.input_layer_norm) add(std::make_unique<LayerNorm>(Shape{1, length}));

    const auto spec = config_.filter_spec();
    if (config_.frontend == FrontendKind::Sinc) {
      add(std::make_unique<SincConv>(mel_init_cutoffs(config_.frontend_filters, config_.sample_rate), spec));
    } else {
      add(std::make_unique<Conv1d>(1, config_.frontend_filters, config_.frontend_length, false, rng));
    }
    frontend_ = layers_.back().get();
    layers_.front()->need_input_grad = false;
    channels = config_.frontend_filters;
    length = length - config_.frontend_length + 1;
    add_conv_tail(channels, length, config_.frontend_pool);

    for (const auto& block : config_.conv_blocks) {
      require(length >= block.kernel, ErrorKind::Config, "conv block kernel longer than its input");
      add(std::make_unique<Conv1d>(channels, block.filters, block.kernel, true, rng));
      channels = block.filters;
      length = length - block.kernel + 1;
      add_conv_tail(channels, length, block.pool);
    }

    add(std::make_unique<Flatten>());
    std::size_t width = channels * length;
    for (std::size_t units : config_.fc_layers) {
      add(std::make_unique<Dense>(width, units, rng));
      add(std::make_unique<BatchNorm>(units, config_.batchnorm_momentum));
      add(std::make_unique<LeakyRelu>(config_.leaky_slope));
      if (config_.dropout > 0.0) {
        auto d = std::make_unique<Dropout>(config_.dropout);
        dropouts_.push_back(d.get());
        add(std::move(d));
      }
      width = units;
    }
    embedding_end_ = layers_.size();
    embedding_width_ = width;
    add(std::make_unique<Dense>(width, config_.n_classes, rng));
  }

  void add_conv_tail(std::size_t channels, std::size_t& length, std::size_t pool) {
    require(pool >= 1 && length / pool >= 1, ErrorKind::Config, "pooling leaves no samples");
    if (pool > 1) add(std::make_unique<MaxPool>(pool));
    length /= pool;
    add(std::make_unique<LayerNorm>(Shape{channels, length}));
    add(std::make_unique<LeakyRelu>(config_.leaky_slope));
  }

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  NetworkConfig config_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Layer* frontend_ = nullptr;
  std::vector<Dropout*> dropouts_;
  std::size_t embedding_end_ = 0;
  std::size_t embedding_width_ = 0;
};

}  // namespace sincnet::nn

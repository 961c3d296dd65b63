#pragma once

// Learnable band-pass front-end. The only trainable values are two cutoffs
// per filter; taps are rebuilt from them on every call, and gradients flow
// back to the cutoffs through every tap.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "sincnet/filter_core.hpp"
#include "sincnet/nn/conv1d.hpp"
#include "sincnet/tensor.hpp"

namespace sincnet::sinc_layer {

struct SincLayerParams {
  std::vector<RawCutoffs> raw_cutoffs;
  FilterSpec spec;

  std::size_t n_filters() const { return raw_cutoffs.size(); }

  /// Two per filter, independent of the filter length.
  std::size_t parameter_count() const { return 2 * raw_cutoffs.size(); }

  static SincLayerParams mel_initialized(std::size_t n_filters, const FilterSpec& spec) {
    spec.validate();
    return {mel_init_cutoffs(n_filters, spec.sample_rate), spec};
  }
};

/// Sign with sign(0) = 0, used as the subgradient of |x| at the kink.
inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Builds the windowed taps. Only offsets 0..c are evaluated; the left half is
/// a mirror copy, so every row is exactly symmetric about its center.
inline FilterBank materialize(const SincLayerParams& params) {
  params.spec.validate();
  require(!params.raw_cutoffs.empty(), ErrorKind::InvalidSpec, "sinc layer has no filters");
  const std::size_t length = params.spec.length;
  const std::size_t c = params.spec.center();
  const auto window = make_window(params.spec.window, length);

  FilterBank bank;
  bank.n_filters = params.n_filters();
  bank.length = length;
  bank.taps.resize(bank.n_filters * length);
  bank.cutoffs.reserve(bank.n_filters);
  for (std::size_t f = 0; f < bank.n_filters; ++f) {
    const ConstrainedCutoffs cut = constrain_cutoffs(params.raw_cutoffs[f]);
    bank.cutoffs.push_back(cut);
    auto row = bank.row(f);
    for (std::size_t k = 0; k <= c; ++k) {
      const double tap = bandpass_tap(cut, static_cast<double>(k)) * window[c + k];
      row[c + k] = tap;
      row[c - k] = tap;
    }
  }
  return bank;
}

inline Tensor bank_as_weights(const FilterBank& bank) {
  return Tensor({bank.n_filters, 1, bank.length}, bank.taps);
}

/// Valid-mode correlation of a [B, 1, T] batch with every filter: [B, F, T-L+1].
inline Tensor forward(const Tensor& x, const SincLayerParams& params) {
  require_rank(x, 3, "sinc layer input");
  require(x.dim(1) == 1, ErrorKind::Shape, "sinc layer expects a single input channel");
  require(x.dim(2) >= params.spec.length, ErrorKind::Shape,
          "sinc layer input length " + std::to_string(x.dim(2)) + " shorter than filter length " +
              std::to_string(params.spec.length));
  return nn::conv1d(x, bank_as_weights(materialize(params)));
}

struct SincGradients {
  Tensor raw_cutoffs;  // [F, 2]: d/d f1, d/d f2
  Tensor input;        // [B, 1, T], empty if not requested
};

/// Chains d loss / d taps ([F, 1, L] or [F, L]) through the windowed tap
/// sensitivities and the constraint Jacobian.
inline Tensor cutoff_grad_from_tap_grad(const SincLayerParams& params, const Tensor& tap_grad) {
  const std::size_t n_filters = params.n_filters();
  const std::size_t length = params.spec.length;
  require(tap_grad.size() == n_filters * length, ErrorKind::Shape,
          "tap gradient has " + std::to_string(tap_grad.size()) + " values, expected " +
              std::to_string(n_filters * length));
  const std::size_t c = params.spec.center();
  const auto window = make_window(params.spec.window, length);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  Tensor grad({n_filters, 2});
  for (std::size_t f = 0; f < n_filters; ++f) {
    const RawCutoffs raw = params.raw_cutoffs[f];
    const ConstrainedCutoffs cut = constrain_cutoffs(raw);
    const double* dg = tap_grad.data() + f * length;

    // d loss / d f*_abs, pairing the mirrored taps that share one offset.
    double d_f1_abs = 0.0;
    double d_f2_abs = 0.0;
    for (std::size_t k = 0; k <= c; ++k) {
      const double n = static_cast<double>(k);
      const double paired = k == 0 ? dg[c] : dg[c + k] + dg[c - k];
      const double w = window[c + k];
      d_f2_abs += paired * 2.0 * std::cos(two_pi * cut.f2_abs * n) * w;
      d_f1_abs -= paired * 2.0 * std::cos(two_pi * cut.f1_abs * n) * w;
    }

    const double s1 = sign(raw.f1);
    const double s21 = sign(raw.f2 - cut.f1_abs);
    grad.at(f, 0) = d_f1_abs * s1 + d_f2_abs * s1 * (1.0 - s21);
    grad.at(f, 1) = d_f2_abs * s21;
  }
  return grad;
}

inline SincGradients backward(const Tensor& x, const SincLayerParams& params, const Tensor& upstream,
                              bool need_input_grad = true) {
  require_rank(x, 3, "sinc layer input");
  require(x.dim(1) == 1 && x.dim(2) >= params.spec.length, ErrorKind::Shape,
          "sinc layer input shape " + shape_string(x.shape()) + " invalid");
  require_shape(upstream, {x.dim(0), params.n_filters(), x.dim(2) - params.spec.length + 1},
                "sinc layer upstream gradient");
  SincGradients out;
  const Tensor tap_grad = nn::conv1d_weight_grad(x, upstream, params.spec.length);
  out.raw_cutoffs = cutoff_grad_from_tap_grad(params, tap_grad);
  if (need_input_grad) {
    out.input = nn::conv1d_input_grad(bank_as_weights(materialize(params)), upstream, x.dim(2));
  }
  return out;
}

/// Filters whose upper cutoff has drifted past Nyquist (diagnostic only).
inline std::vector<std::size_t> nyquist_violations(const SincLayerParams& params) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < params.n_filters(); ++f) {
    if (constrain_cutoffs(params.raw_cutoffs[f]).f2_abs > 0.5) out.push_back(f);
  }
  return out;
}

}  // namespace sincnet::sinc_layer

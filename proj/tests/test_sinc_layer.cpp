#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "sincnet/sinc_layer.hpp"
#include "support/gradcheck.hpp"

using namespace sincnet;
using namespace sincnet::sinc_layer;
using sincnet::testing::inner;
using sincnet::testing::max_relative_error;
using sincnet::testing::numeric_gradient;
using sincnet::testing::random_tensor;

namespace {

SincLayerParams random_params(std::size_t F, std::size_t L, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.45, 0.45);
  SincLayerParams p;
  p.spec = {L, WindowKind::Hamming, 16000.0};
  while (p.raw_cutoffs.size() < F) {
    const RawCutoffs raw{u(rng), u(rng)};
    const double f1_abs = std::abs(raw.f1);
    if (std::abs(raw.f1) < 1e-5 || std::abs(raw.f2 - f1_abs) < 1e-5) continue;  // kink neighborhood
    p.raw_cutoffs.push_back(raw);
  }
  return p;
}

// Direct evaluation of every tap at its own offset, no mirroring.
std::vector<double> direct_row(RawCutoffs raw, const FilterSpec& spec) {
  return windowed_filter(bandpass_impulse_response(constrain_cutoffs(raw), spec.length),
                         make_window(spec.window, spec.length));
}

}  // namespace

TEST(SincLayer, MaterializeAppendixShape) {
  const auto p = SincLayerParams::mel_initialized(80, {251, WindowKind::Hamming, 16000.0});
  const auto bank = materialize(p);
  EXPECT_EQ(bank.n_filters, 80u);
  EXPECT_EQ(bank.length, 251u);
  EXPECT_EQ(bank.taps.size(), 80u * 251u);
  EXPECT_EQ(p.parameter_count(), 160u);
}

TEST(SincLayer, ParameterCountIndependentOfLength) {
  for (std::size_t L : {31u, 101u, 201u, 251u}) {
    const auto p = SincLayerParams::mel_initialized(80, {L, WindowKind::Hamming, 16000.0});
    EXPECT_EQ(p.parameter_count(), 160u);
  }
}

TEST(SincLayer, AllPassRectangularIsUnitImpulse) {
  SincLayerParams p{{{0.0, 0.5}}, {21, WindowKind::Rectangular, 16000.0}};
  const auto bank = materialize(p);
  for (std::size_t i = 0; i < 21; ++i) EXPECT_NEAR(bank.taps[i], i == 10 ? 1.0 : 0.0, 1e-15);
}

TEST(SincLayer, MirroredHalfEqualsDirectEvaluation) {
  std::mt19937_64 rng(1);
  const auto p = random_params(16, 101, rng);
  const auto bank = materialize(p);
  for (std::size_t f = 0; f < 16; ++f) {
    const auto direct = direct_row(p.raw_cutoffs[f], p.spec);
    const auto row = bank.row(f);
    for (std::size_t i = 0; i < 101; ++i) ASSERT_EQ(row[i], direct[i]) << f << "," << i;
    for (std::size_t k = 1; k <= 50; ++k) ASSERT_EQ(row[50 + k], row[50 - k]);
  }
}

TEST(SincLayer, SignOfRawF1DoesNotMatter) {
  const FilterSpec spec{61, WindowKind::Hamming, 16000.0};
  const auto a = materialize({{{0.12, 0.31}}, spec});
  const auto b = materialize({{{-0.12, 0.31}}, spec});
  EXPECT_EQ(a.taps, b.taps);
}

TEST(SincLayer, ForwardOutputLength) {
  const auto p = SincLayerParams::mel_initialized(4, {251, WindowKind::Hamming, 16000.0});
  const Tensor x({2, 1, 3200});
  const auto y = forward(x, p);
  EXPECT_EQ(y.shape(), (Shape{2, 4, 2950}));
  EXPECT_THROW(forward(Tensor({1, 1, 200}), p), Error);
}

TEST(SincLayer, ImpulseThroughAllPassIsShifted) {
  SincLayerParams p{{{0.0, 0.5}}, {21, WindowKind::Rectangular, 16000.0}};
  Tensor x({1, 1, 100});
  const std::size_t pos = 40;
  x[pos] = 1.0;
  const auto y = forward(x, p);
  for (std::size_t t = 0; t < y.dim(2); ++t) EXPECT_NEAR(y[t], t + 10 == pos ? 1.0 : 0.0, 1e-15);
}

TEST(SincLayer, CosineSelectivity) {
  const FilterSpec spec{251, WindowKind::Hamming, 16000.0};
  const SincLayerParams p{{{0.1, 0.2}, {0.3, 0.4}}, spec};
  Tensor x({1, 1, 4000});
  for (std::size_t t = 0; t < 4000; ++t) x[t] = std::cos(2.0 * std::numbers::pi * 0.15 * static_cast<double>(t));
  const auto y = forward(x, p);
  double e0 = 0.0, e1 = 0.0;
  const std::size_t n = y.dim(2);
  for (std::size_t t = 0; t < n; ++t) {
    e0 += y.at(0, 0, t) * y.at(0, 0, t);
    e1 += y.at(0, 1, t) * y.at(0, 1, t);
  }
  const double ratio = std::sqrt(e0 / e1);
  // Oracle: ratio of the two filters' magnitude responses at f = 0.15.
  const auto gain = [&](RawCutoffs c) {
    const auto h = direct_row(c, spec);
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * std::polar(1.0, -2.0 * std::numbers::pi * 0.15 * i);
    return std::abs(acc);
  };
  const double oracle = gain({0.1, 0.2}) / gain({0.3, 0.4});
  EXPECT_GE(ratio, 20.0);
  EXPECT_NEAR(ratio / oracle, 1.0, 0.05);
}

TEST(SincLayer, ForwardIsLinear) {
  std::mt19937_64 rng(2);
  const auto p = random_params(3, 31, rng);
  const auto x1 = random_tensor({2, 1, 120}, rng);
  const auto x2 = random_tensor({2, 1, 120}, rng);
  const double a = 0.7, b = -1.3;
  Tensor mix({2, 1, 120});
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x1[i] + b * x2[i];
  const auto y = forward(mix, p);
  const auto y1 = forward(x1, p);
  const auto y2 = forward(x2, p);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double ref = a * y1[i] + b * y2[i];
    ASSERT_LE(std::abs(y[i] - ref), 1e-9 * std::max(1.0, std::abs(ref)));
  }
}

TEST(SincLayer, TapSensitivityAtCenter) {
  // Upstream selecting only the center tap gradient: d g_w[c] / d f2_abs = 2 w[c] = 2.
  const FilterSpec spec{31, WindowKind::Hamming, 16000.0};
  const SincLayerParams p{{{0.1, 0.3}}, spec};
  Tensor tap_grad({1, 1, 31});
  tap_grad[15] = 1.0;
  const auto g = cutoff_grad_from_tap_grad(p, tap_grad);
  EXPECT_DOUBLE_EQ(g.at(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(g.at(0, 0), -2.0);
}

TEST(SincLayer, ConstraintJacobianAtKinksUsesZeroSign) {
  const FilterSpec spec{31, WindowKind::Hamming, 16000.0};
  Tensor tap_grad({1, 1, 31});
  tap_grad.fill(1.0);
  // f1 = 0: d f1_abs / d f1 = 0 and d f2_abs / d f1 = 0.
  const auto g0 = cutoff_grad_from_tap_grad({{{0.0, 0.2}}, spec}, tap_grad);
  EXPECT_EQ(g0.at(0, 0), 0.0);
  // f2 = f1_abs: d f2_abs / d f2 = 0.
  const auto g1 = cutoff_grad_from_tap_grad({{{0.1, 0.1}}, spec}, tap_grad);
  EXPECT_EQ(g1.at(0, 1), 0.0);
}

TEST(SincLayer, GradientCheckCutoffsAndInput) {
  std::mt19937_64 rng(20240501);
  for (int instance = 0; instance < 10; ++instance) {
    auto p = random_params(4, 31, rng);
    auto x = random_tensor({2, 1, 200}, rng);
    const auto up = random_tensor({2, 4, 170}, rng);
    const auto grads = backward(x, p, up);

    std::vector<double> theta;
    for (const auto& c : p.raw_cutoffs) {
      theta.push_back(c.f1);
      theta.push_back(c.f2);
    }
    const auto loss_theta = [&] {
      SincLayerParams q = p;
      for (std::size_t f = 0; f < q.raw_cutoffs.size(); ++f) q.raw_cutoffs[f] = {theta[2 * f], theta[2 * f + 1]};
      return inner(forward(x, q), up);
    };
    const auto num_theta = numeric_gradient(theta, loss_theta);
    EXPECT_LT(max_relative_error(grads.raw_cutoffs.values(), num_theta), 1e-4) << instance;

    std::vector<double> xs = x.storage();
    const auto loss_x = [&] { return inner(forward(Tensor(x.shape(), xs), p), up); };
    const auto num_x = numeric_gradient(xs, loss_x);
    EXPECT_LT(max_relative_error(grads.input.values(), num_x), 1e-4) << instance;
  }
}

TEST(SincLayer, AllPassInputGradientIsShiftedUpstream) {
  SincLayerParams p{{{0.0, 0.5}}, {11, WindowKind::Rectangular, 16000.0}};
  std::mt19937_64 rng(4);
  const auto x = random_tensor({1, 1, 40}, rng);
  const auto up = random_tensor({1, 1, 30}, rng);
  const auto g = backward(x, p, up);
  for (std::size_t s = 0; s < 40; ++s) {
    const double expect = (s >= 5 && s < 35) ? up[s - 5] : 0.0;
    EXPECT_NEAR(g.input[s], expect, 1e-14);
  }
}

TEST(SincLayer, NyquistDiagnostic) {
  SincLayerParams p{{{0.1, 0.2}, {0.3, 0.55}}, {31, WindowKind::Hamming, 16000.0}};
  EXPECT_EQ(nyquist_violations(p), (std::vector<std::size_t>{1}));
}

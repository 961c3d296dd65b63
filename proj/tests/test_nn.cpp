#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sincnet/nn/activation.hpp"
#include "sincnet/nn/conv1d.hpp"
#include "sincnet/nn/dense.hpp"
#include "sincnet/nn/loss.hpp"
#include "sincnet/nn/normalization.hpp"
#include "sincnet/nn/pooling.hpp"
#include "sincnet/nn/rmsprop.hpp"
#include "support/gradcheck.hpp"

using namespace sincnet;
using namespace sincnet::nn;
using sincnet::testing::inner;
using sincnet::testing::max_relative_error;
using sincnet::testing::numeric_gradient;
using sincnet::testing::random_tensor;

namespace {

// Textbook quadruple loop, the oracle for the tiled kernels.
Tensor naive_conv1d(const Tensor& x, const Tensor& w, const std::vector<double>& bias) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), T = x.dim(2), Co = w.dim(0), K = w.dim(2);
  Tensor y({B, Co, T - K + 1});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Co; ++o)
      for (std::size_t t = 0; t + K <= T; ++t) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (std::size_t i = 0; i < Ci; ++i)
          for (std::size_t k = 0; k < K; ++k) acc += w.at(o, i, k) * x.at(b, i, t + k);
        y.at(b, o, t) = acc;
      }
  return y;
}

Tensor ones(Shape s) {
  Tensor t(std::move(s));
  t.fill(1.0);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// conv1d

TEST(Conv1d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const auto x = random_tensor({2, 1, 37}, rng);
  Tensor w({1, 1, 1}, {1.0});
  const std::vector<double> b{0.0};
  EXPECT_EQ(conv1d(x, w, b), x);
}

TEST(Conv1d, MatchesNaiveOracleAcrossShapes) {
  std::mt19937_64 rng(2);
  for (const auto& [B, Ci, Co, T, K] : std::vector<std::array<std::size_t, 5>>{
           {1, 1, 1, 5, 5}, {2, 3, 4, 40, 5}, {1, 2, 3, 100, 31}, {3, 1, 2, 17, 1}, {1, 1, 2, 300, 65}}) {
    const auto x = random_tensor({B, Ci, T}, rng);
    const auto w = random_tensor({Co, Ci, K}, rng);
    std::vector<double> bias(Co);
    for (auto& v : bias) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const auto y = conv1d(x, w, bias);
    const auto ref = naive_conv1d(x, w, bias);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-12);

    // Adjoint identities against the oracle: <conv(x), g> differentiated.
    const auto g = random_tensor(y.shape(), rng);
    const auto grads = conv1d_backward(x, w, true, g);
    Tensor dx_ref(x.shape());
    Tensor dw_ref(w.shape());
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t o = 0; o < Co; ++o)
        for (std::size_t t = 0; t + K <= T; ++t)
          for (std::size_t i = 0; i < Ci; ++i)
            for (std::size_t k = 0; k < K; ++k) {
              dx_ref.at(b, i, t + k) += w.at(o, i, k) * g.at(b, o, t);
              dw_ref.at(o, i, k) += x.at(b, i, t + k) * g.at(b, o, t);
            }
    for (std::size_t i = 0; i < dx_ref.size(); ++i) ASSERT_NEAR(grads.input[i], dx_ref[i], 1e-11);
    for (std::size_t i = 0; i < dw_ref.size(); ++i) ASSERT_NEAR(grads.weights[i], dw_ref[i], 1e-10);
  }
}

TEST(Conv1d, GradientCheck) {
  std::mt19937_64 rng(3);
  auto x = random_tensor({2, 2, 30}, rng);
  auto w = random_tensor({3, 2, 5}, rng);
  std::vector<double> bias{0.1, -0.2, 0.3};
  const auto up = random_tensor({2, 3, 26}, rng);
  const auto grads = conv1d_backward(x, w, true, up);

  auto ws = w.storage();
  const auto num_w = numeric_gradient(ws, [&] { return inner(conv1d(x, Tensor(w.shape(), ws), bias), up); });
  EXPECT_LT(max_relative_error(grads.weights.values(), num_w), 1e-4);
  auto xs = x.storage();
  const auto num_x = numeric_gradient(xs, [&] { return inner(conv1d(Tensor(x.shape(), xs), w, bias), up); });
  EXPECT_LT(max_relative_error(grads.input.values(), num_x), 1e-4);
  const auto num_b = numeric_gradient(bias, [&] { return inner(conv1d(x, w, bias), up); });
  EXPECT_LT(max_relative_error(grads.bias.values(), num_b), 1e-4);
}

TEST(Conv1d, BaselineFirstLayerParameterCount) {
  const Tensor w({80, 1, 100});
  EXPECT_EQ(w.size(), 8000u);
}

TEST(Conv1d, ShapeErrors) {
  EXPECT_THROW(conv1d(Tensor({1, 2, 10}), Tensor({1, 1, 3})), Error);
  EXPECT_THROW(conv1d(Tensor({1, 1, 2}), Tensor({1, 1, 3})), Error);
  const std::vector<double> bad_bias{1.0, 2.0};
  EXPECT_THROW(conv1d(Tensor({1, 1, 5}), Tensor({1, 1, 3}), bad_bias), Error);
}

// ---------------------------------------------------------------------------
// max pooling

TEST(MaxPool, Examples) {
  const Tensor x({1, 1, 4}, {1, 3, 2, 5});
  EXPECT_EQ(max_pool1d(x, 1).output, x);
  const auto r = max_pool1d(x, 2);
  EXPECT_EQ(r.output.storage(), (std::vector<double>{3, 5}));
  const auto dx = max_pool1d_backward(x.shape(), r.argmax, Tensor({1, 1, 2}, {1, 1}));
  EXPECT_EQ(dx.storage(), (std::vector<double>{0, 1, 0, 1}));
}

TEST(MaxPool, TiesAndRemainder) {
  const Tensor x({1, 1, 7}, {2, 2, 1, 0, 4, 4, 9});
  const auto r = max_pool1d(x, 3);
  EXPECT_EQ(r.output.storage(), (std::vector<double>{2, 4}));
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{0, 4}));
  EXPECT_THROW(max_pool1d(x, 0), Error);
}

// ---------------------------------------------------------------------------
// layer norm

TEST(LayerNorm, ConstantInputGivesZeros) {
  Tensor x({2, 3, 4});
  x.fill(7.5);
  const auto y = layer_norm(x, ones({12}), Tensor({12}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, MomentsProperty) {
  std::mt19937_64 rng(4);
  // Large spread so that eps inside the root is negligible at 1e-6.
  const auto x = random_tensor({3, 2, 500}, rng, -50.0, 50.0);
  const auto y = layer_norm(x, ones({1000}), Tensor({1000}));
  for (std::size_t b = 0; b < 3; ++b) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) m += y[b * 1000 + i];
    m /= 1000.0;
    for (std::size_t i = 0; i < 1000; ++i) v += (y[b * 1000 + i] - m) * (y[b * 1000 + i] - m);
    v /= 1000.0;
    EXPECT_LT(std::abs(m), 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-6);
  }
}

TEST(LayerNorm, GradientCheck) {
  std::mt19937_64 rng(5);
  auto x = random_tensor({2, 2, 6}, rng);
  auto gain = random_tensor({12}, rng, 0.5, 1.5);
  auto bias = random_tensor({12}, rng);
  const auto up = random_tensor({2, 2, 6}, rng);
  NormCache cache;
  layer_norm(x, gain, bias, &cache);
  const auto g = layer_norm_backward(cache, gain, up);

  auto xs = x.storage();
  const auto nx = numeric_gradient(xs, [&] { return inner(layer_norm(Tensor(x.shape(), xs), gain, bias), up); });
  EXPECT_LT(max_relative_error(g.input.values(), nx), 1e-4);
  auto gs = gain.storage();
  const auto ng = numeric_gradient(gs, [&] { return inner(layer_norm(x, Tensor(gain.shape(), gs), bias), up); });
  EXPECT_LT(max_relative_error(g.gain.values(), ng), 1e-4);
  auto bs = bias.storage();
  const auto nb = numeric_gradient(bs, [&] { return inner(layer_norm(x, gain, Tensor(bias.shape(), bs)), up); });
  EXPECT_LT(max_relative_error(g.bias.values(), nb), 1e-4);
}

// ---------------------------------------------------------------------------
// batch norm

TEST(BatchNorm, ConstantFeatureGivesZeros) {
  Tensor x({4, 2}, {3, 1, 3, 2, 3, 3, 3, 4});
  BatchNormState st(2);
  const auto y = batch_norm(x, ones({2}), Tensor({2}), st, true);
  for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(y.at(b, 0), 0.0);
}

TEST(BatchNorm, TrainingMeanIsZero) {
  std::mt19937_64 rng(6);
  const auto x = random_tensor({16, 5}, rng, -3.0, 7.0);
  BatchNormState st(5);
  const auto y = batch_norm(x, ones({5}), Tensor({5}), st, true);
  for (std::size_t j = 0; j < 5; ++j) {
    double m = 0.0;
    for (std::size_t b = 0; b < 16; ++b) m += y.at(b, j);
    EXPECT_LT(std::abs(m / 16.0), 1e-6);
  }
}

TEST(BatchNorm, BatchOfOneRejectedInTraining) {
  BatchNormState st(3);
  try {
    batch_norm(Tensor({1, 3}), ones({3}), Tensor({3}), st, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidBatch);
  }
  EXPECT_NO_THROW(batch_norm(Tensor({1, 3}), ones({3}), Tensor({3}), st, false));
}

TEST(BatchNorm, RunningStatisticsAndInference) {
  const Tensor x({2, 1}, {1.0, 3.0});
  BatchNormState st(1);
  batch_norm(x, ones({1}), Tensor({1}), st, true);
  // mean 2, unbiased variance 2; momentum 0.1 from (0, 1).
  EXPECT_NEAR(st.running_mean[0], 0.2, 1e-15);
  EXPECT_NEAR(st.running_var[0], 0.9 + 0.2, 1e-15);
  const auto y = batch_norm(Tensor({1, 1}, {2.0}), ones({1}), Tensor({1}), st, false);
  EXPECT_NEAR(y[0], (2.0 - 0.2) / std::sqrt(1.1 + 1e-5), 1e-12);
}

TEST(BatchNorm, GradientCheck) {
  std::mt19937_64 rng(7);
  auto x = random_tensor({5, 3}, rng);
  auto gain = random_tensor({3}, rng, 0.5, 1.5);
  auto bias = random_tensor({3}, rng);
  const auto up = random_tensor({5, 3}, rng);
  BatchNormState st(3);
  NormCache cache;
  batch_norm(x, gain, bias, st, true, &cache);
  const auto g = batch_norm_backward(cache, gain, up);
  const auto f = [&](const Tensor& xx, const Tensor& gg, const Tensor& bb) {
    BatchNormState s(3);
    return inner(batch_norm(xx, gg, bb, s, true), up);
  };
  auto xs = x.storage();
  const auto nx = numeric_gradient(xs, [&] { return f(Tensor(x.shape(), xs), gain, bias); });
  EXPECT_LT(max_relative_error(g.input.values(), nx), 1e-4);
  auto gs = gain.storage();
  const auto ng = numeric_gradient(gs, [&] { return f(x, Tensor(gain.shape(), gs), bias); });
  EXPECT_LT(max_relative_error(g.gain.values(), ng), 1e-4);
  auto bs = bias.storage();
  const auto nb = numeric_gradient(bs, [&] { return f(x, gain, Tensor(bias.shape(), bs)); });
  EXPECT_LT(max_relative_error(g.bias.values(), nb), 1e-4);
}

// ---------------------------------------------------------------------------
// leaky relu

TEST(LeakyRelu, Examples) {
  const Tensor x({1, 3}, {2.0, -1.0, 0.0});
  const auto y = leaky_relu(x, 0.2);
  EXPECT_EQ(y[0], 2.0);
  EXPECT_DOUBLE_EQ(y[1], -0.2);
  EXPECT_EQ(leaky_relu(x, 1.0), x);
  const auto g = leaky_relu_backward(x, Tensor({1, 3}, {1, 1, 1}), 0.2);
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 0.2);
  EXPECT_EQ(g[2], 0.2);
}

TEST(LeakyRelu, GradientCheckAwayFromZero) {
  std::mt19937_64 rng(8);
  auto x = random_tensor({4, 6}, rng);
  for (auto& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.5;
  const auto up = random_tensor({4, 6}, rng);
  const auto g = leaky_relu_backward(x, up);
  auto xs = x.storage();
  const auto nx = numeric_gradient(xs, [&] { return inner(leaky_relu(Tensor(x.shape(), xs)), up); });
  EXPECT_LT(max_relative_error(g.values(), nx), 1e-4);
}

// ---------------------------------------------------------------------------
// dense

TEST(Dense, IdentityWeights) {
  std::mt19937_64 rng(9);
  const auto x = random_tensor({3, 4}, rng);
  Tensor w({4, 4});
  for (std::size_t i = 0; i < 4; ++i) w.at(i, i) = 1.0;
  EXPECT_EQ(dense(x, w, Tensor({4})), x);
}

TEST(Dense, GlorotBoundAndRange) {
  EXPECT_NEAR(glorot_bound(2048, 2048), std::sqrt(6.0 / 4096.0), 1e-15);
  EXPECT_NEAR(glorot_bound(2048, 2048), 0.03827, 1e-5);
  std::mt19937_64 rng(10);
  Tensor w({256, 2048});
  glorot_uniform(w, 2048, 2048, rng);
  double peak = 0.0;
  for (double v : w.values()) peak = std::max(peak, std::abs(v));
  EXPECT_LE(peak, glorot_bound(2048, 2048));
  EXPECT_GT(peak, 0.99 * glorot_bound(2048, 2048));
}

TEST(Dense, GradientCheck) {
  std::mt19937_64 rng(11);
  auto x = random_tensor({3, 5}, rng);
  auto w = random_tensor({4, 5}, rng);
  auto b = random_tensor({4}, rng);
  const auto up = random_tensor({3, 4}, rng);
  const auto g = dense_backward(x, w, up);
  auto xs = x.storage();
  EXPECT_LT(max_relative_error(g.input.values(), numeric_gradient(xs, [&] {
              return inner(dense(Tensor(x.shape(), xs), w, b), up);
            })),
            1e-4);
  auto ws = w.storage();
  EXPECT_LT(max_relative_error(g.weights.values(), numeric_gradient(ws, [&] {
              return inner(dense(x, Tensor(w.shape(), ws), b), up);
            })),
            1e-4);
  auto bs = b.storage();
  EXPECT_LT(max_relative_error(g.bias.values(), numeric_gradient(bs, [&] {
              return inner(dense(x, w, Tensor(b.shape(), bs)), up);
            })),
            1e-4);
}

TEST(Dense, TwoLinearLayersComposeToMatrixProduct) {
  std::mt19937_64 rng(12);
  const auto x = random_tensor({2, 5}, rng);
  const auto w1 = random_tensor({4, 5}, rng);
  const auto w2 = random_tensor({3, 4}, rng);
  const auto y = dense(dense(x, w1, Tensor({4})), w2, Tensor({3}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 3; ++o) {
      double ref = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < 4; ++j) m += w2.at(o, j) * w1.at(j, i);
        ref += m * x.at(n, i);
      }
      EXPECT_NEAR(y.at(n, o), ref, 1e-9);
    }
}

TEST(Dense, ShapeMismatch) { EXPECT_THROW(dense(Tensor({2, 3}), Tensor({4, 5}), Tensor({4})), Error); }

// ---------------------------------------------------------------------------
// softmax cross-entropy

TEST(SoftmaxCrossEntropy, UniformLogits) {
  const auto r = softmax_cross_entropy(Tensor({1, 4}), {2});
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-15);
  EXPECT_NEAR(r.loss, 1.3863, 1e-4);
}

TEST(SoftmaxCrossEntropy, RowsSumToOneAndStable) {
  std::mt19937_64 rng(13);
  const auto logits = random_tensor({8, 10}, rng, -30.0, 30.0);
  const auto p = softmax(logits);
  for (std::size_t n = 0; n < 8; ++n) {
    double s = 0.0;
    for (std::size_t c = 0; c < 10; ++c) s += p.at(n, c);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  const auto r = softmax_cross_entropy(Tensor({1, 2}, {1000.0, 0.0}), {0});
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST(SoftmaxCrossEntropy, GradientIsSoftmaxMinusOneHotOverBatch) {
  std::mt19937_64 rng(14);
  auto logits = random_tensor({3, 4}, rng);
  const std::vector<std::size_t> t{0, 3, 1};
  const auto r = softmax_cross_entropy(logits, t);
  auto ls = logits.storage();
  const auto num = numeric_gradient(ls, [&] { return softmax_cross_entropy(Tensor(logits.shape(), ls), t).loss; });
  EXPECT_LT(max_relative_error(r.grad_logits.values(), num), 1e-4);
}

TEST(SoftmaxCrossEntropy, TargetOutOfRange) {
  try {
    softmax_cross_entropy(Tensor({1, 3}), {3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidLabel);
  }
}

// ---------------------------------------------------------------------------
// RMSprop

TEST(Rmsprop, ZeroGradientLeavesParameters) {
  Tensor p({3}, {1, 2, 3});
  const Tensor g({3});
  OptimizerState st;
  rmsprop_step({&p}, {&g}, st);
  EXPECT_EQ(p.storage(), (std::vector<double>{1, 2, 3}));
}

TEST(Rmsprop, FirstStepMagnitude) {
  Tensor p({1}, {0.0});
  const Tensor g({1}, {1000.0});
  OptimizerState st;
  rmsprop_step({&p}, {&g}, st);
  // lr g / (sqrt((1 - alpha) g^2) + eps), hand-evaluated.
  const double expect = 0.001 * 1000.0 / (std::sqrt(0.05 * 1e6) + 1e-7);
  EXPECT_NEAR(-p[0], expect, 1e-15);
  EXPECT_NEAR(-p[0], 0.001 / std::sqrt(0.05), 1e-9);
  EXPECT_NEAR(-p[0], 0.004472, 1e-6);
}

TEST(Rmsprop, ConstantGradientFixedPoint) {
  Tensor p({1}, {0.0});
  const Tensor g({1}, {1.0});
  OptimizerState st;
  double before = 0.0;
  for (int i = 0; i < 2000; ++i) {
    before = p[0];
    rmsprop_step({&p}, {&g}, st);
  }
  EXPECT_NEAR(st.square_avg[0][0], 1.0, 1e-12);
  EXPECT_NEAR(before - p[0], 0.001 / (1.0 + 1e-7), 1e-12);
  EXPECT_GE(st.square_avg[0][0], 0.0);
}

TEST(Rmsprop, ShapeMismatch) {
  Tensor p({2});
  const Tensor g({3});
  OptimizerState st;
  EXPECT_THROW(rmsprop_step({&p}, {&g}, st), Error);
}

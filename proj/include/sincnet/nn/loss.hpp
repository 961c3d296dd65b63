#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sincnet/tensor.hpp"

namespace sincnet::nn {

/// Row-wise softmax of [B, C] logits.
inline Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax input");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    const double* z = logits.data() + n * classes;
    const double m = *std::max_element(z, z + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p.at(n, c) = std::exp(z[c] - m);
      total += p.at(n, c);
    }
    for (std::size_t c = 0; c < classes; ++c) p.at(n, c) /= total;
  }
  return p;
}

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
  Tensor probabilities;
};

/// Mean cross-entropy over the batch via log-sum-exp.
inline LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets) {
  require_rank(logits, 2, "softmax_cross_entropy logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  require(targets.size() == batch, ErrorKind::Shape, "softmax_cross_entropy: one target per row required");
  for (std::size_t t : targets) {
    require(t < classes, ErrorKind::InvalidLabel,
            "target " + std::to_string(t) + " outside [0, " + std::to_string(classes) + ")");
  }
  LossResult r;
  r.probabilities = softmax(logits);
  r.grad_logits = r.probabilities;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const double* z = logits.data() + n * classes;
    const double m = *std::max_element(z, z + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(z[c] - m);
    r.loss += (m + std::log(total) - z[targets[n]]) * inv_batch;
    r.grad_logits.at(n, targets[n]) -= 1.0;
  }
  for (auto& v : r.grad_logits.values()) v *= inv_batch;
  return r;
}

}  // namespace sincnet::nn

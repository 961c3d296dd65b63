#pragma once

// Central finite-difference oracle shared by the gradient tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "sincnet/tensor.hpp"

namespace sincnet::testing {

/// d f / d v[i] by central differences, one coordinate at a time.
inline std::vector<double> numeric_gradient(std::vector<double>& v, const std::function<double()>& f,
                                            double h = 1e-6) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double up = f();
    v[i] = keep - h;
    const double down = f();
    v[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a - n| / max(|a|, |n|, floor) where floor = 1e-3 * max|n|. The
/// floor keeps entries that are zero up to cancellation from dominating.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double scale = 0.0;
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-3 * scale, 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

/// <a, b> over every element; the scalar loss used for adjoint checks.
inline double inner(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace sincnet::testing

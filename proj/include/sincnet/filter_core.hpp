#pragma once

// Band-pass filter construction from cutoff frequencies, windowing, mel-scale
// initialization and magnitude-response analysis. Frequencies are normalized
// (cycles/sample, f/fs) everywhere except at the Hz-facing helpers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sincnet/error.hpp"

namespace sincnet {

/// Unconstrained learnable cutoffs. May be negative or out of order.
struct RawCutoffs {
  double f1 = 0.0;
  double f2 = 0.0;

  friend bool operator==(const RawCutoffs&, const RawCutoffs&) = default;
};

/// Cutoffs after the ordering constraint: 0 <= f1_abs <= f2_abs.
struct ConstrainedCutoffs {
  double f1_abs = 0.0;
  double f2_abs = 0.0;

  friend bool operator==(const ConstrainedCutoffs&, const ConstrainedCutoffs&) = default;
};

enum class WindowKind { Hamming, Rectangular };

inline std::string to_string(WindowKind kind) {
  return kind == WindowKind::Hamming ? "hamming" : "rectangular";
}

inline WindowKind window_from_string(const std::string& name) {
  if (name == "hamming") return WindowKind::Hamming;
  if (name == "rectangular") return WindowKind::Rectangular;
  fail(ErrorKind::InvalidSpec, "unknown window '" + name + "' (expected hamming|rectangular)");
}

struct FilterSpec {
  std::size_t length = 251;
  WindowKind window = WindowKind::Hamming;
  double sample_rate = 16000.0;

  std::size_t center() const { return (length - 1) / 2; }

  void validate() const {
    require(length % 2 == 1, ErrorKind::InvalidSpec,
            "filter length must be odd, got " + std::to_string(length));
    require(sample_rate > 0.0 && std::isfinite(sample_rate), ErrorKind::InvalidSpec,
            "sample rate must be positive");
  }
};

/// F filters of L taps, row-major, plus the cutoffs each row was built from.
/// Cutoffs are empty for banks that were not built from cutoffs (learned taps).
struct FilterBank {
  std::size_t n_filters = 0;
  std::size_t length = 0;
  std::vector<double> taps;
  std::vector<ConstrainedCutoffs> cutoffs;

  std::span<const double> row(std::size_t i) const {
    return {taps.data() + i * length, length};
  }
  std::span<double> row(std::size_t i) { return {taps.data() + i * length, length}; }
};

// ---------------------------------------------------------------------------
// Constraint mapping

inline ConstrainedCutoffs constrain_cutoffs(RawCutoffs raw) {
  require(std::isfinite(raw.f1) && std::isfinite(raw.f2), ErrorKind::InvalidParameter,
          "cutoffs must be finite");
  const double f1_abs = std::abs(raw.f1);
  // Base is |f1| rather than f1 so the ordering holds for negative f1 too.
  const double f2_abs = f1_abs + std::abs(raw.f2 - f1_abs);
  return {f1_abs, f2_abs};
}

// ---------------------------------------------------------------------------
// Impulse responses and windows

/// sin(x)/x with the removable singularity filled in.
inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

/// One tap of the ideal band-pass at signed offset n from the center.
inline double bandpass_tap(ConstrainedCutoffs c, double n) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return 2.0 * c.f2_abs * sinc(two_pi * c.f2_abs * n) -
         2.0 * c.f1_abs * sinc(two_pi * c.f1_abs * n);
}

/// Difference of two low-pass sincs, truncated to `length` taps and centered
/// at (length-1)/2. Every tap is evaluated at its own signed offset.
inline std::vector<double> bandpass_impulse_response(ConstrainedCutoffs c, std::size_t length) {
  require(length % 2 == 1, ErrorKind::InvalidSpec,
          "impulse response length must be odd, got " + std::to_string(length));
  const auto half = static_cast<long>((length - 1) / 2);
  std::vector<double> g(length);
  for (std::size_t i = 0; i < length; ++i) {
    g[i] = bandpass_tap(c, static_cast<double>(static_cast<long>(i) - half));
  }
  return g;
}

/// Symmetric Hamming window, w[n] = 0.54 - 0.46 cos(2 pi n / (L-1)).
/// Only the first half is evaluated; the rest is mirrored so that
/// w[n] == w[L-1-n] exactly.
inline std::vector<double> hamming_window(std::size_t length) {
  require(length >= 3, ErrorKind::InvalidSpec, "Hamming window needs at least 3 taps");
  require(length % 2 == 1, ErrorKind::InvalidSpec, "Hamming window length must be odd");
  std::vector<double> w(length);
  const double denom = static_cast<double>(length - 1);
  const std::size_t c = (length - 1) / 2;
  for (std::size_t n = 0; n <= c; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
    w[length - 1 - n] = w[n];
  }
  return w;
}

inline std::vector<double> make_window(WindowKind kind, std::size_t length) {
  if (kind == WindowKind::Rectangular) return std::vector<double>(length, 1.0);
  return hamming_window(length);
}

inline std::vector<double> windowed_filter(std::span<const double> g, std::span<const double> w) {
  require(g.size() == w.size(), ErrorKind::InvalidSpec,
          "filter and window lengths differ (" + std::to_string(g.size()) + " vs " +
              std::to_string(w.size()) + ")");
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * w[i];
  return out;
}

// ---------------------------------------------------------------------------
// Mel-scale initialization

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

inline constexpr double kMelInitLowHz = 30.0;
inline constexpr double kMelInitNyquistGuardHz = 100.0;

/// Band edges (Hz) equally spaced in mel between 30 Hz and fs/2 - 100 Hz.
inline std::vector<double> mel_band_edges_hz(std::size_t n_filters, double sample_rate) {
  require(n_filters >= 1, ErrorKind::InvalidSpec, "mel init needs at least one filter");
  require(sample_rate > 0.0 && std::isfinite(sample_rate), ErrorKind::InvalidSpec,
          "sample rate must be positive");
  const double lo = kMelInitLowHz;
  const double hi = sample_rate / 2.0 - kMelInitNyquistGuardHz;
  require(hi > lo, ErrorKind::InvalidSpec,
          "sample rate " + std::to_string(sample_rate) + " Hz leaves no room for mel bands above " +
              std::to_string(lo) + " Hz");
  const double mel_lo = hz_to_mel(lo);
  const double mel_hi = hz_to_mel(hi);
  std::vector<double> edges(n_filters + 1);
  edges.front() = lo;
  edges.back() = hi;
  for (std::size_t i = 1; i < n_filters; ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_filters);
    edges[i] = mel_to_hz(mel);
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    require(edges[i] > edges[i - 1], ErrorKind::InvalidSpec,
            "mel band edges collapse for " + std::to_string(n_filters) + " filters at " +
                std::to_string(sample_rate) + " Hz");
  }
  return edges;
}

inline std::vector<RawCutoffs> mel_init_cutoffs(std::size_t n_filters, double sample_rate) {
  const auto edges = mel_band_edges_hz(n_filters, sample_rate);
  std::vector<RawCutoffs> out(n_filters);
  for (std::size_t i = 0; i < n_filters; ++i) {
    out[i] = {edges[i] / sample_rate, edges[i + 1] / sample_rate};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral analysis

/// Normalized frequency of sample k of an n_points grid over [0, 0.5].
inline double response_frequency(std::size_t k, std::size_t n_points) {
  return n_points == 1 ? 0.0 : 0.5 * static_cast<double>(k) / static_cast<double>(n_points - 1);
}

/// DTFT H(f) = sum_n h[n] exp(-j 2 pi f n), evaluated directly on the grid.
inline std::vector<std::complex<double>> complex_frequency_response(std::span<const double> h,
                                                                    std::size_t n_points) {
  require(!h.empty(), ErrorKind::InvalidSpec, "empty filter");
  require(n_points >= h.size(), ErrorKind::InvalidSpec,
          "n_points (" + std::to_string(n_points) + ") must be at least the filter length (" +
              std::to_string(h.size()) + ")");
  std::vector<std::complex<double>> out(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    const double omega = 2.0 * std::numbers::pi * response_frequency(k, n_points);
    double re = 0.0;
    double im = 0.0;
    for (std::size_t n = 0; n < h.size(); ++n) {
      const double phase = omega * static_cast<double>(n);
      re += h[n] * std::cos(phase);
      im -= h[n] * std::sin(phase);
    }
    out[k] = {re, im};
  }
  return out;
}

inline std::vector<double> frequency_response(std::span<const double> h, std::size_t n_points) {
  const auto complex_response = complex_frequency_response(h, n_points);
  std::vector<double> mag(n_points);
  for (std::size_t k = 0; k < n_points; ++k) mag[k] = std::abs(complex_response[k]);
  return mag;
}

struct CumulativeResponse {
  std::vector<double> raw;
  std::vector<double> normalized;  // raw / max(raw); all zeros if raw is all zeros
};

/// Sum of the magnitude responses of every filter in the bank.
inline CumulativeResponse cumulative_frequency_response(const FilterBank& bank, std::size_t n_points) {
  require(bank.n_filters > 0, ErrorKind::InvalidSpec, "cumulative response of an empty filter bank");
  CumulativeResponse out;
  out.raw.assign(n_points, 0.0);
  for (std::size_t i = 0; i < bank.n_filters; ++i) {
    const auto mag = frequency_response(bank.row(i), n_points);
    for (std::size_t k = 0; k < n_points; ++k) out.raw[k] += mag[k];
  }
  double peak = 0.0;
  for (double v : out.raw) peak = std::max(peak, v);
  out.normalized.resize(n_points);
  for (std::size_t k = 0; k < n_points; ++k) out.normalized[k] = peak > 0.0 ? out.raw[k] / peak : 0.0;
  return out;
}

/// Trapezoidal integral of a response sampled on the [0, 0.5] grid, restricted
/// to [lo_hz, hi_hz].
inline double integrate_band(std::span<const double> response, double sample_rate, double lo_hz,
                             double hi_hz) {
  const std::size_t n = response.size();
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double fa = response_frequency(k, n) * sample_rate;
    const double fb = response_frequency(k + 1, n) * sample_rate;
    const double a = std::max(fa, lo_hz);
    const double b = std::min(fb, hi_hz);
    if (b <= a) continue;
    const auto lerp = [&](double f) {
      return response[k] + (response[k + 1] - response[k]) * (f - fa) / (fb - fa);
    };
    acc += 0.5 * (lerp(a) + lerp(b)) * (b - a);
  }
  return acc;
}

}  // namespace sincnet

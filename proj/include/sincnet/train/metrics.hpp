#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "sincnet/tensor.hpp"

namespace sincnet::train {

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

/// 100 x fraction of rows whose argmax differs from the label.
inline double frame_error_rate(const Tensor& posteriors, const std::vector<std::size_t>& labels) {
  require_rank(posteriors, 2, "frame_error_rate posteriors");
  const std::size_t n = posteriors.dim(0), classes = posteriors.dim(1);
  require(n >= 1, ErrorKind::InvalidInput, "frame_error_rate needs at least one frame");
  require(labels.size() == n, ErrorKind::Shape,
          "frame_error_rate: " + std::to_string(n) + " frames but " + std::to_string(labels.size()) + " labels");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < n; ++i) wrong += argmax(posteriors.data() + i * classes, classes) != labels[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(n);
}

struct UtterancePosteriors {
  Tensor chunk_posteriors;  // [n_chunks, C]
  std::size_t label = 0;
};

/// Class decision of an utterance: argmax of the mean chunk posterior.
inline std::size_t utterance_decision(const UtterancePosteriors& u) {
  const Tensor& p = u.chunk_posteriors;
  require(p.rank() == 2 && p.dim(0) >= 1, ErrorKind::InvalidInput, "utterance has no chunks");
  const std::size_t n = p.dim(0), classes = p.dim(1);
  std::vector<double> mean(classes, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < classes; ++c) mean[c] += p.at(i, c);
  for (auto& v : mean) v /= static_cast<double>(n);
  return argmax(mean.data(), classes);
}

inline double sentence_error_rate(const std::vector<UtterancePosteriors>& utterances) {
  require(!utterances.empty(), ErrorKind::InvalidInput, "sentence_error_rate needs at least one utterance");
  std::size_t wrong = 0;
  for (const auto& u : utterances) wrong += utterance_decision(u) != u.label;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(utterances.size());
}

struct ScoredTrial {
  double score = 0.0;
  bool is_genuine = false;
};

struct EerResult {
  double eer_pct = 0.0;
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

namespace detail {

inline void count_classes(const std::vector<ScoredTrial>& trials, std::size_t& genuine, std::size_t& impostor) {
  genuine = impostor = 0;
  for (const auto& t : trials) {
    require(std::isfinite(t.score), ErrorKind::InvalidInput, "trial score is not finite");
    (t.is_genuine ? genuine : impostor) += 1;
  }
  require(genuine >= 1 && impostor >= 1, ErrorKind::InvalidInput,
          "EER needs at least one genuine and one impostor trial");
}

}  // namespace detail

/// Threshold sweep over the sorted unique scores. At threshold t,
/// FAR = impostors with score >= t, FRR = genuines with score < t; the EER is
/// (FAR + FRR) / 2 where |FAR - FRR| is smallest (lowest such t on ties).
inline EerResult equal_error_rate(const std::vector<ScoredTrial>& trials) {
  std::size_t n_gen = 0, n_imp = 0;
  detail::count_classes(trials, n_gen, n_imp);
  std::vector<ScoredTrial> sorted = trials;
  std::sort(sorted.begin(), sorted.end(), [](const ScoredTrial& a, const ScoredTrial& b) { return a.score < b.score; });

  EerResult best;
  // |FAR - FRR| scaled by n_gen * n_imp, kept integral so ties compare exactly.
  std::uint64_t best_gap = std::numeric_limits<std::uint64_t>::max();
  std::size_t gen_below = 0, imp_below = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].score;
    const double far = static_cast<double>(n_imp - imp_below) / static_cast<double>(n_imp);
    const double frr = static_cast<double>(gen_below) / static_cast<double>(n_gen);
    const std::uint64_t a = static_cast<std::uint64_t>(n_imp - imp_below) * n_gen;
    const std::uint64_t b = static_cast<std::uint64_t>(gen_below) * n_imp;
    const std::uint64_t gap = a > b ? a - b : b - a;
    if (gap < best_gap) {
      best_gap = gap;
      best = {100.0 * (far + frr) / 2.0, t, far, frr};
    }
    for (; i < sorted.size() && sorted[i].score == t; ++i) (sorted[i].is_genuine ? gen_below : imp_below) += 1;
  }
  return best;
}

}  // namespace sincnet::train

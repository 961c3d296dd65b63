#pragma once

#include <cstddef>
#include <iostream>
#include <string>
#include <vector>

#include "sincnet/audio/wav.hpp"

namespace sincnet::audio {

struct Chunk {
  std::vector<double> samples;
  std::string utterance_id;
  int label = 0;
};

struct ChunkStream {
  std::size_t chunk_length = 0;
  std::size_t hop = 0;
  std::vector<Chunk> chunks;
};

/// floor((n - chunk) / hop) + 1 windows, or 0 when n < chunk.
inline std::size_t chunk_count(std::size_t n_samples, std::size_t chunk_length, std::size_t hop) {
  if (n_samples < chunk_length) return 0;
  return (n_samples - chunk_length) / hop + 1;
}

/// Cuts fixed-length windows starting at 0, hop, 2 hop, ...; the trailing
/// partial window is dropped. Utterances shorter than one chunk produce an
/// empty stream and a warning.
inline ChunkStream frame_signal(const Waveform& w, std::size_t chunk_length, std::size_t hop) {
  require(chunk_length >= 1 && hop >= 1, ErrorKind::InvalidSpec, "chunk length and hop must be positive");
  ChunkStream s{chunk_length, hop, {}};
  const std::size_t n = chunk_count(w.samples.size(), chunk_length, hop);
  if (n == 0) {
    std::clog << "warning: utterance '" << w.utterance_id << "' (" << w.samples.size()
              << " samples) is shorter than one chunk (" << chunk_length << "), skipped\n";
    return s;
  }
  s.chunks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto first = w.samples.begin() + static_cast<std::ptrdiff_t>(i * hop);
    s.chunks.push_back({std::vector<double>(first, first + static_cast<std::ptrdiff_t>(chunk_length)),
                        w.utterance_id, w.label});
  }
  return s;
}

/// Chunk length round(chunk_ms fs) and hop = chunk - round(overlap_ms fs),
/// unless hop_override is non-zero.
inline ChunkStream frame_signal_ms(const Waveform& w, double chunk_ms = 200.0, double overlap_ms = 10.0,
                                   std::size_t hop_override = 0) {
  const auto chunk = static_cast<std::size_t>(std::llround(chunk_ms / 1000.0 * w.sample_rate));
  const auto overlap = static_cast<std::size_t>(std::llround(overlap_ms / 1000.0 * w.sample_rate));
  require(overlap < chunk, ErrorKind::InvalidSpec, "overlap must be shorter than the chunk");
  return frame_signal(w, chunk, hop_override > 0 ? hop_override : chunk - overlap);
}

}  // namespace sincnet::audio

#pragma once

// Speaker verification on top of a trained classifier: d-vectors are the
// averaged, L2-normalized last-hidden-layer activations of an utterance's
// chunks; a trial score is the cosine between a test d-vector and the claimed
// speaker's enrollment d-vector.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sincnet/audio/framing.hpp"
#include "sincnet/nn/network.hpp"
#include "sincnet/train/metrics.hpp"

namespace sincnet::train {

using DVector = std::vector<double>;

/// Unit-length copy; a zero vector stays zero.
inline DVector l2_normalize(DVector v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (ss > 0.0) {
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : v) x *= inv;
  }
  return v;
}

inline double cosine(const DVector& a, const DVector& b) {
  require(a.size() == b.size(), ErrorKind::Shape, "d-vector widths differ");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

/// Mean of per-chunk normalized embeddings, normalized again.
inline DVector extract_dvector(nn::Network& net, const std::vector<audio::Chunk>& chunks,
                               std::size_t batch_size = 128) {
  require(!chunks.empty(), ErrorKind::InvalidInput, "cannot build a d-vector from zero chunks");
  const std::size_t len = net.input_length();
  DVector sum(net.embedding_width(), 0.0);
  for (std::size_t first = 0; first < chunks.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, chunks.size() - first);
    std::vector<double> data;
    data.reserve(count * len);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& s = chunks[first + i].samples;
      require(s.size() == len, ErrorKind::Shape, "chunk length does not match the network input");
      data.insert(data.end(), s.begin(), s.end());
    }
    const Tensor e = net.embed(Tensor({count, 1, len}, std::move(data)));
    const std::size_t width = e.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
      const DVector row = l2_normalize(DVector(e.data() + i * width, e.data() + (i + 1) * width));
      for (std::size_t k = 0; k < width; ++k) sum[k] += row[k];
    }
  }
  for (double& x : sum) x /= static_cast<double>(chunks.size());
  return l2_normalize(std::move(sum));
}

inline DVector utterance_dvector(nn::Network& net, const audio::Waveform& w) {
  const auto& cfg = net.config();
  return extract_dvector(net, audio::frame_signal(w, cfg.chunk_samples(), cfg.hop()).chunks, cfg.batch_size);
}

/// Enrollment: one d-vector per speaker from the mean of its utterances'
/// chunk embeddings (all chunks pooled).
inline std::map<int, DVector> enroll_speakers(nn::Network& net, const std::vector<audio::Waveform>& utts) {
  const auto& cfg = net.config();
  std::map<int, std::vector<audio::Chunk>> pooled;
  for (const auto& u : utts) {
    auto stream = audio::frame_signal(u, cfg.chunk_samples(), cfg.hop());
    auto& dst = pooled[u.label];
    for (auto& c : stream.chunks) dst.push_back(std::move(c));
  }
  std::map<int, DVector> out;
  for (auto& [spk, chunks] : pooled) {
    require(!chunks.empty(), ErrorKind::InvalidInput,
            "speaker " + std::to_string(spk) + " has no enrollment audio long enough for one chunk");
    out[spk] = extract_dvector(net, chunks, cfg.batch_size);
  }
  return out;
}

struct TestUtterance {
  DVector dvector;
  int speaker = 0;
  std::string id;
};

struct Trial {
  std::size_t test_index = 0;
  int claimed_speaker = 0;
  bool is_genuine = false;
};

/// One genuine trial per test utterance plus `impostors_per_genuine` claims
/// against other enrolled speakers (distinct while enough exist, drawn with
/// replacement otherwise).
inline std::vector<Trial> make_trials(const std::vector<TestUtterance>& tests, const std::vector<int>& enrolled,
                                      std::uint64_t seed, std::size_t impostors_per_genuine = 10) {
  require(enrolled.size() >= 2, ErrorKind::InvalidInput, "verification needs at least 2 enrolled speakers");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7a1u};
  std::mt19937_64 rng(seq);
  std::vector<Trial> trials;
  for (std::size_t t = 0; t < tests.size(); ++t) {
    const int spk = tests[t].speaker;
    std::vector<int> others;
    bool found = false;
    for (int s : enrolled) {
      if (s == spk) found = true;
      else others.push_back(s);
    }
    require(found, ErrorKind::InvalidInput,
            "test utterance '" + tests[t].id + "' belongs to unenrolled speaker " + std::to_string(spk));
    trials.push_back({t, spk, true});
    if (others.size() >= impostors_per_genuine) {
      std::shuffle(others.begin(), others.end(), rng);
      for (std::size_t k = 0; k < impostors_per_genuine; ++k) trials.push_back({t, others[k], false});
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
      for (std::size_t k = 0; k < impostors_per_genuine; ++k) trials.push_back({t, others[pick(rng)], false});
    }
  }
  return trials;
}

inline std::vector<ScoredTrial> score_trials(const std::map<int, DVector>& enrolled,
                                             const std::vector<TestUtterance>& tests,
                                             const std::vector<Trial>& trials) {
  std::vector<ScoredTrial> out;
  out.reserve(trials.size());
  for (const auto& t : trials) {
    const auto it = enrolled.find(t.claimed_speaker);
    require(it != enrolled.end(), ErrorKind::InvalidInput,
            "trial claims unenrolled speaker " + std::to_string(t.claimed_speaker));
    require(t.test_index < tests.size(), ErrorKind::InvalidInput, "trial refers to a missing test utterance");
    out.push_back({cosine(tests[t.test_index].dvector, it->second), t.is_genuine});
  }
  return out;
}

}  // namespace sincnet::train

#pragma once

// Synthetic speaker-like corpus: every class is a harmonic source at its own
// fundamental shaped by class-specific resonances, with a white noise floor
// and optional band-limited corruption.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sincnet/audio/wav.hpp"
#include "sincnet/filter_core.hpp"
#include "sincnet/json_util.hpp"

namespace sincnet::audio {

struct Resonance {
  double center_hz = 500.0;
  double bandwidth_hz = 100.0;
  double gain = 4.0;  // peak boost above the flat envelope floor of 1
};

struct ClassSignature {
  double fundamental_hz = 130.0;
  std::vector<Resonance> resonances;

  /// Spectral envelope applied to each harmonic: 1 + sum of Lorentzian peaks.
  double envelope(double f) const {
    double e = 1.0;
    for (const auto& r : resonances) {
      const double u = (f - r.center_hz) / (0.5 * r.bandwidth_hz);
      e += r.gain / (1.0 + u * u);
    }
    return e;
  }
};

struct NoiseBand {
  double lo_hz = 2000.0;
  double hi_hz = 2500.0;
  double snr_db = 0.0;
};

struct CorpusSpec {
  double sample_rate = 16000.0;
  std::size_t n_classes = 10;
  int class_offset = 0;
  std::size_t train_utterances = 5;
  std::size_t test_utterances = 3;
  double train_total_min_s = 12.0;
  double train_total_max_s = 15.0;
  double test_min_s = 2.0;
  double test_max_s = 6.0;
  std::vector<ClassSignature> classes;  // explicit signatures; empty means derived
  std::uint64_t signature_seed = 7;
  std::optional<NoiseBand> noise_band;
  double noise_floor_db = -30.0;
  double f0_jitter = 0.03;
  double peak = 0.95;
  double min_chunk_s = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  json to_json() const;
  static CorpusSpec from_json(const json& j, const std::string& path = "corpus");
};

struct Corpus {
  std::vector<Waveform> train;
  std::vector<Waveform> test;
  std::vector<ClassSignature> signatures;  // index i belongs to class class_offset + i
};

namespace detail {

inline std::mt19937_64 derived_rng(std::uint64_t seed, std::initializer_list<std::uint32_t> tags) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  words.insert(words.end(), tags.begin(), tags.end());
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double mean_power(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

}  // namespace detail

/// Deterministic speaker signature for a global class id: pitch in
/// [100, 250] Hz and three resonances in low/mid/high formant ranges.
inline ClassSignature derived_signature(int class_id, std::uint64_t signature_seed, double sample_rate) {
  auto rng = detail::derived_rng(signature_seed, {0x5167u, static_cast<std::uint32_t>(class_id)});
  const double cap = 0.45 * sample_rate;
  ClassSignature s;
  s.fundamental_hz = detail::uniform(rng, 100.0, 250.0);
  const double ranges[3][2] = {{300.0, 900.0}, {900.0, 2200.0}, {2200.0, 3600.0}};
  for (const auto& r : ranges) {
    Resonance res;
    res.center_hz = std::min(detail::uniform(rng, r[0], r[1]), cap);
    res.bandwidth_hz = detail::uniform(rng, 60.0, 160.0);
    s.resonances.push_back(res);
  }
  return s;
}

inline ClassSignature signature_for(const CorpusSpec& spec, std::size_t class_index) {
  if (!spec.classes.empty()) return spec.classes.at(class_index);
  return derived_signature(spec.class_offset + static_cast<int>(class_index), spec.signature_seed, spec.sample_rate);
}

/// One utterance: harmonics of a jittered fundamental with slight vibrato
/// and a syllable-rate amplitude envelope. Not normalized.
inline std::vector<double> synth_harmonic(const ClassSignature& sig, std::size_t n_samples, double fs,
                                          double f0_jitter, std::mt19937_64& rng) {
  const double f0 = sig.fundamental_hz * (1.0 + detail::uniform(rng, -f0_jitter, f0_jitter));
  const double vib_rate = detail::uniform(rng, 4.0, 6.0);
  const double vib_phase = detail::uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double am_rate = detail::uniform(rng, 2.0, 5.0);
  const double am_phase = detail::uniform(rng, 0.0, 2.0 * std::numbers::pi);
  constexpr double vib_depth = 0.01;

  const std::size_t n_harm = static_cast<std::size_t>(0.45 * fs / (f0 * (1.0 + vib_depth)));
  std::vector<std::complex<double>> weights(n_harm);
  for (std::size_t k = 1; k <= n_harm; ++k) {
    const double amp = sig.envelope(static_cast<double>(k) * f0) / static_cast<double>(k);
    weights[k - 1] = std::polar(amp, detail::uniform(rng, 0.0, 2.0 * std::numbers::pi));
  }

  std::vector<double> out(n_samples);
  double phase = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = static_cast<double>(i) / fs;
    const std::complex<double> step = std::polar(1.0, phase);
    std::complex<double> z = step;
    double acc = 0.0;
    for (std::size_t k = 0; k < n_harm; ++k) {
      acc += (weights[k] * z).imag();
      z *= step;
    }
    out[i] = acc * (0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * am_rate * t + am_phase));
    const double inst_f0 = f0 * (1.0 + vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase));
    phase = std::fmod(phase + 2.0 * std::numbers::pi * inst_f0 / fs, 2.0 * std::numbers::pi);
  }
  return out;
}

struct CorruptedSignal {
  Waveform output;
  std::vector<double> added_noise;  // output.samples[i] == input[i] + added_noise[i]
};

/// Adds white noise band-limited to [lo_hz, hi_hz] by a 501-tap Hamming
/// windowed-sinc band-pass, scaled to the requested signal-to-noise ratio.
inline CorruptedSignal corrupt_band_detailed(const Waveform& w, double lo_hz, double hi_hz, double snr_db,
                                             std::uint64_t seed) {
  const double nyquist = w.sample_rate / 2.0;
  require(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz <= nyquist, ErrorKind::InvalidSpec,
          "noise band [" + std::to_string(lo_hz) + ", " + std::to_string(hi_hz) + "] Hz invalid for fs " +
              std::to_string(w.sample_rate));
  require(std::isfinite(snr_db), ErrorKind::InvalidSpec, "SNR must be finite");
  const double signal_power = detail::mean_power(w.samples);
  require(signal_power > 0.0, ErrorKind::InvalidInput, "cannot set an SNR against a silent signal");

  constexpr std::size_t kTaps = 501;
  const auto g = bandpass_impulse_response({lo_hz / w.sample_rate, hi_hz / w.sample_rate}, kTaps);
  const auto h = windowed_filter(g, hamming_window(kTaps));

  auto rng = detail::derived_rng(seed, {0xb7d5u});
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> white(w.samples.size() + kTaps - 1);
  for (auto& v : white) v = gauss(rng);

  std::vector<double> noise(w.samples.size(), 0.0);
  for (std::size_t k = 0; k < kTaps; ++k) {
    const double hk = h[k];
    const double* src = white.data() + k;
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] += hk * src[i];
  }
  const double noise_power = detail::mean_power(noise);
  const double scale = std::sqrt(signal_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
  for (auto& v : noise) v *= scale;

  CorruptedSignal r{w, std::move(noise)};
  for (std::size_t i = 0; i < r.output.samples.size(); ++i) r.output.samples[i] = w.samples[i] + r.added_noise[i];
  return r;
}

inline Waveform corrupt_band(const Waveform& w, double lo_hz, double hi_hz, double snr_db, std::uint64_t seed) {
  return corrupt_band_detailed(w, lo_hz, hi_hz, snr_db, seed).output;
}

inline void peak_normalize(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m == 0.0) return;
  const double g = peak / m;
  for (auto& v : x) v *= g;
}

inline std::string utterance_name(int class_id, const std::string& split, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "c%03d_%s_%02zu", class_id, split.c_str(), index);
  return buf;
}

inline Waveform synth_utterance(const CorpusSpec& spec, std::size_t class_index, const std::string& split,
                                std::size_t index, double duration_s) {
  const int class_id = spec.class_offset + static_cast<int>(class_index);
  const std::uint32_t split_tag = split == "train" ? 1u : 2u;
  auto rng = detail::derived_rng(spec.seed, {0xa0d1u, static_cast<std::uint32_t>(class_id), split_tag,
                                             static_cast<std::uint32_t>(index)});
  const auto n = static_cast<std::size_t>(std::llround(duration_s * spec.sample_rate));
  Waveform w;
  w.sample_rate = spec.sample_rate;
  w.label = class_id;
  w.utterance_id = utterance_name(class_id, split, index);
  w.samples = synth_harmonic(signature_for(spec, class_index), n, spec.sample_rate, spec.f0_jitter, rng);

  const double floor_power = detail::mean_power(w.samples) * std::pow(10.0, spec.noise_floor_db / 10.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(floor_power));
  for (auto& v : w.samples) v += gauss(rng);

  if (spec.noise_band) {
    w = corrupt_band(w, spec.noise_band->lo_hz, spec.noise_band->hi_hz, spec.noise_band->snr_db, rng());
  }
  peak_normalize(w.samples, spec.peak);
  return w;
}

/// Train material per class totals U[train_total_min_s, train_total_max_s]
/// split evenly over train_utterances; each test utterance lasts
/// U[test_min_s, test_max_s]. Pure function of the spec.
inline Corpus synth_class_corpus(const CorpusSpec& spec) {
  spec.validate();
  Corpus corpus;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    corpus.signatures.push_back(signature_for(spec, c));
    auto rng = detail::derived_rng(spec.seed, {0xd0a7u, static_cast<std::uint32_t>(spec.class_offset + static_cast<int>(c))});
    const double total = detail::uniform(rng, spec.train_total_min_s, spec.train_total_max_s);
    for (std::size_t u = 0; u < spec.train_utterances; ++u) {
      corpus.train.push_back(synth_utterance(spec, c, "train", u, total / static_cast<double>(spec.train_utterances)));
    }
    for (std::size_t u = 0; u < spec.test_utterances; ++u) {
      corpus.test.push_back(synth_utterance(spec, c, "test", u, detail::uniform(rng, spec.test_min_s, spec.test_max_s)));
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Spec validation and (de)serialization

inline void CorpusSpec::validate() const {
  const auto bad = [](const std::string& field, const std::string& why) {
    fail(ErrorKind::InvalidSpec, "corpus." + field + ": " + why);
  };
  if (!(sample_rate > 0.0)) bad("sample_rate", "must be positive");
  if (n_classes < 1) bad("n_classes", "must be at least 1");
  if (!classes.empty() && classes.size() != n_classes) {
    bad("classes", "has " + std::to_string(classes.size()) + " entries but n_classes is " + std::to_string(n_classes));
  }
  if (train_utterances < 1) bad("train_utterances", "must be at least 1");
  if (!(train_total_min_s > 0.0 && train_total_min_s <= train_total_max_s)) bad("train_total_min_s", "invalid range");
  if (!(test_min_s > 0.0 && test_min_s <= test_max_s)) bad("test_min_s", "invalid range");
  if (train_total_min_s / static_cast<double>(train_utterances) <= min_chunk_s) {
    bad("train_total_min_s", "training utterances would be shorter than one chunk");
  }
  if (test_utterances > 0 && test_min_s <= min_chunk_s) bad("test_min_s", "must exceed the chunk length");
  if (!(f0_jitter >= 0.0 && f0_jitter < 0.5)) bad("f0_jitter", "must be in [0, 0.5)");
  if (!(peak > 0.0 && peak <= 1.0)) bad("peak", "must be in (0, 1]");
  const double nyquist = sample_rate / 2.0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const std::string prefix = "classes[" + std::to_string(c) + "]";
    if (!(classes[c].fundamental_hz > 0.0 && classes[c].fundamental_hz < nyquist)) {
      bad(prefix + ".fundamental_hz", "must be in (0, fs/2)");
    }
    for (std::size_t r = 0; r < classes[c].resonances.size(); ++r) {
      const auto& res = classes[c].resonances[r];
      const std::string rp = prefix + ".resonances[" + std::to_string(r) + "]";
      if (!(res.center_hz > 0.0 && res.center_hz < nyquist)) {
        bad(rp + ".center_hz", std::to_string(res.center_hz) + " Hz is not below fs/2 = " + std::to_string(nyquist));
      }
      if (!(res.bandwidth_hz > 0.0)) bad(rp + ".bandwidth_hz", "must be positive");
    }
  }
  if (noise_band) {
    if (!(noise_band->lo_hz >= 0.0 && noise_band->lo_hz < noise_band->hi_hz && noise_band->hi_hz <= nyquist)) {
      bad("noise_band", "needs 0 <= lo_hz < hi_hz <= fs/2");
    }
  }
}

inline json CorpusSpec::to_json() const {
  json cls = json::array();
  for (const auto& c : classes) {
    json res = json::array();
    for (const auto& r : c.resonances) {
      res.push_back({{"center_hz", r.center_hz}, {"bandwidth_hz", r.bandwidth_hz}, {"gain", r.gain}});
    }
    cls.push_back({{"fundamental_hz", c.fundamental_hz}, {"resonances", res}});
  }
  json j = {
      {"sample_rate", sample_rate},
      {"n_classes", n_classes},
      {"class_offset", class_offset},
      {"train_utterances", train_utterances},
      {"test_utterances", test_utterances},
      {"train_total_min_s", train_total_min_s},
      {"train_total_max_s", train_total_max_s},
      {"test_min_s", test_min_s},
      {"test_max_s", test_max_s},
      {"classes", cls},
      {"signature_seed", signature_seed},
      {"noise_floor_db", noise_floor_db},
      {"f0_jitter", f0_jitter},
      {"peak", peak},
      {"seed", seed},
  };
  if (noise_band) {
    j["noise_band"] = {{"lo_hz", noise_band->lo_hz}, {"hi_hz", noise_band->hi_hz}, {"snr_db", noise_band->snr_db}};
  }
  return j;
}

inline CorpusSpec CorpusSpec::from_json(const json& j, const std::string& path) {
  CorpusSpec s;
  StrictObject o(j, path);
  o.read("sample_rate", s.sample_rate);
  o.read("n_classes", s.n_classes);
  o.read("class_offset", s.class_offset);
  o.read("train_utterances", s.train_utterances);
  o.read("test_utterances", s.test_utterances);
  o.read("train_total_min_s", s.train_total_min_s);
  o.read("train_total_max_s", s.train_total_max_s);
  o.read("test_min_s", s.test_min_s);
  o.read("test_max_s", s.test_max_s);
  o.read("signature_seed", s.signature_seed);
  o.read("noise_floor_db", s.noise_floor_db);
  o.read("f0_jitter", s.f0_jitter);
  o.read("peak", s.peak);
  o.read("seed", s.seed);
  if (o.has("classes")) {
    const json& arr = o.raw("classes");
    require(arr.is_array(), ErrorKind::Config, o.field("classes") + ": expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      StrictObject c(arr[i], o.field("classes") + "[" + std::to_string(i) + "]");
      ClassSignature sig;
      c.read("fundamental_hz", sig.fundamental_hz);
      if (c.has("resonances")) {
        const json& rs = c.raw("resonances");
        require(rs.is_array(), ErrorKind::Config, c.field("resonances") + ": expected an array");
        for (std::size_t k = 0; k < rs.size(); ++k) {
          StrictObject r(rs[k], c.field("resonances") + "[" + std::to_string(k) + "]");
          Resonance res;
          r.read("center_hz", res.center_hz);
          r.read("bandwidth_hz", res.bandwidth_hz);
          r.read("gain", res.gain);
          r.finish();
          sig.resonances.push_back(res);
        }
      }
      c.finish();
      s.classes.push_back(sig);
    }
  }
  if (o.has("noise_band") && !o.raw("noise_band").is_null()) {
    StrictObject nb(o.raw("noise_band"), o.field("noise_band"));
    NoiseBand band;
    nb.read("lo_hz", band.lo_hz);
    nb.read("hi_hz", band.hi_hz);
    nb.read("snr_db", band.snr_db);
    nb.finish();
    s.noise_band = band;
  }
  o.finish();
  return s;
}

}  // namespace sincnet::audio

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "sincnet/audio/framing.hpp"
#include "sincnet/audio/manifest.hpp"
#include "sincnet/audio/synth.hpp"
#include "sincnet/audio/wav.hpp"

using namespace sincnet;
using namespace sincnet::audio;

namespace {

std::vector<unsigned char> header(std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                                  std::uint32_t rate, const std::vector<std::int16_t>& samples) {
  std::vector<unsigned char> out;
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
  };
  auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v));
    out.push_back(static_cast<unsigned char>(v >> 8));
  };
  const auto data = static_cast<std::uint32_t>(samples.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(36 + data);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(16);
  put16(format);
  put16(channels);
  put32(rate);
  put32(rate * channels * bits / 8);
  put16(static_cast<std::uint16_t>(channels * bits / 8));
  put16(bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(data);
  for (auto s : samples) put16(static_cast<std::uint16_t>(s));
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sincnet_test_audio_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

Waveform tone(std::size_t n, double fs) {
  Waveform w;
  w.sample_rate = fs;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    w.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * t) + 0.2 * std::sin(2.0 * std::numbers::pi * 5000.0 * t);
  }
  return w;
}

// Hann-windowed power at the given frequencies, evaluated directly.
std::vector<double> power_at(const std::vector<double>& x, double fs, const std::vector<double>& freqs) {
  std::vector<double> out;
  const std::size_t n = x.size();
  for (double f : freqs) {
    std::complex<double> acc = 0.0;
    const std::complex<double> step = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
    std::complex<double> z = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
      acc += hann * x[i] * z;
      z *= step;
    }
    out.push_back(std::norm(acc));
  }
  return out;
}

double power(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

}  // namespace

TEST(Wav, ScalesSamples) {
  const auto w = parse_wav(header(1, 1, 16, 16000, {0, 16384, -16384, 32767}));
  ASSERT_EQ(w.samples.size(), 4u);
  EXPECT_EQ(w.samples[0], 0.0);
  EXPECT_EQ(w.samples[1], 0.5);
  EXPECT_EQ(w.samples[2], -0.5);
  EXPECT_EQ(w.samples[3], 32767.0 / 32768.0);
  EXPECT_EQ(w.sample_rate, 16000.0);
}

TEST(Wav, TruncatedInputsAreFormatErrors) {
  const auto full = header(1, 1, 16, 16000, {1, 2, 3, 4});
  for (std::size_t keep : {0u, 5u, 11u, 20u, 30u, 43u, 46u}) {
    std::vector<unsigned char> cut(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(keep));
    EXPECT_EQ(kind_of([&] { parse_wav(cut); }), ErrorKind::Format) << keep;
  }
}

TEST(Wav, RejectsUnsupportedEncodings) {
  EXPECT_EQ(kind_of([] { parse_wav(header(1, 2, 16, 16000, {1, 2})); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([] { parse_wav(header(3, 1, 16, 16000, {1, 2})); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([] { parse_wav(header(1, 1, 8, 16000, {1, 2})); }), ErrorKind::Format);
  try {
    parse_wav(header(1, 2, 16, 16000, {1, 2}));
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("channels"), std::string::npos);
  }
}

TEST(Wav, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { read_wav("/nonexistent/sincnet/file.wav"); }), ErrorKind::Io);
}

TEST(Wav, RoundTripWithinQuantization) {
  const auto dir = temp_dir("wav");
  Waveform w;
  w.sample_rate = 8000.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) w.samples.push_back(u(rng));
  write_wav(dir / "a.wav", w);
  const auto r = read_wav(dir / "a.wav");
  EXPECT_EQ(r.sample_rate, 8000.0);
  ASSERT_EQ(r.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_LE(std::abs(r.samples[i] - w.samples[i]), 1.0 / 32768.0);
  std::filesystem::remove_all(dir);
}

TEST(Framing, Examples) {
  EXPECT_EQ(chunk_count(16000, 3200, 3040), 5u);
  EXPECT_EQ(chunk_count(3200, 3200, 3040), 1u);
  EXPECT_EQ(chunk_count(16000, 3200, 160), 81u);
  EXPECT_EQ(chunk_count(3199, 3200, 160), 0u);

  Waveform w;
  w.samples.assign(16000, 0.0);
  w.label = 4;
  w.utterance_id = "u";
  const auto s = frame_signal_ms(w);
  EXPECT_EQ(s.chunk_length, 3200u);
  EXPECT_EQ(s.hop, 3040u);
  EXPECT_EQ(s.chunks.size(), 5u);
  EXPECT_EQ(frame_signal_ms(w, 200.0, 10.0, 160).chunks.size(), 81u);
  for (const auto& c : s.chunks) {
    EXPECT_EQ(c.label, 4);
    EXPECT_EQ(c.utterance_id, "u");
  }
}

TEST(Framing, ChunkStartsAndContents) {
  Waveform w;
  for (int i = 0; i < 50; ++i) w.samples.push_back(i);
  const auto s = frame_signal(w, 10, 7);
  ASSERT_EQ(s.chunks.size(), 6u);
  for (std::size_t k = 0; k < s.chunks.size(); ++k) {
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(s.chunks[k].samples[i], static_cast<double>(7 * k + i));
  }
}

TEST(Framing, ShortUtteranceIsSkipped) {
  Waveform w;
  w.samples.assign(100, 0.0);
  EXPECT_TRUE(frame_signal(w, 101, 10).chunks.empty());
  EXPECT_THROW(frame_signal(w, 10, 0), Error);
}

TEST(Framing, CountPropertyRandomized) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t chunk = 1 + rng() % 300;
    const std::size_t hop = 1 + rng() % 300;
    const std::size_t n = rng() % 2000;
    Waveform w;
    w.samples.assign(n, 0.0);
    const auto s = frame_signal(w, chunk, hop);
    // Oracle: count starts whose window fits.
    std::size_t expect = 0;
    for (std::size_t start = 0; start + chunk <= n; start += hop) ++expect;
    ASSERT_EQ(s.chunks.size(), expect) << n << " " << chunk << " " << hop;
    ASSERT_EQ(chunk_count(n, chunk, hop), expect);
  }
}

TEST(Synth, FundamentalPeak) {
  CorpusSpec spec;
  spec.n_classes = 2;
  spec.train_utterances = 2;
  spec.test_utterances = 0;
  spec.seed = 5;
  ClassSignature a, b;
  a.fundamental_hz = 130.0;
  b.fundamental_hz = 230.0;
  a.resonances = b.resonances = {{700.0, 100.0, 4.0}, {1500.0, 120.0, 4.0}, {2800.0, 150.0, 4.0}};
  spec.classes = {a, b};
  const auto corpus = synth_class_corpus(spec);
  for (const auto& u : corpus.train) {
    std::vector<double> x(u.samples.begin(), u.samples.begin() + 16000);
    std::vector<double> freqs;
    for (double f = 50.0; f <= 400.0; f += 0.5) freqs.push_back(f);
    const auto p = power_at(x, u.sample_rate, freqs);
    const auto best = std::max_element(p.begin(), p.end()) - p.begin();
    const double expect = u.label == 0 ? 130.0 : 230.0;
    EXPECT_NEAR(freqs[static_cast<std::size_t>(best)], expect, 5.0) << u.utterance_id;
  }
}

TEST(Synth, DurationsAndDeterminism) {
  CorpusSpec spec;
  spec.n_classes = 3;
  spec.seed = 42;
  const auto a = synth_class_corpus(spec);
  const auto b = synth_class_corpus(spec);
  ASSERT_EQ(a.train.size(), 15u);
  ASSERT_EQ(a.test.size(), 9u);
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].samples, b.train[i].samples);
  for (std::size_t i = 0; i < a.test.size(); ++i) EXPECT_EQ(a.test[i].samples, b.test[i].samples);

  std::map<int, double> train_total;
  for (const auto& u : a.train) train_total[u.label] += u.duration_s();
  for (const auto& [cls, total] : train_total) {
    EXPECT_GE(total, 12.0 - 1e-3) << cls;
    EXPECT_LE(total, 15.0 + 1e-3) << cls;
  }
  for (const auto& u : a.test) {
    EXPECT_GE(u.duration_s(), 2.0 - 1e-3);
    EXPECT_LE(u.duration_s(), 6.0 + 1e-3);
  }

  spec.seed = 43;
  EXPECT_NE(synth_class_corpus(spec).train[0].samples, a.train[0].samples);
}

TEST(Synth, DisjointIdsAndPeak) {
  CorpusSpec spec;
  spec.n_classes = 4;
  spec.noise_band = NoiseBand{};
  const auto c = synth_class_corpus(spec);
  std::set<std::string> train_ids, test_ids;
  for (const auto& u : c.train) train_ids.insert(u.utterance_id);
  for (const auto& u : c.test) test_ids.insert(u.utterance_id);
  EXPECT_EQ(train_ids.size(), c.train.size());
  EXPECT_EQ(test_ids.size(), c.test.size());
  for (const auto& id : test_ids) EXPECT_EQ(train_ids.count(id), 0u) << id;
  for (const auto* set : {&c.train, &c.test}) {
    for (const auto& u : *set) {
      double peak = 0.0;
      for (double v : u.samples) peak = std::max(peak, std::abs(v));
      EXPECT_NEAR(peak, 0.95, 1e-12);
    }
  }
}

TEST(Synth, ClassOffsetShiftsLabels) {
  CorpusSpec spec;
  spec.n_classes = 2;
  spec.class_offset = 100;
  const auto c = synth_class_corpus(spec);
  for (const auto& u : c.train) EXPECT_TRUE(u.label == 100 || u.label == 101);
}

TEST(Synth, InvalidSpecNamesField) {
  CorpusSpec spec;
  spec.n_classes = 1;
  ClassSignature s;
  s.resonances = {{9000.0, 100.0, 4.0}};
  spec.classes = {s};
  try {
    synth_class_corpus(spec);
    ADD_FAILURE() << "accepted resonance above fs/2";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidSpec);
    EXPECT_NE(std::string(e.what()).find("classes[0].resonances[0].center_hz"), std::string::npos) << e.what();
  }
  CorpusSpec bad;
  bad.test_min_s = 0.1;
  bad.test_max_s = 0.15;
  EXPECT_EQ(kind_of([&] { synth_class_corpus(bad); }), ErrorKind::InvalidSpec);
}

TEST(Synth, SpecJsonRoundTripAndStrictness) {
  CorpusSpec spec;
  spec.n_classes = 3;
  spec.noise_band = NoiseBand{1000.0, 1200.0, 5.0};
  spec.classes = {ClassSignature{}, ClassSignature{}, ClassSignature{}};
  const auto back = CorpusSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
  auto j = spec.to_json();
  j["typo_field"] = 1;
  EXPECT_EQ(kind_of([&] { CorpusSpec::from_json(j); }), ErrorKind::Config);
}

TEST(CorruptBand, HugeSnrLeavesSignal) {
  const auto w = tone(8000, 16000.0);
  const auto r = corrupt_band(w, 2000.0, 2500.0, 100.0, 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) worst = std::max(worst, std::abs(r.samples[i] - w.samples[i]));
  EXPECT_LT(worst, 1e-4);
}

TEST(CorruptBand, AchievedSnr) {
  const auto w = tone(16000, 16000.0);
  for (double snr : {-5.0, 0.0, 10.0, 30.0}) {
    const auto r = corrupt_band_detailed(w, 2000.0, 2500.0, snr, 7);
    const double achieved = 10.0 * std::log10(power(w.samples) / power(r.added_noise));
    EXPECT_NEAR(achieved, snr, 0.1);
  }
}

TEST(CorruptBand, OriginalComponentUntouched) {
  const auto w = tone(4000, 16000.0);
  const auto r = corrupt_band_detailed(w, 2000.0, 2500.0, 0.0, 3);
  for (std::size_t i = 0; i < w.samples.size(); ++i) ASSERT_EQ(r.output.samples[i], w.samples[i] + r.added_noise[i]);
}

TEST(CorruptBand, NoiseStaysInBand) {
  const auto w = tone(4096, 16000.0);
  const auto r = corrupt_band_detailed(w, 2000.0, 2500.0, 0.0, 21);
  std::vector<double> in_f, out_f;
  for (double f = 2000.0; f <= 2500.0; f += 16000.0 / 4096.0) in_f.push_back(f);
  for (double f = 3000.0; f <= 8000.0; f += 16000.0 / 4096.0) out_f.push_back(f);
  double in_p = 0.0, out_p = 0.0;
  for (double p : power_at(r.added_noise, 16000.0, in_f)) in_p += p;
  for (double p : power_at(r.added_noise, 16000.0, out_f)) out_p += p;
  EXPECT_LE(10.0 * std::log10(out_p / in_p), -40.0);
}

TEST(CorruptBand, InvalidBand) {
  const auto w = tone(1000, 16000.0);
  EXPECT_EQ(kind_of([&] { corrupt_band(w, 2500.0, 2000.0, 0.0, 1); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([&] { corrupt_band(w, 2000.0, 9000.0, 0.0, 1); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([&] { corrupt_band(w, -1.0, 100.0, 0.0, 1); }), ErrorKind::InvalidSpec);
}

TEST(Manifest, RoundTripAndRelativePaths) {
  const auto dir = temp_dir("manifest");
  Waveform w = tone(400, 8000.0);
  write_wav(dir / "x.wav", w);
  std::vector<ManifestEntry> entries{{"x", "x.wav", 3, "train", 0.05}, {"y", "x.wav", 4, "test", 0.05}};
  write_manifest(dir / "m.jsonl", entries);
  const auto back = read_manifest(dir / "m.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].utterance_id, "y");
  EXPECT_EQ(back[1].class_id, 4);
  EXPECT_EQ(back[1].split, "test");
  const auto train = load_split(dir / "m.jsonl", "train");
  ASSERT_EQ(train.size(), 1u);
  EXPECT_EQ(train[0].label, 3);
  EXPECT_EQ(train[0].samples.size(), 400u);
  EXPECT_EQ(load_split(dir / "m.jsonl", "all").size(), 2u);
  std::filesystem::remove_all(dir);
}

TEST(Manifest, StrictParsing) {
  const auto dir = temp_dir("manifest_bad");
  {
    std::ofstream os(dir / "m.jsonl");
    os << R"({"utterance_id":"a","path":"a.wav","class":0,"split":"train","duration_s":1})" << "\n";
    os << R"({"utterance_id":"b","path":"b.wav","class":0,"split":"train","extra":1})" << "\n";
  }
  try {
    read_manifest(dir / "m.jsonl");
    ADD_FAILURE() << "unknown key accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  {
    std::ofstream os(dir / "m.jsonl");
    os << "{not json\n";
  }
  EXPECT_EQ(kind_of([&] { read_manifest(dir / "m.jsonl"); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([&] { read_manifest(dir / "missing.jsonl"); }), ErrorKind::Io);
  std::filesystem::remove_all(dir);
}

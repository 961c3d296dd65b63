#pragma once

// RIFF/WAVE reader and writer, 16-bit PCM mono only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "sincnet/error.hpp"

namespace sincnet::audio {

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;
  int label = 0;
  std::string utterance_id;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

/// Parses an in-memory WAV file. `where` only labels error messages.
inline Waveform parse_wav(const std::vector<unsigned char>& bytes, const std::string& where = "<memory>") {
  const auto bad = [&](const std::string& why) { fail(ErrorKind::Format, where + ": " + why); };
  if (bytes.size() < 12) bad("truncated RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    bad("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = detail::le32(hdr + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) bad("truncated fmt chunk");
      const std::uint16_t format = detail::le16(bytes.data() + body);
      channels = detail::le16(bytes.data() + body + 2);
      rate = detail::le32(bytes.data() + body + 4);
      bits = detail::le16(bytes.data() + body + 14);
      if (format != 1) bad("unsupported encoding (format tag " + std::to_string(format) + "); only PCM is accepted");
      if (channels != 1) bad("expected mono audio, found " + std::to_string(channels) + " channels");
      if (bits != 16) bad("expected 16-bit samples, found " + std::to_string(bits) + "-bit");
      if (rate == 0) bad("sample rate is zero");
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) bad("data chunk precedes fmt chunk");
      if (body + size > bytes.size()) bad("truncated data chunk");
      if (size % 2 != 0) bad("data chunk length is not a whole number of samples");
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(detail::le16(bytes.data() + body + 2 * i));
        w.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      if (w.samples.empty()) bad("no samples");
      return w;
    }
    pos = body + size + (size & 1u);
  }
  fail(ErrorKind::Format, where + ": " + (have_fmt ? "missing data chunk" : "missing fmt chunk"));
}

inline Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_wav(bytes, path.string());
}

/// Rounds to the nearest 16-bit code, saturating at the rails.
inline std::int16_t quantize_pcm16(double v) {
  const double scaled = std::round(v * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

inline std::vector<unsigned char> encode_wav(const Waveform& w) {
  require(w.sample_rate > 0.0, ErrorKind::InvalidInput, "waveform sample rate must be positive");
  const auto rate = static_cast<std::uint32_t>(std::llround(w.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put32(out, 16);
  detail::put16(out, 1);  // PCM
  detail::put16(out, 1);  // mono
  detail::put32(out, rate);
  detail::put32(out, rate * 2);
  detail::put16(out, 2);
  detail::put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put32(out, data_bytes);
  for (double v : w.samples) detail::put16(out, static_cast<std::uint16_t>(quantize_pcm16(v)));
  return out;
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto bytes = encode_wav(w);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(os), ErrorKind::Io, "failed writing '" + path.string() + "'");
}

}  // namespace sincnet::audio

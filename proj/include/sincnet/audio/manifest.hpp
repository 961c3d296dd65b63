#pragma once

// Corpus manifest: JSON lines {utterance_id, path, class, split, duration_s}.
// Relative paths are resolved against the manifest's own directory.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sincnet/audio/wav.hpp"
#include "sincnet/json_util.hpp"

namespace sincnet::audio {

struct ManifestEntry {
  std::string utterance_id;
  std::string path;
  int class_id = 0;
  std::string split;
  double duration_s = 0.0;
};

inline json to_json(const ManifestEntry& e) {
  return {{"utterance_id", e.utterance_id},
          {"path", e.path},
          {"class", e.class_id},
          {"split", e.split},
          {"duration_s", e.duration_s}};
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  for (const auto& e : entries) os << to_json(e).dump() << '\n';
  require(static_cast<bool>(os), ErrorKind::Io, "failed writing '" + path.string() + "'");
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot open manifest '" + path.string() + "'");
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      StrictObject o(j, where);
      ManifestEntry e;
      o.read("utterance_id", e.utterance_id);
      o.read("path", e.path);
      o.read("class", e.class_id);
      o.read("split", e.split);
      o.read("duration_s", e.duration_s);
      o.finish();
      require(!e.utterance_id.empty() && !e.path.empty(), ErrorKind::Format,
              where + ": utterance_id and path are required");
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      fail(ErrorKind::Format, where + ": " + ex.what());
    } catch (const Error& ex) {
      fail(ErrorKind::Format, ex.what());
    }
  }
  return out;
}

inline Waveform load_entry(const ManifestEntry& e, const std::filesystem::path& manifest_path) {
  std::filesystem::path p(e.path);
  if (p.is_relative()) p = manifest_path.parent_path() / p;
  Waveform w = read_wav(p);
  w.label = e.class_id;
  w.utterance_id = e.utterance_id;
  return w;
}

/// Loads every entry of a split ("all" keeps everything).
inline std::vector<Waveform> load_split(const std::filesystem::path& manifest_path, const std::string& split) {
  std::vector<Waveform> out;
  for (const auto& e : read_manifest(manifest_path)) {
    if (split == "all" || e.split == split) out.push_back(load_entry(e, manifest_path));
  }
  return out;
}

}  // namespace sincnet::audio

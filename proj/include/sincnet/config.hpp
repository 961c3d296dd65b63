#pragma once

// Experiment configuration: corpus, network and training settings in one
// JSON or TOML file. Unknown keys are rejected at every level.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <toml.hpp>

#include "sincnet/audio/synth.hpp"
#include "sincnet/json_util.hpp"
#include "sincnet/nn/network.hpp"

namespace sincnet {

struct TrainSettings {
  std::size_t epochs = 30;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  double heldout_fraction = 0.2;

  json to_json() const {
    return {{"epochs", epochs}, {"checkpoint_every", checkpoint_every}, {"heldout_fraction", heldout_fraction}};
  }
  static TrainSettings from_json(const json& j, const std::string& path = "train") {
    TrainSettings t;
    StrictObject o(j, path);
    o.read("epochs", t.epochs);
    o.read("checkpoint_every", t.checkpoint_every);
    o.read("heldout_fraction", t.heldout_fraction);
    o.finish();
    require(t.heldout_fraction >= 0.0 && t.heldout_fraction < 1.0, ErrorKind::Config,
            o.field("heldout_fraction") + " must be in [0, 1)");
    return t;
  }
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  audio::CorpusSpec corpus;
  nn::NetworkConfig network;
  TrainSettings train;

  /// One seed drives corpus synthesis, initialization and shuffling.
  void set_seed(std::uint64_t s) {
    seed = s;
    corpus.seed = s;
    network.seed = s;
  }

  json to_json() const {
    return {{"seed", seed}, {"corpus", corpus.to_json()}, {"network", network.to_json()}, {"train", train.to_json()}};
  }

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    StrictObject o(j, "");
    if (o.has("corpus")) c.corpus = audio::CorpusSpec::from_json(o.raw("corpus"), "corpus");
    if (o.has("network")) c.network = nn::NetworkConfig::from_json(o.raw("network"), "network");
    if (o.has("train")) c.train = TrainSettings::from_json(o.raw("train"), "train");
    // The network follows the corpus sample rate unless it sets its own.
    const bool network_rate = o.has("network") && o.raw("network").is_object() && o.raw("network").contains("sample_rate");
    if (o.has("corpus") && !network_rate) c.network.sample_rate = c.corpus.sample_rate;
    std::optional<std::uint64_t> seed;
    if (o.has("seed")) {
      std::uint64_t s = 0;
      o.read("seed", s);
      seed = s;
    }
    o.finish();
    if (seed) c.set_seed(*seed);
    else c.seed = c.network.seed;
    return c;
  }
};

inline json toml_to_json(const std::string& text, const std::string& where) {
  try {
    const toml::table tbl = toml::parse(text, where);
    std::ostringstream os;
    os << toml::json_formatter{tbl};
    return json::parse(os.str());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << where << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    fail(ErrorKind::Config, msg.str());
  }
}

/// Parses JSON when the file has a .json extension or starts with '{';
/// TOML otherwise.
inline json read_config_document(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  const bool is_json = path.extension() == ".json" || (first != std::string::npos && text[first] == '{');
  if (!is_json) return toml_to_json(text, path.string());
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  try {
    return ExperimentConfig::from_json(read_config_document(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

/// Writes the materialized config as config.json in out_dir.
inline void echo_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto path = out_dir / "config.json";
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write '" + path.string() + "'");
  os << cfg.to_json().dump(2) << '\n';
}

}  // namespace sincnet

#pragma once

// Checkpoint container:
//   8 bytes  magic "SINCCKPT"
//   u32 LE   format version
//   u64 LE   header length N
//   N bytes  JSON header (config echo, counters, tensor directory, metadata)
//   payload  float64 LE values of every tensor, in directory order
// Doubles are stored as raw bits, so save -> load is bit-exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sincnet/nn/network.hpp"

namespace sincnet::nn {

inline constexpr char kCheckpointMagic[8] = {'S', 'I', 'N', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct CheckpointMeta {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  json extra = json::object();  // training-side metadata (class ids, frontend info)
};

struct LoadedCheckpoint {
  Network network;
  OptimizerState optimizer;
  CheckpointMeta meta;
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

template <class T>
T read_pod(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<std::size_t>(is.gcount()) == sizeof(T), ErrorKind::Format, path + ": truncated checkpoint");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, Network& net, const OptimizerState& opt,
                            const CheckpointMeta& meta) {
  auto tensors = net.state_tensors();
  json directory = json::array();
  for (const auto& [name, t] : tensors) directory.push_back({{"name", name}, {"shape", t->shape()}});
  json header = {
      {"format", "sincnet-checkpoint"},
      {"version", kCheckpointVersion},
      {"config", net.config().to_json()},
      {"seed", net.config().seed},
      {"epoch", meta.epoch},
      {"step", meta.step},
      {"tensors", directory},
      {"optimizer",
       {{"lr", opt.settings.lr},
        {"alpha", opt.settings.alpha},
        {"eps", opt.settings.eps},
        {"steps", opt.steps},
        {"accumulators", opt.square_avg.size()}}},
      {"meta", meta.extra},
  };
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) {
    os.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  for (const auto& acc : opt.square_avg) {
    detail::write_u64(os, acc.size());
    os.write(reinterpret_cast<const char*>(acc.data()), static_cast<std::streamsize>(acc.size() * sizeof(double)));
  }
  require(static_cast<bool>(os), ErrorKind::Io, "failed writing checkpoint '" + path.string() + "'");
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot open checkpoint '" + where + "'");
  char magic[8];
  is.read(magic, 8);
  require(is.gcount() == 8 && std::memcmp(magic, kCheckpointMagic, 8) == 0, ErrorKind::Format,
          where + ": not a checkpoint (bad magic)");
  const auto version = detail::read_pod<std::uint32_t>(is, where);
  require(version == kCheckpointVersion, ErrorKind::Format,
          where + ": unsupported checkpoint version " + std::to_string(version));
  const auto header_len = detail::read_pod<std::uint64_t>(is, where);
  require(header_len < (1ull << 30), ErrorKind::Format, where + ": implausible header length");
  std::string text(header_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(header_len));
  require(static_cast<std::uint64_t>(is.gcount()) == header_len, ErrorKind::Format, where + ": truncated header");

  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, where + ": corrupt header: " + e.what());
  }

  try {
    NetworkConfig config = NetworkConfig::from_json(header.at("config"));
    Network net(config);
    auto tensors = net.state_tensors();
    const json& directory = header.at("tensors");
    require(directory.size() == tensors.size(), ErrorKind::Format,
            where + ": checkpoint has " + std::to_string(directory.size()) + " tensors, architecture expects " +
                std::to_string(tensors.size()));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& [name, t] = tensors[i];
      require(directory[i].at("name").get<std::string>() == name &&
                  directory[i].at("shape").get<Shape>() == t->shape(),
              ErrorKind::Format, where + ": tensor '" + name + "' does not match the architecture");
      is.read(reinterpret_cast<char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
      require(static_cast<std::size_t>(is.gcount()) == t->size() * sizeof(double), ErrorKind::Format,
              where + ": truncated tensor data");
    }

    OptimizerState opt;
    const json& o = header.at("optimizer");
    opt.settings = {o.at("lr").get<double>(), o.at("alpha").get<double>(), o.at("eps").get<double>()};
    opt.steps = o.at("steps").get<std::size_t>();
    const auto n_acc = o.at("accumulators").get<std::size_t>();
    auto params = net.parameters();
    require(n_acc == 0 || n_acc == params.size(), ErrorKind::Format, where + ": optimizer state arity mismatch");
    for (std::size_t i = 0; i < n_acc; ++i) {
      const auto n = detail::read_pod<std::uint64_t>(is, where);
      require(n == params[i]->value.size(), ErrorKind::Format, where + ": optimizer accumulator size mismatch");
      Tensor acc(params[i]->value.shape());
      is.read(reinterpret_cast<char*>(acc.data()), static_cast<std::streamsize>(n * sizeof(double)));
      require(static_cast<std::uint64_t>(is.gcount()) == n * sizeof(double), ErrorKind::Format,
              where + ": truncated optimizer state");
      opt.square_avg.push_back(std::move(acc));
    }

    CheckpointMeta meta{header.at("epoch").get<std::uint64_t>(), header.at("step").get<std::uint64_t>(),
                        header.value("meta", json::object())};
    return {std::move(net), std::move(opt), std::move(meta)};
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, where + ": corrupt header: " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    fail(ErrorKind::Format, where + ": " + e.what());
  }
}

}  // namespace sincnet::nn

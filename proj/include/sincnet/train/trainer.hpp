#pragma once

// Minibatch RMSprop training of the classifier on framed utterances, with a
// per-class held-out split for frame-error tracking. Every random choice is
// derived from (seed, epoch) so a run, or a run resumed from a checkpoint,
// reproduces bit for bit.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sincnet/audio/framing.hpp"
#include "sincnet/nn/checkpoint.hpp"
#include "sincnet/nn/network.hpp"
#include "sincnet/train/metrics.hpp"

namespace sincnet::train {

/// Framed chunks stacked as one [N, 1, T] tensor.
struct ChunkSet {
  Tensor inputs;
  std::vector<std::size_t> labels;           // class index per chunk
  std::vector<std::size_t> utterance;        // utterance index per chunk
  std::vector<std::string> utterance_ids;
  std::vector<std::size_t> utterance_labels;

  std::size_t size() const { return labels.size(); }
};

/// Maps global class ids to contiguous output indices (sorted order).
class ClassMap {
 public:
  ClassMap() = default;
  explicit ClassMap(std::vector<int> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }
  static ClassMap from_utterances(const std::vector<audio::Waveform>& utts) {
    std::vector<int> ids;
    for (const auto& u : utts) ids.push_back(u.label);
    return ClassMap(std::move(ids));
  }
  std::size_t size() const { return ids_.size(); }
  const std::vector<int>& ids() const { return ids_; }
  bool contains(int id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }
  std::size_t index_of(int id) const {
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    require(it != ids_.end() && *it == id, ErrorKind::InvalidLabel,
            "class " + std::to_string(id) + " is not among the network's classes");
    return static_cast<std::size_t>(it - ids_.begin());
  }

 private:
  std::vector<int> ids_;
};

inline ChunkSet make_chunk_set(const std::vector<audio::Waveform>& utts, const ClassMap& classes,
                               std::size_t chunk_length, std::size_t hop) {
  ChunkSet set;
  std::vector<double> data;
  for (const auto& u : utts) {
    const auto stream = audio::frame_signal(u, chunk_length, hop);
    if (stream.chunks.empty()) continue;
    const std::size_t uidx = set.utterance_ids.size();
    set.utterance_ids.push_back(u.utterance_id);
    set.utterance_labels.push_back(classes.index_of(u.label));
    for (const auto& c : stream.chunks) {
      data.insert(data.end(), c.samples.begin(), c.samples.end());
      set.labels.push_back(classes.index_of(u.label));
      set.utterance.push_back(uidx);
    }
  }
  set.inputs = Tensor({set.labels.size(), 1, chunk_length}, std::move(data));
  return set;
}

inline Tensor gather_rows(const Tensor& inputs, const std::vector<std::size_t>& order, std::size_t first,
                          std::size_t count) {
  const std::size_t stride = inputs.size() / inputs.dim(0);
  Shape shape = inputs.shape();
  shape[0] = count;
  Tensor out(shape);
  for (std::size_t i = 0; i < count; ++i) {
    const double* src = inputs.data() + order[first + i] * stride;
    std::copy(src, src + stride, out.data() + i * stride);
  }
  return out;
}

/// Inference-mode softmax posteriors for every chunk, in minibatches.
inline Tensor predict_posteriors(nn::Network& net, const Tensor& inputs, std::size_t batch_size = 128) {
  const std::size_t n = inputs.dim(0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Tensor out;
  std::vector<double> data;
  std::size_t classes = 0;
  for (std::size_t first = 0; first < n; first += batch_size) {
    const std::size_t count = std::min(batch_size, n - first);
    const Tensor p = nn::softmax(net.forward(gather_rows(inputs, order, first, count), false));
    classes = p.dim(1);
    data.insert(data.end(), p.values().begin(), p.values().end());
  }
  return Tensor({n, classes}, std::move(data));
}

inline std::vector<UtterancePosteriors> group_by_utterance(const ChunkSet& set, const Tensor& posteriors) {
  const std::size_t classes = posteriors.dim(1);
  std::vector<std::vector<double>> rows(set.utterance_ids.size());
  std::vector<std::size_t> counts(set.utterance_ids.size(), 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::size_t u = set.utterance[i];
    rows[u].insert(rows[u].end(), posteriors.data() + i * classes, posteriors.data() + (i + 1) * classes);
    ++counts[u];
  }
  std::vector<UtterancePosteriors> out;
  for (std::size_t u = 0; u < rows.size(); ++u) {
    out.push_back({Tensor({counts[u], classes}, std::move(rows[u])), set.utterance_labels[u]});
  }
  return out;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double heldout_fer = 0.0;
  double wall_s = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

inline std::string epoch_log_header() { return "epoch,train_loss,heldout_fer,wall_s"; }

inline std::string to_csv_row(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.6f", r.epoch, r.train_loss, r.heldout_fer, r.wall_s);
  return buf;
}

struct TrainOptions {
  std::size_t epochs = 30;
  double heldout_fraction = 0.2;
  bool timing = true;
};

struct TrainData {
  ClassMap classes;
  ChunkSet train;
  ChunkSet heldout;
};

/// Splits each class's utterances into train and held-out (a seeded
/// round(fraction * n) per class, at least one when the class has two or
/// more) and frames both.
inline TrainData prepare_data(const nn::NetworkConfig& cfg, const std::vector<audio::Waveform>& utts,
                              double heldout_fraction) {
  require(!utts.empty(), ErrorKind::InvalidInput, "training corpus is empty");
  require(heldout_fraction >= 0.0 && heldout_fraction < 1.0, ErrorKind::Config, "heldout_fraction must be in [0, 1)");
  for (const auto& u : utts) {
    require(u.sample_rate == cfg.sample_rate, ErrorKind::InvalidInput,
            "utterance '" + u.utterance_id + "' has sample rate " + std::to_string(u.sample_rate) +
                " but the network expects " + std::to_string(cfg.sample_rate));
  }
  TrainData data;
  data.classes = ClassMap::from_utterances(utts);

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < utts.size(); ++i) by_class[utts[i].label].push_back(i);
  std::vector<audio::Waveform> train, heldout;
  for (auto& [cls, idx] : by_class) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x4e1du,
                      static_cast<std::uint32_t>(cls)};
    std::mt19937_64 rng(seq);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_hold = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(idx.size())));
    if (heldout_fraction > 0.0 && n_hold == 0 && idx.size() >= 2) n_hold = 1;
    if (n_hold >= idx.size()) n_hold = idx.size() - 1;
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_hold), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) (k < n_hold ? heldout : train).push_back(utts[idx[k]]);
  }
  data.train = make_chunk_set(train, data.classes, cfg.chunk_samples(), cfg.hop());
  data.heldout = make_chunk_set(heldout, data.classes, cfg.chunk_samples(), cfg.hop());
  require(data.train.size() >= 2, ErrorKind::InvalidInput, "training corpus yields fewer than 2 chunks");
  return data;
}

/// Network, optimizer and counters: everything a checkpoint restores.
struct TrainSession {
  nn::Network network;
  nn::OptimizerState optimizer;
  ClassMap classes;
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::set<std::size_t> nyquist_reported;

  static TrainSession start(nn::NetworkConfig cfg, const ClassMap& classes) {
    cfg.n_classes = classes.size();
    nn::OptimizerState opt;
    opt.settings = cfg.optimizer;
    return {nn::Network(std::move(cfg)), std::move(opt), classes, 0, 0, {}};
  }

  nn::CheckpointMeta meta() {
    json extra = {{"class_ids", classes.ids()},
                  {"frontend", nn::to_string(network.config().frontend)},
                  {"first_layer_params", network.first_layer_parameter_count()}};
    return {epoch, step, extra};
  }

  void save(const std::filesystem::path& path) { nn::save_checkpoint(path, network, optimizer, meta()); }

  static TrainSession resume(const std::filesystem::path& path) {
    auto ck = nn::load_checkpoint(path);
    ClassMap classes(ck.meta.extra.value("class_ids", std::vector<int>{}));
    require(classes.size() == ck.network.config().n_classes, ErrorKind::Format,
            path.string() + ": class list does not match the output layer");
    return {std::move(ck.network), std::move(ck.optimizer), classes, ck.meta.epoch, ck.meta.step, {}};
  }
};

struct TrainHooks {
  std::function<void(TrainSession&)> on_step;
  std::function<void(const EpochRecord&, TrainSession&)> on_epoch;
};

inline double heldout_fer(nn::Network& net, const ChunkSet& heldout, std::size_t batch_size) {
  if (heldout.size() == 0) return 0.0;
  return frame_error_rate(predict_posteriors(net, heldout.inputs, batch_size), heldout.labels);
}

/// One optimizer step on a minibatch; returns the batch loss.
inline double train_step(TrainSession& s, const Tensor& batch, const std::vector<std::size_t>& labels) {
  s.network.set_step(s.step);
  const Tensor logits = s.network.forward(batch, true);
  const auto loss = nn::softmax_cross_entropy(logits, labels);
  s.network.backward(loss.grad_logits);
  std::vector<Tensor*> params;
  std::vector<const Tensor*> grads;
  for (auto* p : s.network.parameters()) {
    params.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  nn::rmsprop_step(params, grads, s.optimizer);
  ++s.step;
  if (s.network.is_sinc()) {
    for (std::size_t f : sinc_layer::nyquist_violations(s.network.sinc_params())) {
      if (s.nyquist_reported.insert(f).second) {
        std::clog << "note: step " << s.step << ": filter " << f << " upper cutoff above Nyquist\n";
      }
    }
  }
  return loss.loss;
}

/// Minibatch boundaries for n shuffled items. A trailing batch of one (which
/// batch norm cannot train on) is merged into the previous batch.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t first = 0; first < n; first += batch_size) out.emplace_back(first, std::min(batch_size, n - first));
  if (out.size() >= 2 && out.back().second == 1) {
    out.pop_back();
    out.back().second += 1;
  }
  return out;
}

inline std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu,
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Runs epochs session.epoch+1 .. session.epoch+n_epochs.
inline std::vector<EpochRecord> run_epochs(TrainSession& s, const TrainData& data, std::size_t n_epochs,
                                           const TrainOptions& opts, const TrainHooks& hooks = {}) {
  require(data.classes.ids() == s.classes.ids(), ErrorKind::InvalidInput,
          "corpus classes do not match the network's output layer");
  const auto& cfg = s.network.config();
  std::vector<EpochRecord> log;
  for (std::size_t e = 0; e < n_epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t epoch = s.epoch + 1;
    const auto order = epoch_order(cfg.seed, epoch, data.train.size());
    double loss_sum = 0.0;
    for (const auto& [first, count] : batch_ranges(order.size(), cfg.batch_size)) {
      const Tensor batch = gather_rows(data.train.inputs, order, first, count);
      std::vector<std::size_t> labels(count);
      for (std::size_t i = 0; i < count; ++i) labels[i] = data.train.labels[order[first + i]];
      loss_sum += train_step(s, batch, labels) * static_cast<double>(count);
      if (hooks.on_step) hooks.on_step(s);
    }
    s.epoch = epoch;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(data.train.size());
    rec.heldout_fer = heldout_fer(s.network, data.heldout, cfg.batch_size);
    if (opts.timing) rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec, s);
  }
  return log;
}

}  // namespace sincnet::train

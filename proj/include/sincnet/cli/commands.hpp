#pragma once

// The sincnet command line: gen-corpus, train, inspect-filters, verify, eval.
// run_cli() is the whole program; tools/sincnet.cpp only forwards argv.

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sincnet/audio/manifest.hpp"
#include "sincnet/audio/synth.hpp"
#include "sincnet/config.hpp"
#include "sincnet/export.hpp"
#include "sincnet/train/trainer.hpp"
#include "sincnet/train/verification.hpp"

namespace sincnet::cli {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

/// Exclusive claim on an output directory for the lifetime of a command.
class OutDirLock {
 public:
  explicit OutDirLock(const fs::path& dir) : path_(dir / ".sincnet.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    require(fd_ >= 0, ErrorKind::Io,
            "output directory '" + dir.string() + "' is locked by another run (remove " + path_.string() +
                " if stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~OutDirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  OutDirLock(const OutDirLock&) = delete;
  OutDirLock& operator=(const OutDirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

inline ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig cfg;
  if (!g.config.empty()) cfg = load_experiment_config(g.config);
  if (g.seed) cfg.set_seed(*g.seed);
  return cfg;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write '" + path.string() + "'");
  os << text;
  require(static_cast<bool>(os), ErrorKind::Io, "failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// gen-corpus

inline void cmd_gen_corpus(const GlobalOptions& g) {
  const ExperimentConfig cfg = resolve_config(g);
  cfg.corpus.validate();
  const fs::path out(g.out);
  OutDirLock lock(out);
  const auto corpus = audio::synth_class_corpus(cfg.corpus);
  fs::create_directories(out / "wav");
  std::vector<audio::ManifestEntry> entries;
  const auto emit = [&](const std::vector<audio::Waveform>& utts, const std::string& split) {
    for (const auto& w : utts) {
      const std::string rel = "wav/" + w.utterance_id + ".wav";
      audio::write_wav(out / rel, w);
      entries.push_back({w.utterance_id, rel, w.label, split, w.duration_s()});
    }
  };
  emit(corpus.train, "train");
  emit(corpus.test, "test");
  audio::write_manifest(out / "manifest.jsonl", entries);
  echo_config(cfg, out);
  std::cout << "wrote " << entries.size() << " utterances to " << (out / "manifest.jsonl").string() << '\n';
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string manifest;
  std::string split = "train";
  std::optional<std::string> frontend;
  std::optional<std::size_t> epochs;
  bool no_timing = false;
};

inline std::string checkpoint_name(std::size_t epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "epoch_%04zu.ckpt", epoch);
  return buf;
}

inline void cmd_train(const GlobalOptions& g, const TrainArgs& a) {
  ExperimentConfig cfg = resolve_config(g);
  if (a.frontend) {
    try {
      cfg.network.frontend = nn::frontend_from_string(*a.frontend);
    } catch (const Error& e) {
      fail(ErrorKind::Config, std::string("--frontend: ") + e.what());
    }
  }
  if (a.epochs) cfg.train.epochs = *a.epochs;
  require(fs::exists(a.manifest), ErrorKind::Io, "manifest '" + a.manifest + "' does not exist");
  const auto utts = audio::load_split(a.manifest, a.split);
  require(!utts.empty(), ErrorKind::InvalidInput, "manifest '" + a.manifest + "' has no '" + a.split + "' utterances");

  const fs::path out(g.out);
  OutDirLock lock(out);
  const auto data = train::prepare_data(cfg.network, utts, cfg.train.heldout_fraction);
  if (cfg.network.n_classes != 0) {
    require(cfg.network.n_classes == data.classes.size(), ErrorKind::Config,
            "network.n_classes is " + std::to_string(cfg.network.n_classes) + " but the manifest has " +
                std::to_string(data.classes.size()) + " classes");
  }
  cfg.network.n_classes = data.classes.size();
  echo_config(cfg, out);

  auto session = train::TrainSession::start(cfg.network, data.classes);
  const std::size_t first_params = session.network.first_layer_parameter_count();
  std::cout << "frontend=" << nn::to_string(cfg.network.frontend) << " first_layer_params=" << first_params
            << " total_params=" << session.network.parameter_count() << " train_chunks=" << data.train.size()
            << " heldout_chunks=" << data.heldout.size() << '\n';

  const fs::path log_path = out / "train_log.csv";
  std::ofstream log(log_path, std::ios::trunc);
  require(static_cast<bool>(log), ErrorKind::Io, "cannot write '" + log_path.string() + "'");
  log << train::epoch_log_header() << '\n';
  log.flush();

  train::TrainOptions opts;
  opts.epochs = cfg.train.epochs;
  opts.heldout_fraction = cfg.train.heldout_fraction;
  opts.timing = !a.no_timing;
  train::TrainHooks hooks;
  hooks.on_epoch = [&](const train::EpochRecord& r, train::TrainSession& s) {
    log << train::to_csv_row(r) << '\n';
    log.flush();
    std::cout << "epoch " << r.epoch << " loss " << r.train_loss << " heldout_fer " << r.heldout_fer << '\n';
    if (cfg.train.checkpoint_every > 0 && r.epoch % cfg.train.checkpoint_every == 0) {
      fs::create_directories(out / "checkpoints");
      s.save(out / "checkpoints" / checkpoint_name(r.epoch));
    }
  };
  const auto records = train::run_epochs(session, data, cfg.train.epochs, opts, hooks);
  session.save(out / "model.ckpt");

  json summary = {{"frontend", nn::to_string(cfg.network.frontend)},
                  {"first_layer_params", first_params},
                  {"total_params", session.network.parameter_count()},
                  {"class_ids", data.classes.ids()},
                  {"epochs", session.epoch},
                  {"steps", session.step},
                  {"train_chunks", data.train.size()},
                  {"heldout_chunks", data.heldout.size()}};
  if (!records.empty()) summary["final_heldout_fer"] = records.back().heldout_fer;
  write_text(out / "train_summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// inspect-filters

struct InspectArgs {
  std::string checkpoint;
  std::size_t n_points = 1024;
};

inline void cmd_inspect_filters(const GlobalOptions& g, const InspectArgs& a) {
  auto ck = nn::load_checkpoint(a.checkpoint);
  const auto& ncfg = ck.network.config();
  require(a.n_points >= ncfg.frontend_length, ErrorKind::Config,
          "--n-points must be at least the filter length (" + std::to_string(ncfg.frontend_length) + ")");
  const fs::path out(g.out);
  OutDirLock lock(out);
  const auto e = analyze_bank(ck.network.frontend_bank(), nn::to_string(ncfg.frontend), ncfg.sample_rate, a.n_points);
  write_filters_csv(e, out / "filters.csv");
  write_cumulative_csv(e, out / "cumulative.csv");
  write_filters_json(e, out / "filters.json");
  std::cout << "exported " << e.bank.n_filters << " " << e.frontend << " filters to " << out.string() << '\n';
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string checkpoint;
  std::string enroll;
  std::string trials;
  std::string enroll_split = "train";
  std::string trial_split = "test";
  std::size_t impostors = 10;
};

inline std::set<int> speakers_of(const std::vector<audio::Waveform>& utts) {
  std::set<int> s;
  for (const auto& u : utts) s.insert(u.label);
  return s;
}

inline void cmd_verify(const GlobalOptions& g, const VerifyArgs& a) {
  const ExperimentConfig cfg = resolve_config(g);
  auto ck = nn::load_checkpoint(a.checkpoint);
  const train::ClassMap trained(ck.meta.extra.value("class_ids", std::vector<int>{}));
  const auto enroll_utts = audio::load_split(a.enroll, a.enroll_split);
  const auto trial_utts = audio::load_split(a.trials.empty() ? a.enroll : a.trials, a.trial_split);
  require(!enroll_utts.empty(), ErrorKind::InvalidInput, "no enrollment utterances in split '" + a.enroll_split + "'");
  require(!trial_utts.empty(), ErrorKind::InvalidInput, "no trial utterances in split '" + a.trial_split + "'");

  std::vector<int> overlap;
  for (int s : speakers_of(enroll_utts))
    if (trained.contains(s)) overlap.push_back(s);
  for (int s : speakers_of(trial_utts))
    if (trained.contains(s) && std::find(overlap.begin(), overlap.end(), s) == overlap.end()) overlap.push_back(s);
  if (!overlap.empty()) {
    std::string list;
    for (int s : overlap) list += (list.empty() ? "" : ",") + std::to_string(s);
    fail(ErrorKind::InvalidInput, "verification speakers overlap the training classes: " + list);
  }
  for (const auto& u : enroll_utts) {
    require(u.sample_rate == ck.network.config().sample_rate, ErrorKind::InvalidInput,
            "utterance '" + u.utterance_id + "' sample rate does not match the checkpoint");
  }

  const fs::path out(g.out);
  OutDirLock lock(out);
  const auto enrolled = train::enroll_speakers(ck.network, enroll_utts);
  std::vector<int> enrolled_ids;
  for (const auto& [spk, v] : enrolled) enrolled_ids.push_back(spk);

  std::vector<train::TestUtterance> tests;
  for (const auto& u : trial_utts) {
    const auto& nc = ck.network.config();
    const auto chunks = audio::frame_signal(u, nc.chunk_samples(), nc.hop()).chunks;
    if (chunks.empty()) continue;
    tests.push_back({train::extract_dvector(ck.network, chunks, nc.batch_size), u.label, u.utterance_id});
  }
  const auto trials = train::make_trials(tests, enrolled_ids, cfg.seed, a.impostors);
  const auto scored = train::score_trials(enrolled, tests, trials);
  const auto eer = train::equal_error_rate(scored);

  std::string csv = "score,is_genuine\n";
  std::size_t n_gen = 0, n_imp = 0;
  for (const auto& s : scored) {
    csv += format_double(s.score) + "," + (s.is_genuine ? "1" : "0") + "\n";
    (s.is_genuine ? n_gen : n_imp) += 1;
  }
  write_text(out / "scores.csv", csv);
  const json report = {{"eer_pct", eer.eer_pct}, {"n_genuine", n_gen}, {"n_impostor", n_imp}, {"threshold", eer.threshold}};
  write_text(out / "verify.json", report.dump(2) + "\n");
  std::cout << "EER " << eer.eer_pct << "% over " << n_gen << " genuine / " << n_imp << " impostor trials\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
};

inline void cmd_eval(const GlobalOptions& g, const EvalArgs& a) {
  auto ck = nn::load_checkpoint(a.checkpoint);
  const train::ClassMap classes(ck.meta.extra.value("class_ids", std::vector<int>{}));
  const auto utts = audio::load_split(a.manifest, a.split);
  require(!utts.empty(), ErrorKind::InvalidInput, "manifest has no '" + a.split + "' utterances");
  for (const auto& u : utts) {
    require(classes.contains(u.label), ErrorKind::InvalidLabel,
            "utterance '" + u.utterance_id + "' has class " + std::to_string(u.label) +
                " which the checkpoint was not trained on");
  }
  const fs::path out(g.out);
  OutDirLock lock(out);
  const auto& nc = ck.network.config();
  const auto set = train::make_chunk_set(utts, classes, nc.chunk_samples(), nc.hop());
  require(set.size() > 0, ErrorKind::InvalidInput, "no utterance is long enough for one chunk");
  const Tensor post = train::predict_posteriors(ck.network, set.inputs, nc.batch_size);
  const double fer = train::frame_error_rate(post, set.labels);
  const double cer = train::sentence_error_rate(train::group_by_utterance(set, post));
  const json report = {{"fer_pct", fer},
                       {"cer_pct", cer},
                       {"n_chunks", set.size()},
                       {"n_utterances", set.utterance_ids.size()},
                       {"split", a.split}};
  write_text(out / "eval.json", report.dump(2) + "\n");
  std::cout << "FER " << fer << "%  CER " << cer << "%\n";
}

// ---------------------------------------------------------------------------

/// Parses argv and runs one subcommand. Returns the process exit status;
/// every failure prints a single "error[<kind>]: <message>" line to err.
inline int run_cli(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Learnable sinc filterbank front-end: corpus synthesis, training and analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Experiment config (TOML or JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config");
  app.add_option("--out", g.out, "Output directory");

  auto* gen = app.add_subcommand("gen-corpus", "Synthesize a WAV corpus and manifest");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a classifier on a manifest's train split");
  tr->add_option("--manifest", ta.manifest, "Corpus manifest (JSON lines)")->required();
  tr->add_option("--split", ta.split, "Manifest split used for training");
  auto* fe_opt = tr->add_option("--frontend", ta.frontend, "First layer: sinc or conv");
  fe_opt->check(CLI::IsMember({"sinc", "conv"}));
  tr->add_option("--epochs", ta.epochs, "Epoch count overriding the config");
  tr->add_flag("--no-timing", ta.no_timing, "Write wall_s as 0 for byte-identical logs");

  InspectArgs ia;
  auto* ins = app.add_subcommand("inspect-filters", "Export first-layer filters and responses");
  ins->add_option("--checkpoint", ia.checkpoint, "Checkpoint file")->required();
  ins->add_option("--n-points", ia.n_points, "Frequency grid size over [0, fs/2]");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "d-vector speaker verification EER");
  ver->add_option("--checkpoint", va.checkpoint, "Checkpoint file")->required();
  ver->add_option("--enroll", va.enroll, "Enrollment manifest")->required();
  ver->add_option("--trials", va.trials, "Trial manifest (defaults to the enrollment manifest)");
  ver->add_option("--enroll-split", va.enroll_split, "Split used for enrollment");
  ver->add_option("--trial-split", va.trial_split, "Split used for test utterances");
  ver->add_option("--impostors", va.impostors, "Impostor trials per genuine trial");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Frame and sentence error rates on a manifest split");
  ev->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required();
  ev->add_option("--manifest", ea.manifest, "Corpus manifest")->required();
  ev->add_option("--split", ea.split, "Manifest split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << '\n';
    return 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) cmd_gen_corpus(g);
    else if (*tr) cmd_train(g, ta);
    else if (*ins) cmd_inspect_filters(g, ia);
    else if (*ver) cmd_verify(g, va);
    else if (*ev) cmd_eval(g, ea);
    return 0;
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace sincnet::cli

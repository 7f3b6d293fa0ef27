// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "kws/config.hpp"
#include "kws/errors.hpp"
#include "kws/training.hpp"

namespace kws {
namespace fs = std::filesystem;

namespace {

struct GridCell {
  int d_model = 0;
  int heads = 0;
  int layers = 0;
};

// Cells in table order with the parameter counts reported for them.
struct ReferenceCell {
  GridCell cell;
  const char* params;
};

constexpr ReferenceCell kReferenceGrid[] = {
    {{64, 4, 2}, "234K"},  {{64, 4, 1}, "165K"},  {{64, 2, 2}, "234K"},  {{64, 2, 1}, "165K"},
    {{96, 4, 2}, "511K"},  {{96, 4, 1}, "358K"},  {{96, 2, 2}, "511K"},  {{96, 2, 1}, "358K"},
    {{128, 4, 2}, "895K"}, {{128, 4, 1}, "625K"}, {{128, 2, 2}, "895K"}, {{128, 2, 1}, "625K"},
};

std::string reference_params(const GridCell& c) {
  for (const auto& r : kReferenceGrid) {
    if (r.cell.d_model == c.d_model && r.cell.heads == c.heads && r.cell.layers == c.layers) return r.params;
  }
  return "";
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

fs::path require_dir(const std::string& flag, const fs::path& p) {
  if (!fs::is_directory(p)) throw ValidationError(flag + ": directory does not exist: " + p.string());
  return fs::absolute(p).lexically_normal();
}

fs::path require_file(const std::string& flag, const fs::path& p) {
  if (!fs::is_regular_file(p)) throw ValidationError(flag + ": file does not exist: " + p.string());
  return fs::absolute(p).lexically_normal();
}

// Flags shared by `train` and `sweep`; unset values leave the config file alone.
struct PipelineFlags {
  std::string config;
  std::optional<std::string> manifest, synthetic, noise_bank, rir, out;
  std::optional<std::uint64_t> seed, augment_seed;
  std::optional<int> epochs, batch_size, d_model, heads, layers, gru_hidden, ff_expansion, conv_kernel, workers;
  std::optional<double> lr, dropout, lambda, gamma, grad_clip;
  bool positional_encoding = false, no_augment = false, keep_epoch_checkpoints = false, log_wall_time = false;

  void attach(CLI::App& app, bool model_shape) {
    app.add_option("--config", config, "JSON run config; flags override its values");
    app.add_option("--manifest", manifest, "manifest.jsonl produced by `prepare`");
    app.add_option("--synthetic", synthetic, "directory of synthetic audio added to the train split");
    app.add_option("--noise-bank", noise_bank, "directory of noise recordings for noise injection");
    app.add_option("--rir", rir, "directory of 1 s room impulse responses");
    app.add_option("--out", out, "output directory");
    app.add_option("--seed", seed, "training seed");
    app.add_option("--augment-seed", augment_seed, "extra seed mixed into the augmentation streams");
    app.add_option("--epochs", epochs, "total epochs (required unless set in the config)");
    app.add_option("--batch-size", batch_size, "utterances per optimizer step");
    app.add_option("--lr", lr, "initial learning rate");
    if (model_shape) {
      app.add_option("--d-model", d_model, "model dimensionality");
      app.add_option("--heads", heads, "attention heads");
      app.add_option("--layers", layers, "conformer layers");
    }
    app.add_option("--gru-hidden", gru_hidden, "BiGRU width per direction (0: d-model)");
    app.add_option("--ff-expansion", ff_expansion, "feed-forward expansion factor");
    app.add_option("--conv-kernel", conv_kernel, "depthwise convolution kernel size (odd)");
    app.add_option("--dropout", dropout, "dropout rate");
    app.add_option("--lambda", lambda, "time-domain augmentation rate");
    app.add_option("--gamma", gamma, "frequency-domain augmentation rate");
    app.add_option("--grad-clip", grad_clip, "global gradient-norm clip (0 disables)");
    app.add_option("--workers", workers, "worker threads (0: all cores); results do not depend on it");
    app.add_flag("--positional-encoding", positional_encoding, "add sinusoidal positional encoding");
    app.add_flag("--no-augment", no_augment, "set both augmentation rates to 1 (no operator is ever selected)");
    app.add_flag("--keep-epoch-checkpoints", keep_epoch_checkpoints, "also write epoch_NNN.ckpt files");
    app.add_flag("--log-wall-time", log_wall_time, "record wall_s in metrics.jsonl");
  }

  RunConfig resolve() const {
    RunConfig rc = config.empty() ? RunConfig{} : load_run_config(require_file("--config", config));
    auto& p = rc.pipeline;
    if (manifest) rc.paths.manifest = *manifest;
    if (synthetic) rc.paths.synthetic_root = *synthetic;
    if (noise_bank) rc.paths.noise_bank_dir = *noise_bank;
    if (rir) rc.paths.rir_dir = *rir;
    if (out) rc.paths.output_dir = *out;
    if (seed) p.train.seed = *seed;
    if (augment_seed) p.augment.rng_seed = *augment_seed;
    if (epochs) p.train.epochs = *epochs;
    if (batch_size) p.train.batch_size = *batch_size;
    if (lr) p.train.lr0 = *lr;
    if (d_model) p.model.d_model = *d_model;
    if (heads) p.model.n_heads = *heads;
    if (layers) p.model.n_layers = *layers;
    if (gru_hidden) p.model.gru_hidden = *gru_hidden;
    if (ff_expansion) p.model.ff_expansion = *ff_expansion;
    if (conv_kernel) p.model.conv_kernel = *conv_kernel;
    if (dropout) p.model.dropout = *dropout;
    if (lambda) p.augment.lambda_rate = *lambda;
    if (gamma) p.augment.gamma_rate = *gamma;
    if (grad_clip) p.train.grad_clip = *grad_clip;
    if (workers) p.train.workers = *workers;
    if (positional_encoding) p.model.positional_encoding = true;
    if (no_augment) {
      p.augment.lambda_rate = 1.0;
      p.augment.gamma_rate = 1.0;
    }
    if (keep_epoch_checkpoints) p.train.keep_epoch_checkpoints = true;
    if (log_wall_time) p.train.log_wall_time = true;
    return rc;
  }
};

// Loaded augmentation material; ops without material are removed from the
// policy so that the resolved config describes what actually ran.
struct LoadedResources {
  std::unique_ptr<NoiseBank> noise;
  std::unique_ptr<ImpulseResponseSet> rirs;
  AugmentResources view() const { return {noise.get(), rirs.get()}; }
};

LoadedResources load_resources(RunConfig& rc, std::ostream& err) {
  LoadedResources r;
  auto& policy = rc.pipeline.augment;
  if (!rc.paths.noise_bank_dir.empty()) {
    r.noise = std::make_unique<NoiseBank>(NoiseBank::load_directory(require_dir("--noise-bank", rc.paths.noise_bank_dir)));
  }
  if (!rc.paths.rir_dir.empty()) {
    r.rirs = std::make_unique<ImpulseResponseSet>(
        ImpulseResponseSet::load_directory(require_dir("--rir", rc.paths.rir_dir), policy.normalize_rir_peak));
  }
  auto drop = [&](TimeOp op, bool available, const char* flag) {
    auto it = std::find(policy.time_ops.begin(), policy.time_ops.end(), op);
    if (it != policy.time_ops.end() && !available && policy.time_ops.size() > 1) {
      policy.time_ops.erase(it);
      err << "note: " << to_string(op) << " augmentation disabled (no " << flag << " given)\n";
    }
  };
  drop(TimeOp::noise, r.noise != nullptr, "--noise-bank");
  drop(TimeOp::reverb, r.rirs != nullptr, "--rir");
  return r;
}

fs::path absolute_or_empty(const fs::path& p) { return p.empty() ? p : fs::absolute(p).lexically_normal(); }

std::vector<ManifestEntry> load_training_manifest(RunConfig& rc) {
  if (rc.paths.manifest.empty()) throw ValidationError("--manifest is required (flag or paths.manifest)");
  rc.paths.manifest = require_file("--manifest", rc.paths.manifest);
  auto entries = read_manifest(rc.paths.manifest);
  if (!rc.paths.synthetic_root.empty()) {
    rc.paths.synthetic_root = require_dir("--synthetic", rc.paths.synthetic_root);
    std::set<std::string> ids;
    for (const auto& e : entries) ids.insert(e.id);
    for (auto& e : scan_synthetic(rc.paths.synthetic_root)) {
      if (!ids.contains(e.id)) entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }
  return entries;
}

void finalize_paths(RunConfig& rc) {
  rc.paths.dataset_root = absolute_or_empty(rc.paths.dataset_root);
  rc.paths.noise_dir = absolute_or_empty(rc.paths.noise_dir);
  rc.paths.noise_bank_dir = absolute_or_empty(rc.paths.noise_bank_dir);
  rc.paths.rir_dir = absolute_or_empty(rc.paths.rir_dir);
  rc.paths.output_dir = absolute_or_empty(rc.paths.output_dir);
}

// --- prepare ------------------------------------------------------------------

struct PrepareArgs {
  std::string dataset, noise, out = ".", synthetic, split_file;
  std::uint64_t seed = 0;
  int noise_clips = 300;
  double clip_seconds = 1.0;
  double dev_fraction = 0.2, test_fraction = 0.2;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  if (a.dataset.empty()) throw ValidationError("--dataset is required");
  if (a.noise.empty()) throw ValidationError("--noise is required");
  const fs::path dataset = require_dir("--dataset", a.dataset);
  const fs::path noise_dir = require_dir("--noise", a.noise);
  std::optional<fs::path> synthetic;
  if (!a.synthetic.empty()) synthetic = require_dir("--synthetic", a.synthetic);

  SplitSpec spec;
  if (!a.split_file.empty()) {
    spec = SplitSpec::from_file(require_file("--split-file", a.split_file));
  } else {
    spec.dev = a.dev_fraction;
    spec.test = a.test_fraction;
    spec.train = 1.0 - a.dev_fraction - a.test_fraction;
  }
  spec.validate();

  auto entries = build_manifest(dataset, synthetic, spec, a.seed);

  std::vector<NoiseSource> sources;
  for (const auto& f : list_wavs(noise_dir)) {
    Waveform w = read_wav(f);
    require_dataset_audio(w, f);
    sources.push_back({f.stem().string(), std::move(w)});
  }
  if (sources.empty()) throw ValidationError("--noise: no .wav files in " + noise_dir.string());
  const auto clips = carve_noise_clips(sources, a.noise_clips, a.clip_seconds, a.seed);

  const fs::path out_dir = fs::absolute(a.out).lexically_normal();
  fs::create_directories(out_dir / "noise_clips");
  std::vector<ManifestEntry> noise_entries;
  for (const auto& c : clips) {
    write_wav(out_dir / c.entry.path, c.audio);
    noise_entries.push_back(c.entry);
  }
  entries.insert(entries.end(), noise_entries.begin(), noise_entries.end());
  std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  write_manifest(out_dir / "manifest.jsonl", entries);
  write_manifest(out_dir / "noise_manifest.jsonl", noise_entries);

  const LabelMap labels = LabelMap::standard();
  std::map<Split, std::map<Source, std::size_t>> counts;
  std::set<std::string> covered;
  for (const auto& e : entries) {
    counts[e.split][e.source] += 1;
    covered.insert(e.label);
  }
  out << "wrote " << (out_dir / "manifest.jsonl").string() << " (" << entries.size() << " entries)\n";
  for (Split s : {Split::train, Split::dev, Split::test}) {
    std::size_t total = 0;
    for (const auto& [src, n] : counts[s]) total += n;
    out << std::left << std::setw(6) << to_string(s) << std::right << std::setw(7) << total << "  (original "
        << counts[s][Source::original] << ", synthetic " << counts[s][Source::synthetic] << ", noise "
        << counts[s][Source::noise] << ")\n";
  }
  out << "labels covered: " << covered.size() << "/" << labels.size() << "\n";
  if (covered.size() < labels.size()) {
    err << "warning: missing labels:";
    for (const auto& l : labels.entries()) {
      if (!covered.contains(l.alias)) err << ' ' << l.alias;
    }
    err << '\n';
  }
  return kExitOk;
}

// --- train --------------------------------------------------------------------

int cmd_train(const PipelineFlags& flags, std::ostream& out, std::ostream& err) {
  RunConfig rc = flags.resolve();
  if (rc.paths.output_dir.empty()) throw ValidationError("--out is required (flag or paths.output_dir)");
  auto entries = load_training_manifest(rc);
  const LoadedResources resources = load_resources(rc, err);
  finalize_paths(rc);
  rc.validate();

  fs::create_directories(rc.paths.output_dir);
  save_run_config(rc.paths.output_dir / "resolved-config.json", rc);
  out << "model parameters: " << param_count(rc.pipeline.model) << "\n";
  const TrainResult result =
      train(entries, rc.pipeline, resources.view(), rc.paths.output_dir, LabelMap::standard(), &out);
  out << "best epoch " << result.best_epoch << ", dev accuracy " << fixed(result.best_dev_accuracy, 2) << "%\n";
  out << "checkpoint: " << result.best_checkpoint.string() << "\n";
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, manifest, split = "test", config, out = ".";
  std::uint64_t seed = 0;
  int workers = 0;
};

void write_confusion(const fs::path& path, const EvalReport& report, const LabelMap& labels) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "true\\predicted";
  for (const auto& l : labels.entries()) f << ',' << l.alias;
  f << '\n';
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    f << labels.name(static_cast<std::size_t>(r));
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) f << ',' << report.confusion(r, c);
    f << '\n';
  }
  if (!f) throw IoError("short write to " + path.string());
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(require_file("--checkpoint", a.checkpoint));
  const auto all = read_manifest(require_file("--manifest", a.manifest));
  const Split split = parse_split(a.split);
  const auto entries = filter_split(all, split);
  if (entries.empty()) throw ValidationError("--split " + a.split + ": no entries in the manifest");
  std::optional<FeatureConfig> expected;
  if (!a.config.empty()) expected = load_run_config(require_file("--config", a.config)).pipeline.features;

  const EvalReport report = evaluate(entries, ckpt, expected ? &*expected : nullptr, nullptr, a.workers);
  const fs::path out_dir = fs::absolute(a.out);
  fs::create_directories(out_dir);
  write_confusion(out_dir / "confusion.csv", report, ckpt.meta.labels);

  out << "split " << a.split << ": " << report.size() << " utterances\n";
  out << "accuracy: " << fixed(report.accuracy, 2) << "\n";
  const auto& labels = ckpt.meta.labels;
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    const int total = report.confusion.row(r).sum();
    if (total == 0) continue;
    const auto i = static_cast<std::size_t>(r);
    out << "  " << std::left << std::setw(10) << labels.name(i) << std::right << std::setw(4)
        << report.confusion(r, r) << "/" << total;
    if (!labels.display(i).empty()) out << "  " << labels.display(i);
    out << '\n';
  }
  return kExitOk;
}

// --- infer --------------------------------------------------------------------

struct InferArgs {
  std::string wav, checkpoint;
  int top_k = 5;
  std::uint64_t seed = 0;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(require_file("--checkpoint", a.checkpoint));
  const Waveform wave = read_wav(require_file("wav", a.wav));
  if (wave.sample_rate != ckpt.meta.features.sample_rate) {
    throw ValidationError(a.wav + ": sample rate " + std::to_string(wave.sample_rate) + " Hz, expected " +
                          std::to_string(ckpt.meta.features.sample_rate) + " Hz; resample the file first");
  }
  const auto window = ckpt.meta.features.window_samples();
  if (wave.samples.size() < window) {
    throw ValidationError(a.wav + ": shorter than one analysis window (" + std::to_string(window) + " samples)");
  }
  const Vector<float> lp = infer_log_probs(wave, ckpt);
  const auto& labels = ckpt.meta.labels;
  std::vector<int> order(static_cast<std::size_t>(lp.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return lp(x) > lp(y); });
  const int k = std::clamp(a.top_k, 1, static_cast<int>(order.size()));
  const auto best = static_cast<std::size_t>(order[0]);
  out << "prediction: " << labels.name(best);
  if (!labels.display(best).empty()) out << " (" << labels.display(best) << ")";
  out << '\n';
  for (int r = 0; r < k; ++r) {
    const auto i = static_cast<std::size_t>(order[static_cast<std::size_t>(r)]);
    out << std::setw(2) << r + 1 << "  " << std::left << std::setw(10) << labels.name(i) << std::right << "  "
        << fixed(std::exp(static_cast<double>(lp(order[static_cast<std::size_t>(r)]))), 6);
    if (!labels.display(i).empty()) out << "  " << labels.display(i);
    out << '\n';
  }
  return kExitOk;
}

// --- sweep --------------------------------------------------------------------

std::vector<GridCell> parse_grid(const std::string& text) {
  std::vector<GridCell> cells;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    GridCell c;
    char sep1 = 0, sep2 = 0;
    std::istringstream is(item);
    if (!(is >> c.d_model >> sep1 >> c.heads >> sep2 >> c.layers) || sep1 != ',' || sep2 != ',') {
      throw ValidationError("--grid: cannot parse cell '" + item + "' (expected d,h,N)");
    }
    std::string rest;
    if (is >> rest) throw ValidationError("--grid: trailing text in cell '" + item + "'");
    cells.push_back(c);
  }
  return cells;
}

struct SweepArgs {
  PipelineFlags pipeline;
  std::optional<std::string> grid;
  bool params_only = false;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<GridCell> cells;
  if (a.grid) {
    cells = parse_grid(*a.grid);
  } else {
    for (const auto& r : kReferenceGrid) cells.push_back(r.cell);
  }
  if (cells.empty()) throw ValidationError("--grid: no cells given");

  RunConfig base = a.pipeline.resolve();
  if (base.paths.output_dir.empty()) throw ValidationError("--out is required (flag or paths.output_dir)");
  std::vector<ManifestEntry> entries;
  LoadedResources resources;
  if (!a.params_only) {
    entries = load_training_manifest(base);
    resources = load_resources(base, err);
  }
  finalize_paths(base);
  const fs::path out_dir = base.paths.output_dir;
  fs::create_directories(out_dir);
  const auto test_entries = filter_split(entries, Split::test);
  const auto dev_entries = filter_split(entries, Split::dev);

  struct Row {
    GridCell cell;
    std::string accuracy, params, reference, status;
  };
  std::vector<Row> rows;
  for (const auto& cell : cells) {
    Row row{cell, "", "", reference_params(cell), "ok"};
    RunConfig rc = base;
    rc.pipeline.model.d_model = cell.d_model;
    rc.pipeline.model.n_heads = cell.heads;
    rc.pipeline.model.n_layers = cell.layers;
    try {
      rc.pipeline.model.validate();
      row.params = std::to_string(param_count(rc.pipeline.model));
      if (!a.params_only) {
        const fs::path cell_dir = out_dir / ("d" + std::to_string(cell.d_model) + "_h" + std::to_string(cell.heads) +
                                             "_n" + std::to_string(cell.layers));
        rc.paths.output_dir = cell_dir;
        rc.validate();
        fs::create_directories(cell_dir);
        save_run_config(cell_dir / "resolved-config.json", rc);
        const TrainResult result = train(entries, rc.pipeline, resources.view(), cell_dir);
        const Checkpoint ckpt = load_checkpoint(result.best_checkpoint);
        const auto& scored = test_entries.empty() ? dev_entries : test_entries;
        row.accuracy = fixed(evaluate(scored, ckpt, nullptr, nullptr, rc.pipeline.train.workers).accuracy, 2);
      }
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
      err << "cell (" << cell.d_model << "," << cell.heads << "," << cell.layers << ") " << row.status << '\n';
    }
    rows.push_back(row);
  }

  std::ofstream csv(out_dir / "sweep.csv", std::ios::binary | std::ios::trunc);
  if (!csv) throw IoError("cannot write " + (out_dir / "sweep.csv").string());
  csv << "d_model,h,N,accuracy,params,reference_params,status\n";
  std::ostringstream text;
  text << std::setw(8) << "d_model" << std::setw(4) << "h" << std::setw(4) << "N" << std::setw(10) << "ACC(%)"
       << std::setw(10) << "#Params" << std::setw(11) << "reference" << "  status\n";
  for (const auto& r : rows) {
    csv << r.cell.d_model << ',' << r.cell.heads << ',' << r.cell.layers << ',' << r.accuracy << ',' << r.params << ','
        << r.reference << ',' << csv_field(r.status) << '\n';
    text << std::setw(8) << r.cell.d_model << std::setw(4) << r.cell.heads << std::setw(4) << r.cell.layers
         << std::setw(10) << (r.accuracy.empty() ? "-" : r.accuracy) << std::setw(10)
         << (r.params.empty() ? "-" : r.params) << std::setw(11) << (r.reference.empty() ? "-" : r.reference) << "  "
         << r.status << '\n';
  }
  std::ofstream(out_dir / "sweep.txt", std::ios::binary | std::ios::trunc) << text.str();
  out << text.str();
  return kExitOk;
}

// --- inspect-checkpoint -------------------------------------------------------

int cmd_inspect(const std::string& path, std::ostream& out) {
  const fs::path p = require_file("checkpoint", path);
  out << read_checkpoint_header(p) << '\n';
  const Checkpoint ckpt = load_checkpoint(p);
  out << "parameters: " << tensor_scalar_count(ckpt.params) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spoken-command spotting toolkit", "kws"};
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* prep = app.add_subcommand("prepare", "build manifest.jsonl and carve NULL-class noise clips");
  prep->add_option("--dataset", prepare.dataset, "dataset root: one directory per command");
  prep->add_option("--noise", prepare.noise, "directory of noise recordings for the NULL class");
  prep->add_option("--synthetic", prepare.synthetic, "directory of synthetic audio (train split only)");
  prep->add_option("--out", prepare.out, "output directory")->capture_default_str();
  prep->add_option("--split-file", prepare.split_file, "JSON map from relative path to train/dev/test");
  prep->add_option("--dev-fraction", prepare.dev_fraction, "per-label dev fraction")->capture_default_str();
  prep->add_option("--test-fraction", prepare.test_fraction, "per-label test fraction")->capture_default_str();
  prep->add_option("--noise-clips", prepare.noise_clips, "number of NULL clips")->capture_default_str();
  prep->add_option("--clip-seconds", prepare.clip_seconds, "NULL clip length")->capture_default_str();
  prep->add_option("--seed", prepare.seed, "split and carving seed")->capture_default_str();

  PipelineFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model; writes metrics.jsonl, best.ckpt, resolved-config.json");
  train_flags.attach(*train_cmd, true);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "accuracy and confusion.csv for one manifest split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", eval.manifest, "manifest.jsonl")->required();
  eval_cmd->add_option("--split", eval.split, "train, dev or test")->capture_default_str();
  eval_cmd->add_option("--config", eval.config, "run config whose features must match the checkpoint");
  eval_cmd->add_option("--out", eval.out, "directory for confusion.csv")->capture_default_str();
  eval_cmd->add_option("--workers", eval.workers, "worker threads (0: all cores)")->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "accepted for uniformity; evaluation is deterministic");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "top-k labels for one 16 kHz mono wav file");
  infer_cmd->add_option("wav", infer.wav, "input wav file")->required();
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "checkpoint file")->required();
  infer_cmd->add_option("--top-k", infer.top_k, "number of labels to print")->capture_default_str();
  infer_cmd->add_option("--seed", infer.seed, "accepted for uniformity; inference is deterministic");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "train each (d_model, h, N) cell and tabulate accuracy and size");
  sweep.pipeline.attach(*sweep_cmd, false);
  sweep_cmd->add_option("--grid", sweep.grid, "cells as \"d,h,N;d,h,N\" (default: the 12 standard cells)");
  sweep_cmd->add_flag("--params-only", sweep.params_only, "report parameter counts without training");

  std::string inspect_path;
  std::uint64_t inspect_seed = 0;
  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "print a checkpoint header and parameter count");
  inspect_cmd->add_option("checkpoint", inspect_path, "checkpoint file")->required();
  inspect_cmd->add_option("--seed", inspect_seed, "accepted for uniformity");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run `kws --help` for usage\n";
    return kExitUsage;
  }

  try {
    if (*prep) return cmd_prepare(prepare, out, err);
    if (*train_cmd) return cmd_train(train_flags, out, err);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*infer_cmd) return cmd_infer(infer, out);
    if (*sweep_cmd) return cmd_sweep(sweep, out, err);
    if (*inspect_cmd) return cmd_inspect(inspect_path, out);
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace kws

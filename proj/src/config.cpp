// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <string_view>

#include "kws/errors.hpp"

namespace kws {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void only_keys(const nlohmann::json& j, std::string_view section, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  const std::set<std::string_view> allowed(keys);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + std::string(section));
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void read_path(const nlohmann::json& j, const char* key, fs::path& out) {
  std::string s;
  read(j, key, s);
  if (j.contains(key)) out = s;
}

}  // namespace

ojson to_json(const FeatureConfig& c) {
  return {{"n_mfcc", c.n_mfcc},         {"window_ms", c.window_ms}, {"hop_ms", c.hop_ms},
          {"n_mels", c.n_mels},         {"fft_size", c.fft_size},   {"sample_rate", c.sample_rate},
          {"fmin", c.fmin},             {"fmax", c.fmax},           {"log_floor", c.log_floor},
          {"cepstral_mean_norm", c.cepstral_mean_norm}};
}

void from_json(const nlohmann::json& j, FeatureConfig& c) {
  only_keys(j, "features", {"n_mfcc", "window_ms", "hop_ms", "n_mels", "fft_size", "sample_rate", "fmin", "fmax",
                            "log_floor", "cepstral_mean_norm"});
  read(j, "n_mfcc", c.n_mfcc);
  read(j, "window_ms", c.window_ms);
  read(j, "hop_ms", c.hop_ms);
  read(j, "n_mels", c.n_mels);
  read(j, "fft_size", c.fft_size);
  read(j, "sample_rate", c.sample_rate);
  read(j, "fmin", c.fmin);
  read(j, "fmax", c.fmax);
  read(j, "log_floor", c.log_floor);
  read(j, "cepstral_mean_norm", c.cepstral_mean_norm);
}

ojson to_json(const MaskSpec& c) {
  return {{"max_time_mask_frames", c.max_time_mask_frames},
          {"max_freq_mask_bins", c.max_freq_mask_bins},
          {"n_time_masks", c.n_time_masks},
          {"n_freq_masks", c.n_freq_masks}};
}

void from_json(const nlohmann::json& j, MaskSpec& c) {
  only_keys(j, "masks", {"max_time_mask_frames", "max_freq_mask_bins", "n_time_masks", "n_freq_masks"});
  read(j, "max_time_mask_frames", c.max_time_mask_frames);
  read(j, "max_freq_mask_bins", c.max_freq_mask_bins);
  read(j, "n_time_masks", c.n_time_masks);
  read(j, "n_freq_masks", c.n_freq_masks);
}

ojson to_json(const AugmentationPolicy& c) {
  ojson time_ops = ojson::array(), freq_ops = ojson::array();
  for (auto op : c.time_ops) time_ops.push_back(to_string(op));
  for (auto op : c.freq_ops) freq_ops.push_back(to_string(op));
  return {{"lambda_rate", c.lambda_rate}, {"gamma_rate", c.gamma_rate},           {"time_ops", time_ops},
          {"freq_ops", freq_ops},         {"rng_seed", c.rng_seed}, {"normalize_rir_peak", c.normalize_rir_peak}};
}

void from_json(const nlohmann::json& j, AugmentationPolicy& c) {
  only_keys(j, "augment", {"lambda_rate", "gamma_rate", "time_ops", "freq_ops", "rng_seed", "normalize_rir_peak"});
  read(j, "lambda_rate", c.lambda_rate);
  read(j, "gamma_rate", c.gamma_rate);
  read(j, "rng_seed", c.rng_seed);
  read(j, "normalize_rir_peak", c.normalize_rir_peak);
  if (j.contains("time_ops")) {
    c.time_ops.clear();
    for (const auto& op : j["time_ops"]) c.time_ops.push_back(parse_time_op(op.get<std::string>()));
  }
  if (j.contains("freq_ops")) {
    c.freq_ops.clear();
    for (const auto& op : j["freq_ops"]) c.freq_ops.push_back(parse_freq_op(op.get<std::string>()));
  }
}

ojson to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},       {"n_heads", c.n_heads},         {"n_layers", c.n_layers},
          {"ff_expansion", c.ff_expansion}, {"conv_kernel", c.conv_kernel}, {"gru_hidden", c.gru_hidden},
          {"dropout", c.dropout},       {"n_classes", c.n_classes},     {"n_features", c.n_features},
          {"positional_encoding", c.positional_encoding}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  only_keys(j, "model", {"d_model", "n_heads", "n_layers", "ff_expansion", "conv_kernel", "gru_hidden", "dropout",
                         "n_classes", "n_features", "positional_encoding"});
  read(j, "d_model", c.d_model);
  read(j, "n_heads", c.n_heads);
  read(j, "n_layers", c.n_layers);
  read(j, "ff_expansion", c.ff_expansion);
  read(j, "conv_kernel", c.conv_kernel);
  read(j, "gru_hidden", c.gru_hidden);
  read(j, "dropout", c.dropout);
  read(j, "n_classes", c.n_classes);
  read(j, "n_features", c.n_features);
  read(j, "positional_encoding", c.positional_encoding);
}

ojson to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"grad_clip", c.grad_clip},
          {"workers", c.workers},
          {"keep_epoch_checkpoints", c.keep_epoch_checkpoints},
          {"log_wall_time", c.log_wall_time}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  only_keys(j, "train", {"lr0", "epochs", "batch_size", "seed", "adam_beta1", "adam_beta2", "adam_eps", "grad_clip",
                         "workers", "keep_epoch_checkpoints", "log_wall_time"});
  read(j, "lr0", c.lr0);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "seed", c.seed);
  read(j, "adam_beta1", c.adam_beta1);
  read(j, "adam_beta2", c.adam_beta2);
  read(j, "adam_eps", c.adam_eps);
  read(j, "grad_clip", c.grad_clip);
  read(j, "workers", c.workers);
  read(j, "keep_epoch_checkpoints", c.keep_epoch_checkpoints);
  read(j, "log_wall_time", c.log_wall_time);
}

ojson to_json(const RunPaths& p) {
  return {{"manifest", p.manifest.generic_string()},
          {"dataset_root", p.dataset_root.generic_string()},
          {"synthetic_root", p.synthetic_root.generic_string()},
          {"noise_dir", p.noise_dir.generic_string()},
          {"noise_bank_dir", p.noise_bank_dir.generic_string()},
          {"rir_dir", p.rir_dir.generic_string()},
          {"output_dir", p.output_dir.generic_string()}};
}

void from_json(const nlohmann::json& j, RunPaths& p) {
  only_keys(j, "paths",
            {"manifest", "dataset_root", "synthetic_root", "noise_dir", "noise_bank_dir", "rir_dir", "output_dir"});
  read_path(j, "manifest", p.manifest);
  read_path(j, "dataset_root", p.dataset_root);
  read_path(j, "synthetic_root", p.synthetic_root);
  read_path(j, "noise_dir", p.noise_dir);
  read_path(j, "noise_bank_dir", p.noise_bank_dir);
  read_path(j, "rir_dir", p.rir_dir);
  read_path(j, "output_dir", p.output_dir);
}

ojson to_json(const RunConfig& c) {
  return {{"features", to_json(c.pipeline.features)}, {"masks", to_json(c.pipeline.masks)},
          {"augment", to_json(c.pipeline.augment)},   {"model", to_json(c.pipeline.model)},
          {"train", to_json(c.pipeline.train)},       {"paths", to_json(c.paths)}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  only_keys(j, "run config", {"features", "masks", "augment", "model", "train", "paths"});
  if (j.contains("features")) from_json(j["features"], c.pipeline.features);
  if (j.contains("masks")) from_json(j["masks"], c.pipeline.masks);
  if (j.contains("augment")) from_json(j["augment"], c.pipeline.augment);
  if (j.contains("model")) from_json(j["model"], c.pipeline.model);
  if (j.contains("train")) from_json(j["train"], c.pipeline.train);
  if (j.contains("paths")) from_json(j["paths"], c.paths);
}

void RunConfig::validate() const {
  pipeline.features.validate();
  pipeline.masks.validate(pipeline.features.n_mfcc);
  pipeline.augment.validate();
  pipeline.model.validate();
  pipeline.train.validate();
  if (pipeline.model.n_features != pipeline.features.n_mfcc) {
    throw ConfigError("model.n_features must equal features.n_mfcc");
  }
  const auto exists = [](const fs::path& p, const char* what) {
    if (!p.empty() && !fs::exists(p)) throw ConfigError(std::string(what) + " does not exist: " + p.string());
  };
  exists(paths.manifest, "manifest");
  exists(paths.dataset_root, "dataset_root");
  exists(paths.synthetic_root, "synthetic_root");
  exists(paths.noise_dir, "noise_dir");
  exists(paths.noise_bank_dir, "noise_bank_dir");
  exists(paths.rir_dir, "rir_dir");
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig c;
  from_json(j, c);
  return c;
}

void save_run_config(const fs::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

}  // namespace kws

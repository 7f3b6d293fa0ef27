// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "kws/training.hpp"

namespace kws {

/// File locations for a run. Empty paths are unset.
struct RunPaths {
  std::filesystem::path manifest;
  std::filesystem::path dataset_root;
  std::filesystem::path synthetic_root;
  std::filesystem::path noise_dir;  // NULL-class source recordings
  std::filesystem::path noise_bank_dir;  // recordings concatenated for noise injection
  std::filesystem::path rir_dir;
  std::filesystem::path output_dir;

  bool operator==(const RunPaths&) const = default;
};

struct RunConfig {
  PipelineConfig pipeline;
  RunPaths paths;

  /// Checks value ranges and that every set path exists.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// JSON conversions. Unknown keys are rejected so that typos do not silently
// fall back to defaults; missing keys keep their defaults.
nlohmann::ordered_json to_json(const FeatureConfig& c);
nlohmann::ordered_json to_json(const MaskSpec& c);
nlohmann::ordered_json to_json(const AugmentationPolicy& c);
nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const RunPaths& p);
nlohmann::ordered_json to_json(const RunConfig& c);

void from_json(const nlohmann::json& j, FeatureConfig& c);
void from_json(const nlohmann::json& j, MaskSpec& c);
void from_json(const nlohmann::json& j, AugmentationPolicy& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void from_json(const nlohmann::json& j, RunPaths& p);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace kws

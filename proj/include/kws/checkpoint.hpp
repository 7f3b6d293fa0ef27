// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "kws/features.hpp"
#include "kws/labels.hpp"
#include "kws/model.hpp"

namespace kws {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMeta {
  ModelConfig model;
  FeatureConfig features;
  LabelMap labels = LabelMap::standard();
  std::uint64_t train_seed = 0;
  std::uint64_t init_seed = 0;
  int epoch = 0;
  double dev_accuracy = 0.0;
};

struct Checkpoint {
  CheckpointMeta meta;
  Parameters<float> params;
};

// File layout:
//   "KWSCKPT\0"               8 bytes
//   header length             uint64 little-endian
//   header                    UTF-8 JSON: format_version, model_config,
//                             feature_config, feature_fingerprint, labels,
//                             seeds, epoch, dev_accuracy, tensors[{name,
//                             shape, offset}] (offsets in bytes from the
//                             start of the blob section)
//   tensor blobs              float32 little-endian, row-major
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// The JSON header alone, pretty-printed.
std::string read_checkpoint_header(const std::filesystem::path& path);

}  // namespace kws

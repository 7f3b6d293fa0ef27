// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kws/audio_io.hpp"
#include "kws/manifest.hpp"

namespace kws::testing {

/// Fresh empty directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// One second of a class-specific tone pair (or noise for NULL) with a
/// per-utterance onset, detune and noise floor.
Waveform toy_utterance(std::size_t label_index, int variant, std::uint64_t seed);

struct ToyCorpus {
  std::filesystem::path root;
  std::filesystem::path manifest;          // root/manifest.jsonl
  std::vector<ManifestEntry> entries;      // train entries plus dev copies
  std::vector<ManifestEntry> train;
};

/// 41 classes x `per_class` utterances under `root/audio/<label>/`. Every
/// utterance is in train; dev holds a copy of each so that training can run
/// its per-epoch evaluation.
ToyCorpus make_toy_corpus(const std::filesystem::path& root, int per_class = 3, std::uint64_t seed = 1);

/// A full-size dataset tree: every command directory with `files` clips.
void write_command_tree(const std::filesystem::path& root, int files, double seconds = 0.05);

/// White noise, `seconds` long.
Waveform white_noise(double seconds, double amplitude, std::uint64_t seed);

}  // namespace kws::testing

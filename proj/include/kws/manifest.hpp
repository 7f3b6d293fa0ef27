// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kws/audio_io.hpp"
#include "kws/labels.hpp"

namespace kws {

enum class Split { train, dev, test };
enum class Source { original, synthetic, noise };

std::string_view to_string(Split s);
std::string_view to_string(Source s);
Split parse_split(std::string_view s);
Source parse_source(std::string_view s);

/// One labeled utterance.
struct ManifestEntry {
  std::string id;
  std::filesystem::path path;
  std::string label;
  Split split = Split::train;
  Source source = Source::original;
  double duration_s = 0.0;
  std::string display;  // optional Arabic form; omitted from JSON when empty

  bool operator==(const ManifestEntry&) const = default;
};

/// How command files are assigned to train/dev/test. Fractional mode is
/// stratified per label: dev and test each get floor(n * fraction) files and
/// train gets the remainder. An explicit assignment (keyed by the path
/// relative to the dataset root, e.g. "yes/0001.wav") overrides fractions.
struct SplitSpec {
  double train = 0.6;
  double dev = 0.2;
  double test = 0.2;
  std::optional<std::map<std::string, Split>> explicit_assignment;

  void validate() const;
  /// Reads a JSON object {"relative/path.wav": "train"|"dev"|"test", ...}.
  static SplitSpec from_file(const std::filesystem::path& path);
};

/// Scans `dataset_root/<label>/*.wav` (and optionally `synthetic_root` laid out
/// the same way). Synthetic entries always land in train. Output is sorted by
/// id and is identical for a fixed seed.
std::vector<ManifestEntry> build_manifest(const std::filesystem::path& dataset_root,
                                          const std::optional<std::filesystem::path>& synthetic_root,
                                          const SplitSpec& split_spec, std::uint64_t seed,
                                          const LabelMap& labels = LabelMap::standard());

/// Synthetic-only scan (all train / synthetic); used when synthetic audio is
/// attached at training time.
std::vector<ManifestEntry> scan_synthetic(const std::filesystem::path& synthetic_root,
                                          const LabelMap& labels = LabelMap::standard());

struct NoiseSource {
  std::string name;
  Waveform audio;
};

struct CarvedClip {
  ManifestEntry entry;  // path is relative: "noise_clips/<id>.wav"
  Waveform audio;
};

/// Cuts `count` NULL-labelled clips of `clip_seconds` from uniformly chosen
/// sources at uniform offsets. Sources shorter than a clip are skipped.
/// Split by count: floor(20%) dev, floor(20%) test, remainder train.
std::vector<CarvedClip> carve_noise_clips(std::span<const NoiseSource> noise_sources, int count,
                                          double clip_seconds, std::uint64_t seed);

/// Split sizes for `n` items under the floor-then-remainder rule.
struct SplitCounts {
  std::size_t train = 0, dev = 0, test = 0;
};
SplitCounts split_counts(std::size_t n, double dev_fraction, double test_fraction);

// JSON Lines, one entry per line, keys: id, path, label, split, source,
// duration_s and optionally display.
std::string to_jsonl_line(const ManifestEntry& e);
ManifestEntry parse_jsonl_line(std::string_view line);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
/// Relative paths are resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

std::vector<ManifestEntry> filter_split(std::span<const ManifestEntry> entries, Split split);

/// Sorted list of *.wav files directly inside `dir`.
std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir);

}  // namespace kws

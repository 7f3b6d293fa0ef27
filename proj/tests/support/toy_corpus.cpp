// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "toy_corpus.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <unistd.h>

#include "kws/labels.hpp"
#include "kws/rng.hpp"

namespace kws::testing {
namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const std::uint64_t salt = derive_seed(static_cast<std::uint64_t>(::getpid()), tag, counter++);
  path_ = fs::temp_directory_path() / ("kws-" + tag + "-" + std::to_string(salt % 1000000007ULL));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Waveform white_noise(double seconds, double amplitude, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(std::lround(seconds * kSampleRate));
  Waveform w;
  w.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) w.samples(i) = amplitude * rng.uniform(-1.0, 1.0);
  return w;
}

Waveform toy_utterance(std::size_t label_index, int variant, std::uint64_t seed) {
  const LabelMap labels = LabelMap::standard();
  Waveform w = white_noise(1.0, 0.01, derive_seed(seed, labels.name(label_index), static_cast<std::uint64_t>(variant)));
  if (label_index == labels.null_index()) {
    w.samples *= 20.0;
    return w;
  }
  const double c = static_cast<double>(label_index);
  const double f0 = 200.0 * std::pow(3600.0 / 200.0, c / 39.0) * (1.0 + 0.004 * (variant - 1));
  const double onset = 0.05 + 0.08 * variant;
  const double length = 0.55;
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    if (t < onset || t > onset + length) continue;
    const double env = std::sin(std::numbers::pi * (t - onset) / length);
    w.samples(i) += env * (0.5 * std::sin(2 * std::numbers::pi * f0 * t) +
                           0.2 * std::sin(2 * std::numbers::pi * 1.5 * f0 * t));
  }
  return w;
}

ToyCorpus make_toy_corpus(const fs::path& root, int per_class, std::uint64_t seed) {
  const LabelMap labels = LabelMap::standard();
  ToyCorpus corpus;
  corpus.root = root;
  corpus.manifest = root / "manifest.jsonl";
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const fs::path dir = root / "audio" / labels.name(c);
    fs::create_directories(dir);
    for (int k = 0; k < per_class; ++k) {
      const std::string stem = "u" + std::to_string(k);
      const fs::path file = dir / (stem + ".wav");
      const Waveform w = toy_utterance(c, k, seed);
      write_wav(file, w);
      ManifestEntry e;
      e.id = "toy/" + labels.name(c) + "/" + stem;
      e.path = fs::path("audio") / labels.name(c) / (stem + ".wav");
      e.label = labels.name(c);
      e.split = Split::train;
      e.source = c == labels.null_index() ? Source::noise : Source::original;
      e.duration_s = static_cast<double>(w.samples.size()) / kSampleRate;
      corpus.train.push_back(e);
      ManifestEntry dev = e;
      dev.id = "toy-dev/" + labels.name(c) + "/" + stem;
      dev.split = Split::dev;
      corpus.entries.push_back(e);
      corpus.entries.push_back(dev);
    }
  }
  write_manifest(corpus.manifest, corpus.entries);
  corpus.entries = read_manifest(corpus.manifest);
  corpus.train = filter_split(corpus.entries, Split::train);
  return corpus;
}

void write_command_tree(const fs::path& root, int files, double seconds) {
  const LabelMap labels = LabelMap::standard();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (c == labels.null_index()) continue;
    const fs::path dir = root / labels.name(c);
    fs::create_directories(dir);
    for (int k = 0; k < files; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "%04d.wav", k);
      write_wav(dir / name, white_noise(seconds, 0.1, derive_seed(c, "tree", static_cast<std::uint64_t>(k))));
    }
  }
}

}  // namespace kws::testing

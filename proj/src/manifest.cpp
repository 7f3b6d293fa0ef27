// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kws/errors.hpp"
#include "kws/rng.hpp"

namespace kws {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::original: return "original";
    case Source::synthetic: return "synthetic";
    case Source::noise: return "noise";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split: " + std::string(s));
}

Source parse_source(std::string_view s) {
  if (s == "original") return Source::original;
  if (s == "synthetic") return Source::synthetic;
  if (s == "noise") return Source::noise;
  throw ValidationError("unknown source: " + std::string(s));
}

void SplitSpec::validate() const {
  if (explicit_assignment) return;
  for (double f : {train, dev, test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("split fractions must lie in [0, 1]");
  }
  if (std::abs(train + dev + test - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
}

SplitSpec SplitSpec::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("split file " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("split file must hold a JSON object");
  std::map<std::string, Split> assignment;
  for (const auto& [key, value] : j.items()) {
    assignment[fs::path(key).lexically_normal().generic_string()] = parse_split(value.get<std::string>());
  }
  SplitSpec spec;
  spec.explicit_assignment = std::move(assignment);
  return spec;
}

SplitCounts split_counts(std::size_t n, double dev_fraction, double test_fraction) {
  // The epsilon keeps e.g. 0.2 * 5 from landing just below 1.
  const auto take = [n](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9));
  };
  SplitCounts c;
  c.dev = std::min(n, take(dev_fraction));
  c.test = std::min(n - c.dev, take(test_fraction));
  c.train = n - c.dev - c.test;
  return c;
}

std::vector<fs::path> list_wavs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

namespace {

std::vector<fs::path> sorted_subdirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

ManifestEntry make_entry(const fs::path& file, const std::string& label, const LabelMap& labels,
                         Source source) {
  const WavInfo info = probe_wav(file);
  if (info.sample_rate != kSampleRate) {
    throw ValidationError(file.string() + ": sample rate " + std::to_string(info.sample_rate) +
                          " Hz, expected 16000 Hz");
  }
  if (info.n_samples == 0) throw ValidationError(file.string() + ": empty audio");
  ManifestEntry e;
  e.id = std::string(to_string(source)) + "/" + label + "/" + file.stem().string();
  e.path = file.lexically_normal();
  e.label = label;
  e.source = source;
  e.duration_s = static_cast<double>(info.n_samples) / info.sample_rate;
  e.display = labels.display(labels.index(label));
  if (e.display == label) e.display.clear();
  return e;
}

// Per-label command directories; NULL is reserved for carved noise.
std::vector<std::pair<std::string, std::vector<fs::path>>> scan_commands(const fs::path& root,
                                                                        const LabelMap& labels) {
  std::vector<std::pair<std::string, std::vector<fs::path>>> out;
  for (const auto& dir : sorted_subdirs(root)) {
    const std::string label = dir.filename().string();
    if (!labels.contains(label) || label == kNullLabel) {
      throw LabelError("directory '" + dir.string() + "' does not name a command");
    }
    auto files = list_wavs(dir);
    if (files.empty()) throw CoverageError("command directory '" + dir.string() + "' has no WAV files");
    out.emplace_back(label, std::move(files));
  }
  return out;
}

}  // namespace

std::vector<ManifestEntry> scan_synthetic(const fs::path& synthetic_root, const LabelMap& labels) {
  std::vector<ManifestEntry> out;
  for (const auto& [label, files] : scan_commands(synthetic_root, labels)) {
    for (const auto& f : files) {
      ManifestEntry e = make_entry(f, label, labels, Source::synthetic);
      e.split = Split::train;
      out.push_back(std::move(e));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<ManifestEntry> build_manifest(const fs::path& dataset_root,
                                          const std::optional<fs::path>& synthetic_root,
                                          const SplitSpec& split_spec, std::uint64_t seed,
                                          const LabelMap& labels) {
  split_spec.validate();
  std::vector<ManifestEntry> out;
  for (auto& [label, files] : scan_commands(dataset_root, labels)) {
    std::vector<Split> assignment(files.size(), Split::train);
    if (split_spec.explicit_assignment) {
      for (std::size_t i = 0; i < files.size(); ++i) {
        const auto rel = (fs::path(label) / files[i].filename()).generic_string();
        auto it = split_spec.explicit_assignment->find(rel);
        if (it == split_spec.explicit_assignment->end()) {
          throw ValidationError("split file has no assignment for " + rel);
        }
        assignment[i] = it->second;
      }
    } else {
      std::vector<std::size_t> order(files.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(seed, "split/" + label));
      rng.shuffle(std::span(order));
      const SplitCounts counts = split_counts(files.size(), split_spec.dev, split_spec.test);
      for (std::size_t k = 0; k < order.size(); ++k) {
        assignment[order[k]] = k < counts.dev ? Split::dev
                               : k < counts.dev + counts.test ? Split::test
                                                              : Split::train;
      }
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      ManifestEntry e = make_entry(files[i], label, labels, Source::original);
      e.split = assignment[i];
      out.push_back(std::move(e));
    }
  }
  if (synthetic_root) {
    auto synthetic = scan_synthetic(*synthetic_root, labels);
    out.insert(out.end(), synthetic.begin(), synthetic.end());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<CarvedClip> carve_noise_clips(std::span<const NoiseSource> noise_sources, int count,
                                          double clip_seconds, std::uint64_t seed) {
  if (count < 0) throw ValidationError("clip count must be non-negative");
  if (!(clip_seconds > 0.0)) throw ValidationError("clip length must be positive");
  const auto clip_len = static_cast<Eigen::Index>(std::llround(clip_seconds * kSampleRate));
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < noise_sources.size(); ++i) {
    require_dataset_audio(noise_sources[i].audio, noise_sources[i].name);
    if (noise_sources[i].audio.size() >= clip_len) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw InsufficientMaterialError("no noise source is at least " + std::to_string(clip_seconds) + " s long");
  }
  const SplitCounts counts = split_counts(static_cast<std::size_t>(count), 0.2, 0.2);
  Rng rng(derive_seed(seed, "noise-clips"));
  std::vector<CarvedClip> clips;
  clips.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const auto& src = noise_sources[eligible[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(eligible.size()) - 1))]];
    const auto offset = static_cast<Eigen::Index>(rng.uniform_int(0, src.audio.size() - clip_len));
    CarvedClip clip;
    clip.audio.samples = src.audio.samples.segment(offset, clip_len);
    char name[32];
    std::snprintf(name, sizeof name, "null_%04d", k);
    clip.entry.id = std::string("noise/NULL/") + name;
    clip.entry.path = fs::path("noise_clips") / (std::string(name) + ".wav");
    clip.entry.label = std::string(kNullLabel);
    clip.entry.source = Source::noise;
    clip.entry.duration_s = static_cast<double>(clip_len) / kSampleRate;
    const auto idx = static_cast<std::size_t>(k);
    clip.entry.split = idx < counts.train ? Split::train
                       : idx < counts.train + counts.dev ? Split::dev
                                                         : Split::test;
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::string to_jsonl_line(const ManifestEntry& e) {
  ojson j;
  j["id"] = e.id;
  j["path"] = e.path.generic_string();
  j["label"] = e.label;
  j["split"] = to_string(e.split);
  j["source"] = to_string(e.source);
  j["duration_s"] = e.duration_s;
  if (!e.display.empty()) j["display"] = e.display;
  return j.dump();
}

ManifestEntry parse_jsonl_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.path = j.at("path").get<std::string>();
    e.label = j.at("label").get<std::string>();
    e.split = parse_split(j.at("split").get<std::string>());
    e.source = parse_source(j.at("source").get<std::string>());
    e.duration_s = j.at("duration_s").get<double>();
    if (j.contains("display")) e.display = j["display"].get<std::string>();
    if (!(e.duration_s > 0.0)) throw ValidationError("manifest entry " + e.id + " has non-positive duration");
    if (e.source == Source::synthetic && e.split != Split::train) {
      throw ValidationError("synthetic entry " + e.id + " outside the train split");
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed manifest line: ") + ex.what());
  }
}

void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : entries) out << to_jsonl_line(e) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto e = parse_jsonl_line(line);
    if (e.path.is_relative()) e.path = (path.parent_path() / e.path).lexically_normal();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> filter_split(std::span<const ManifestEntry> entries, Split split) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

}  // namespace kws

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "kws/errors.hpp"
#include "kws/labels.hpp"
#include "kws/manifest.hpp"
#include "toy_corpus.hpp"

namespace fs = std::filesystem;
using namespace kws;
namespace toy = kws::testing;

namespace {

std::map<Split, int> count_splits(const std::vector<ManifestEntry>& entries) {
  std::map<Split, int> c;
  for (const auto& e : entries) c[e.split]++;
  return c;
}

std::string serialise(const std::vector<ManifestEntry>& entries) {
  std::string s;
  for (const auto& e : entries) s += to_jsonl_line(e) + "\n";
  return s;
}

std::vector<NoiseSource> noise_sources(int n, double seconds) {
  std::vector<NoiseSource> out;
  for (int i = 0; i < n; ++i) out.push_back({"n" + std::to_string(i), toy::white_noise(seconds, 0.3, 50 + i)});
  return out;
}

}  // namespace

TEST(LabelMap, HasFortyOneContiguousEntriesWithOneNull) {
  const LabelMap m = LabelMap::standard();
  ASSERT_EQ(m.size(), 41u);
  EXPECT_EQ(m.null_index(), 40u);
  int nulls = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(m.index(m.name(i)), i);
    nulls += m.name(i) == kNullLabel ? 1 : 0;
    if (i != m.null_index()) EXPECT_FALSE(m.display(i).empty());
  }
  EXPECT_EQ(nulls, 1);
  EXPECT_THROW(m.index("banana"), LabelError);
}

TEST(LabelMap, RejectsDuplicateOrMissingNull) {
  EXPECT_THROW(LabelMap({{"a", ""}, {"b", ""}}), LabelError);
  EXPECT_THROW(LabelMap({{"a", ""}, {"a", ""}, {"NULL", ""}}), LabelError);
}

class ManifestTree : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new toy::TempDir("manifest");
    toy::write_command_tree(dir_->path() / "asc", 10);
    toy::write_command_tree(dir_->path() / "tts", 1);
  }
  static void TearDownTestSuite() { delete dir_; }
  static toy::TempDir* dir_;
};
toy::TempDir* ManifestTree::dir_ = nullptr;

TEST_F(ManifestTree, FractionalSplitCounts) {
  const auto m = build_manifest(dir_->path() / "asc", std::nullopt, SplitSpec{}, 7);
  ASSERT_EQ(m.size(), 400u);
  const auto c = count_splits(m);
  EXPECT_EQ(c.at(Split::train), 240);
  EXPECT_EQ(c.at(Split::dev), 80);
  EXPECT_EQ(c.at(Split::test), 80);
}

TEST_F(ManifestTree, SyntheticEntriesGoToTrain) {
  const auto m = build_manifest(dir_->path() / "asc", dir_->path() / "tts", SplitSpec{}, 7);
  ASSERT_EQ(m.size(), 440u);
  int synthetic = 0;
  for (const auto& e : m) {
    if (e.source == Source::synthetic) {
      ++synthetic;
      EXPECT_EQ(e.split, Split::train);
    }
  }
  EXPECT_EQ(synthetic, 40);
  EXPECT_EQ(count_splits(m).at(Split::train), 280);
}

TEST_F(ManifestTree, DeterministicAndSeedSensitive) {
  const auto a = serialise(build_manifest(dir_->path() / "asc", std::nullopt, SplitSpec{}, 7));
  const auto b = serialise(build_manifest(dir_->path() / "asc", std::nullopt, SplitSpec{}, 7));
  const auto c = serialise(build_manifest(dir_->path() / "asc", std::nullopt, SplitSpec{}, 8));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST_F(ManifestTree, BijectionOntoFiles) {
  const auto m = build_manifest(dir_->path() / "asc", std::nullopt, SplitSpec{}, 3);
  std::set<fs::path> files;
  for (const auto& e : m) {
    EXPECT_TRUE(files.insert(fs::weakly_canonical(e.path)).second);
    EXPECT_NE(e.label, kNullLabel);
    EXPECT_GT(e.duration_s, 0.0);
  }
  std::set<fs::path> on_disk;
  for (const auto& d : fs::recursive_directory_iterator(dir_->path() / "asc")) {
    if (d.is_regular_file()) on_disk.insert(fs::weakly_canonical(d.path()));
  }
  EXPECT_EQ(files, on_disk);
}

TEST_F(ManifestTree, SplitsAreStratifiedPerLabel) {
  const auto m = build_manifest(dir_->path() / "asc", std::nullopt, SplitSpec{}, 5);
  std::map<std::string, std::map<Split, int>> per;
  for (const auto& e : m) per[e.label][e.split]++;
  for (const auto& [label, c] : per) {
    EXPECT_EQ(c.at(Split::train), 6) << label;
    EXPECT_EQ(c.at(Split::dev), 2) << label;
    EXPECT_EQ(c.at(Split::test), 2) << label;
  }
}

TEST(Manifest, UnknownDirectoryIsLabelError) {
  toy::TempDir dir("manifest-bad");
  fs::create_directories(dir.path() / "banana");
  write_wav(dir.path() / "banana" / "a.wav", toy::white_noise(0.05, 0.1, 1));
  EXPECT_THROW(build_manifest(dir.path(), std::nullopt, SplitSpec{}, 1), LabelError);
}

TEST(Manifest, NullDirectoryIsLabelError) {
  toy::TempDir dir("manifest-null");
  fs::create_directories(dir.path() / "NULL");
  write_wav(dir.path() / "NULL" / "a.wav", toy::white_noise(0.05, 0.1, 1));
  EXPECT_THROW(build_manifest(dir.path(), std::nullopt, SplitSpec{}, 1), LabelError);
}

TEST(Manifest, EmptyDirectoryIsCoverageError) {
  toy::TempDir dir("manifest-empty");
  fs::create_directories(dir.path() / "yes");
  EXPECT_THROW(build_manifest(dir.path(), std::nullopt, SplitSpec{}, 1), CoverageError);
}

TEST(Manifest, ExplicitSplitFileOverridesFractions) {
  toy::TempDir dir("manifest-explicit");
  toy::write_command_tree(dir.path() / "asc", 2);
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& label : fs::directory_iterator(dir.path() / "asc")) {
    for (const auto& file : fs::directory_iterator(label.path())) {
      assignment[label.path().filename().string() + "/" + file.path().filename().string()] = "train";
    }
  }
  assignment["yes/0000.wav"] = "test";
  assignment["yes/0001.wav"] = "dev";
  std::ofstream(dir.path() / "split.json") << assignment.dump();
  const SplitSpec spec = SplitSpec::from_file(dir.path() / "split.json");
  const auto m = build_manifest(dir.path() / "asc", std::nullopt, spec, 1);
  int seen = 0;
  for (const auto& e : m) {
    if (e.id == "original/yes/0000") {
      EXPECT_EQ(e.split, Split::test);
      ++seen;
    } else if (e.id == "original/yes/0001") {
      EXPECT_EQ(e.split, Split::dev);
      ++seen;
    } else {
      EXPECT_EQ(e.split, Split::train);
    }
  }
  EXPECT_EQ(seen, 2);

  assignment.erase("no/0000.wav");
  std::ofstream(dir.path() / "partial.json") << assignment.dump();
  EXPECT_THROW(build_manifest(dir.path() / "asc", std::nullopt, SplitSpec::from_file(dir.path() / "partial.json"), 1),
               ValidationError);
}

TEST(SplitCounts, FloorForDevAndTestRemainderForTrain) {
  const auto a = split_counts(300, 0.2, 0.2);
  EXPECT_EQ(a.train, 180u);
  EXPECT_EQ(a.dev, 60u);
  EXPECT_EQ(a.test, 60u);
  const auto b = split_counts(5, 0.2, 0.2);
  EXPECT_EQ(b.train, 3u);
  EXPECT_EQ(b.dev, 1u);
  EXPECT_EQ(b.test, 1u);
  for (std::size_t n = 0; n < 200; ++n) {
    const auto c = split_counts(n, 0.2, 0.2);
    EXPECT_EQ(c.train + c.dev + c.test, n);
    EXPECT_LE(c.dev, c.train + 1);
  }
}

TEST(CarveNoise, ThreeHundredClips) {
  const auto sources = noise_sources(3, 5.0);
  const auto clips = carve_noise_clips(sources, 300, 1.0, 7);
  ASSERT_EQ(clips.size(), 300u);
  std::map<Split, int> c;
  for (const auto& clip : clips) {
    c[clip.entry.split]++;
    EXPECT_EQ(clip.entry.label, kNullLabel);
    EXPECT_EQ(clip.entry.source, Source::noise);
    EXPECT_EQ(clip.audio.samples.size(), 16000);
    EXPECT_DOUBLE_EQ(clip.entry.duration_s, 1.0);
  }
  EXPECT_EQ(c[Split::train], 180);
  EXPECT_EQ(c[Split::dev], 60);
  EXPECT_EQ(c[Split::test], 60);
}

TEST(CarveNoise, FiveClipsSplitThreeOneOne) {
  const auto clips = carve_noise_clips(noise_sources(1, 2.0), 5, 1.0, 1);
  std::map<Split, int> c;
  for (const auto& clip : clips) c[clip.entry.split]++;
  EXPECT_EQ(c[Split::train], 3);
  EXPECT_EQ(c[Split::dev], 1);
  EXPECT_EQ(c[Split::test], 1);
}

TEST(CarveNoise, ClipsAreVerbatimSourceSegments) {
  const auto sources = noise_sources(2, 3.0);
  for (const auto& clip : carve_noise_clips(sources, 20, 0.5, 4)) {
    bool found = false;
    for (const auto& s : sources) {
      const auto& x = s.audio.samples;
      for (Eigen::Index off = 0; off + 8000 <= x.size() && !found; ++off) {
        found = x.segment(off, 8000) == clip.audio.samples;
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST(CarveNoise, DeterministicForSeed) {
  const auto sources = noise_sources(2, 3.0);
  const auto a = carve_noise_clips(sources, 10, 1.0, 9);
  const auto b = carve_noise_clips(sources, 10, 1.0, 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].entry, b[i].entry);
    EXPECT_EQ(a[i].audio.samples, b[i].audio.samples);
  }
}

TEST(CarveNoise, InsufficientMaterial) {
  EXPECT_THROW(carve_noise_clips({}, 5, 1.0, 1), InsufficientMaterialError);
  EXPECT_THROW(carve_noise_clips(noise_sources(2, 0.5), 5, 1.0, 1), InsufficientMaterialError);
}

TEST(Jsonl, RoundTripsEntries) {
  ManifestEntry e;
  e.id = "original/yes/0001";
  e.path = "asc/yes/0001.wav";
  e.label = "yes";
  e.split = Split::dev;
  e.source = Source::original;
  e.duration_s = 0.98;
  e.display = LabelMap::standard().display(LabelMap::standard().index("yes"));
  const std::string line = to_jsonl_line(e);
  EXPECT_EQ(line.find("\"id\""), 1u);
  EXPECT_EQ(parse_jsonl_line(line), e);
}

TEST(Jsonl, ReadResolvesRelativePaths) {
  toy::TempDir dir("jsonl");
  ManifestEntry e;
  e.id = "noise/NULL/null_0000";
  e.path = "noise_clips/null_0000.wav";
  e.label = "NULL";
  e.source = Source::noise;
  e.duration_s = 1.0;
  write_manifest(dir.path() / "m.jsonl", std::vector<ManifestEntry>{e});
  const auto back = read_manifest(dir.path() / "m.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].path, dir.path() / "noise_clips/null_0000.wav");
}

TEST(Jsonl, RejectsSyntheticOutsideTrain) {
  EXPECT_THROW(parse_jsonl_line(
                   R"({"id":"s","path":"a.wav","label":"yes","split":"dev","source":"synthetic","duration_s":1.0})"),
               ValidationError);
  EXPECT_THROW(parse_jsonl_line(
                   R"({"id":"s","path":"a.wav","label":"yes","split":"dev","source":"original","duration_s":0})"),
               ValidationError);
}

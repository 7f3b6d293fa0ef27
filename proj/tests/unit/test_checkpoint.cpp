// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "kws/checkpoint.hpp"
#include "kws/errors.hpp"
#include "toy_corpus.hpp"

using namespace kws;
namespace toy = kws::testing;

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.meta.model.d_model = 16;
  ck.meta.model.n_heads = 4;
  ck.meta.model.n_layers = 2;
  ck.meta.train_seed = 123;
  ck.meta.init_seed = 456;
  ck.meta.epoch = 7;
  ck.meta.dev_accuracy = 81.25;
  ck.params = init_parameters<float>(ck.meta.model, 9);
  ck.params.classifier.bias(3) = -0.0f;
  ck.params.postnet.bias(1) = 1e-39f;  // subnormal
  return ck;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  toy::TempDir dir("ckpt");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(dir.path() / "a.ckpt", ck);
  const Checkpoint back = load_checkpoint(dir.path() / "a.ckpt");
  EXPECT_EQ(back.meta.model, ck.meta.model);
  EXPECT_EQ(back.meta.features, ck.meta.features);
  EXPECT_EQ(back.meta.train_seed, 123u);
  EXPECT_EQ(back.meta.init_seed, 456u);
  EXPECT_EQ(back.meta.epoch, 7);
  EXPECT_EQ(back.meta.dev_accuracy, 81.25);
  EXPECT_EQ(back.meta.labels.size(), ck.meta.labels.size());
  const auto a = tensor_views(ck.params), b = tensor_views(back.params);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].name, b[i].name);
    ASSERT_EQ(a[i].size(), b[i].size());
    EXPECT_EQ(std::memcmp(a[i].data, b[i].data, sizeof(float) * static_cast<std::size_t>(a[i].size())), 0)
        << a[i].name;
  }
  save_checkpoint(dir.path() / "b.ckpt", back);
  EXPECT_EQ(slurp(dir.path() / "a.ckpt"), slurp(dir.path() / "b.ckpt"));
}

TEST(Checkpoint, HeaderDescribesContents) {
  toy::TempDir dir("ckpt-header");
  save_checkpoint(dir.path() / "a.ckpt", sample_checkpoint());
  const auto h = nlohmann::json::parse(read_checkpoint_header(dir.path() / "a.ckpt"));
  EXPECT_EQ(h.at("format_version"), kCheckpointFormatVersion);
  EXPECT_EQ(h.at("feature_fingerprint"), FeatureConfig{}.fingerprint());
  EXPECT_EQ(h.at("labels").size(), 41u);
  EXPECT_EQ(h.at("tensors").size(), tensor_views(sample_checkpoint().params).size());
  EXPECT_EQ(h.at("epoch"), 7);
}

TEST(Checkpoint, CorruptionIsDetected) {
  toy::TempDir dir("ckpt-bad");
  const auto good = dir.path() / "good.ckpt";
  save_checkpoint(good, sample_checkpoint());
  const std::string bytes = slurp(good);
  const auto bad = dir.path() / "bad.ckpt";

  spit(bad, bytes.substr(0, bytes.size() - 10));
  EXPECT_THROW(load_checkpoint(bad), CorruptFileError);

  spit(bad, bytes.substr(0, 30));
  EXPECT_THROW(load_checkpoint(bad), CorruptFileError);

  std::string magic = bytes;
  magic[0] = 'X';
  spit(bad, magic);
  EXPECT_THROW(load_checkpoint(bad), FormatError);

  std::string version = bytes;
  const auto vpos = version.find("\"format_version\":1");
  ASSERT_NE(vpos, std::string::npos);
  version[vpos + 17] = '9';
  spit(bad, version);
  EXPECT_THROW(load_checkpoint(bad), FormatError);

  std::string fp = bytes;
  const std::string fingerprint = FeatureConfig{}.fingerprint();
  const auto fpos = fp.find(fingerprint);
  ASSERT_NE(fpos, std::string::npos);
  fp[fpos] = fp[fpos] == 'a' ? 'b' : 'a';
  spit(bad, fp);
  EXPECT_THROW(load_checkpoint(bad), CorruptFileError);

  std::string header = bytes;
  const auto hpos = header.find("\"tensors\"");
  ASSERT_NE(hpos, std::string::npos);
  header[hpos + 1] = 'x';
  spit(bad, header);
  EXPECT_THROW(load_checkpoint(bad), CorruptFileError);

  EXPECT_THROW(load_checkpoint(dir.path() / "absent.ckpt"), IoError);
}

TEST(Checkpoint, SaveLeavesNoTemporaryFiles) {
  toy::TempDir dir("ckpt-tmp");
  save_checkpoint(dir.path() / "a.ckpt", sample_checkpoint());
  save_checkpoint(dir.path() / "a.ckpt", sample_checkpoint());
  int files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1);
}

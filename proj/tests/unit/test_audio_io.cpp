// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kws/audio_io.hpp"
#include "kws/errors.hpp"
#include "kws/rng.hpp"
#include "toy_corpus.hpp"

namespace fs = std::filesystem;
using namespace kws;
namespace toy = kws::testing;

namespace {

void put_u32(std::string& s, std::uint32_t v) { s.append(reinterpret_cast<const char*>(&v), 4); }
void put_u16(std::string& s, std::uint16_t v) { s.append(reinterpret_cast<const char*>(&v), 2); }

// Hand-built RIFF/WAVE file; `data_bytes_declared` lets a test lie about the
// payload size.
std::string wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                      const std::string& payload, std::int64_t data_bytes_declared = -1) {
  std::string fmt;
  put_u16(fmt, format);
  put_u16(fmt, channels);
  put_u32(fmt, rate);
  put_u32(fmt, rate * channels * bits / 8);
  put_u16(fmt, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(fmt, bits);
  std::string body = "WAVE";
  body += "fmt ";
  put_u32(body, static_cast<std::uint32_t>(fmt.size()));
  body += fmt;
  body += "data";
  put_u32(body, static_cast<std::uint32_t>(data_bytes_declared >= 0 ? data_bytes_declared : payload.size()));
  body += payload;
  std::string file = "RIFF";
  put_u32(file, static_cast<std::uint32_t>(body.size()));
  return file + body;
}

std::string pcm16(const std::vector<std::int16_t>& v) {
  return {reinterpret_cast<const char*>(v.data()), v.size() * 2};
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST(ReadWav, MapsPcm16CodePoints) {
  toy::TempDir dir("wav");
  dump(dir.path() / "a.wav", wav_bytes(1, 1, 16000, 16, pcm16({0, 16384, -32768})));
  const Waveform w = read_wav(dir.path() / "a.wav");
  ASSERT_EQ(w.samples.size(), 3);
  EXPECT_EQ(w.samples(0), 0.0);
  EXPECT_EQ(w.samples(1), 0.5);
  EXPECT_EQ(w.samples(2), -1.0);
  EXPECT_EQ(w.sample_rate, 16000);
}

TEST(ReadWav, OneSecondHasSixteenThousandSamples) {
  toy::TempDir dir("wav");
  write_wav(dir.path() / "s.wav", toy::white_noise(1.0, 0.2, 3));
  EXPECT_EQ(read_wav(dir.path() / "s.wav").samples.size(), 16000);
}

TEST(ReadWav, PreservesHeaderRate) {
  toy::TempDir dir("wav");
  dump(dir.path() / "a.wav", wav_bytes(1, 1, 8000, 16, pcm16({1, 2})));
  EXPECT_EQ(read_wav(dir.path() / "a.wav").sample_rate, 8000);
}

TEST(ReadWav, ReadsFloat32) {
  toy::TempDir dir("wav");
  const float v[] = {0.25f, -0.75f};
  dump(dir.path() / "f.wav", wav_bytes(3, 1, 16000, 32, std::string(reinterpret_cast<const char*>(v), sizeof v)));
  const Waveform w = read_wav(dir.path() / "f.wav");
  ASSERT_EQ(w.samples.size(), 2);
  EXPECT_EQ(w.samples(0), 0.25);
  EXPECT_EQ(w.samples(1), -0.75);
}

TEST(ReadWav, StereoIsUnsupportedLayout) {
  toy::TempDir dir("wav");
  dump(dir.path() / "st.wav", wav_bytes(1, 2, 16000, 16, pcm16({1, 2, 3, 4})));
  EXPECT_THROW(read_wav(dir.path() / "st.wav"), LayoutError);
}

TEST(ReadWav, TruncatedDataIsCorrupt) {
  toy::TempDir dir("wav");
  dump(dir.path() / "t.wav", wav_bytes(1, 1, 16000, 16, pcm16({1, 2}), 400));
  EXPECT_THROW(read_wav(dir.path() / "t.wav"), CorruptFileError);
}

TEST(ReadWav, MalformedHeaderIsFormatError) {
  toy::TempDir dir("wav");
  dump(dir.path() / "bad.wav", "RIFX0000WAVEjunk");
  EXPECT_THROW(read_wav(dir.path() / "bad.wav"), FormatError);
  dump(dir.path() / "mp3.wav", wav_bytes(85, 1, 16000, 16, pcm16({1})));
  EXPECT_THROW(read_wav(dir.path() / "mp3.wav"), FormatError);
}

TEST(ReadWav, MissingFileIsIoError) { EXPECT_THROW(read_wav("/nonexistent/x.wav"), IoError); }

TEST(WriteWav, RoundTripWithinQuantisation) {
  toy::TempDir dir("wav");
  Waveform w;
  w.samples = Eigen::VectorXd{{0.0, 0.5}};
  write_wav(dir.path() / "r.wav", w);
  const Waveform r = read_wav(dir.path() / "r.wav");
  ASSERT_EQ(r.samples.size(), 2);
  EXPECT_NEAR(r.samples(0), 0.0, 1.0 / 32768);
  EXPECT_NEAR(r.samples(1), 0.5, 1.0 / 32768);
}

TEST(WriteWav, ClampsFullScale) {
  toy::TempDir dir("wav");
  Waveform w;
  w.samples = Eigen::VectorXd{{1.0, -1.0, 3.0}};
  write_wav(dir.path() / "c.wav", w);
  std::ifstream in(dir.path() / "c.wav", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_GE(bytes.size(), 44u + 6u);
  std::int16_t codes[3];
  std::memcpy(codes, bytes.data() + bytes.size() - 6, 6);
  EXPECT_EQ(codes[0], 32767);
  EXPECT_EQ(codes[1], -32768);
  EXPECT_EQ(codes[2], 32767);
}

TEST(WriteWav, RejectsNaN) {
  toy::TempDir dir("wav");
  Waveform w;
  w.samples = Eigen::VectorXd{{0.0, std::numeric_limits<double>::quiet_NaN()}};
  EXPECT_THROW(write_wav(dir.path() / "n.wav", w), ValidationError);
}

TEST(WriteWav, UnwritablePathIsIoError) {
  Waveform w;
  w.samples = Eigen::VectorXd::Zero(4);
  EXPECT_THROW(write_wav("/nonexistent-dir/sub/x.wav", w), IoError);
}

TEST(WavProperty, RoundTripIsIdentityWithinOneCode) {
  toy::TempDir dir("wav");
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Waveform w;
    w.samples.resize(rng.uniform_int(1, 3000));
    for (auto& v : w.samples) v = rng.uniform(-1.0, 1.0);
    if (trial % 5 == 0) w.samples(0) = 1.0;
    write_wav(dir.path() / "p.wav", w);
    const Waveform r = read_wav(dir.path() / "p.wav");
    ASSERT_EQ(r.samples.size(), w.samples.size());
    EXPECT_LE((r.samples - w.samples).cwiseAbs().maxCoeff(), 1.0 / 32768);
  }
}

TEST(DatasetAudio, RejectsOtherRates) {
  Waveform w;
  w.samples = Eigen::VectorXd::Zero(10);
  w.sample_rate = 8000;
  try {
    require_dataset_audio(w, "x.wav");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("resample"), std::string::npos);
  }
}

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "kws/errors.hpp"

namespace kws {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ParsedWav {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_bytes = 0;
};

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ParsedWav parse(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  const std::string where = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(where + ": not a RIFF/WAVE file");
  }
  ParsedWav wav;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw FormatError(where + ": short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      wav.format = le16(f);
      wav.channels = le16(f + 2);
      wav.sample_rate = le32(f + 4);
      wav.bits = le16(f + 14);
      if (wav.format == kFormatExtensible) {
        if (size < 40) throw FormatError(where + ": short extensible fmt chunk");
        wav.format = le16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(where + ": data chunk precedes fmt chunk");
      if (body + size > bytes.size()) {
        throw CorruptFileError(where + ": data chunk truncated (" + std::to_string(bytes.size() - body) +
                               " of " + std::to_string(size) + " bytes)");
      }
      wav.data = bytes.data() + body;
      wav.data_bytes = size;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw FormatError(where + ": missing fmt chunk");
  if (wav.data == nullptr) throw CorruptFileError(where + ": missing data chunk");
  if (wav.channels != 1) {
    throw LayoutError(where + ": " + std::to_string(wav.channels) + " channels, only mono is supported");
  }
  if (wav.sample_rate == 0) throw FormatError(where + ": zero sample rate");
  const bool pcm16 = wav.format == kFormatPcm && wav.bits == 16;
  const bool float32 = wav.format == kFormatFloat && wav.bits == 32;
  if (!pcm16 && !float32) {
    throw FormatError(where + ": unsupported encoding (format " + std::to_string(wav.format) + ", " +
                      std::to_string(wav.bits) + " bits)");
  }
  if (wav.data_bytes % (wav.bits / 8) != 0) throw CorruptFileError(where + ": partial sample in data chunk");
  return wav;
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const ParsedWav wav = parse(bytes, path);
  Waveform out;
  out.sample_rate = static_cast<int>(wav.sample_rate);
  if (wav.format == kFormatPcm) {
    const auto n = static_cast<Eigen::Index>(wav.data_bytes / 2);
    out.samples.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.samples[i] = static_cast<std::int16_t>(le16(wav.data + 2 * i)) / 32768.0;
    }
  } else {
    const auto n = static_cast<Eigen::Index>(wav.data_bytes / 4);
    out.samples.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::uint32_t bits = le32(wav.data + 4 * i);
      float v;
      std::memcpy(&v, &bits, sizeof v);
      out.samples[i] = v;
    }
  }
  return out;
}

WavInfo probe_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const ParsedWav wav = parse(bytes, path);
  return {static_cast<int>(wav.sample_rate), static_cast<Eigen::Index>(wav.data_bytes / (wav.bits / 8))};
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  if (!wave.samples.allFinite()) throw ValidationError("refusing to write non-finite samples to " + path.string());
  if (wave.sample_rate <= 0) throw ValidationError("invalid sample rate for " + path.string());
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  std::string out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  out += "RIFF";
  put32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, 2 * n);
  for (Eigen::Index i = 0; i < wave.samples.size(); ++i) {
    const double scaled = std::nearbyint(wave.samples[i] * 32768.0);
    const auto code = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put16(out, static_cast<std::uint16_t>(code));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

void require_dataset_audio(const Waveform& wave, const std::filesystem::path& origin) {
  if (wave.sample_rate != kSampleRate) {
    throw ValidationError(origin.string() + ": sample rate " + std::to_string(wave.sample_rate) +
                          " Hz, expected 16000 Hz (resample the file first)");
  }
  if (!wave.samples.allFinite()) throw ValidationError(origin.string() + ": non-finite samples");
}

}  // namespace kws

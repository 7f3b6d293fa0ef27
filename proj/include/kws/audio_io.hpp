// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <filesystem>

#include <Eigen/Core>

namespace kws {

inline constexpr int kSampleRate = 16000;

/// Mono time-domain signal.
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = kSampleRate;

  Eigen::Index size() const noexcept { return samples.size(); }
  double duration_seconds() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Reads a RIFF/WAVE file holding mono PCM16 or IEEE float32 samples.
/// PCM16 codes map to s / 32768. Throws FormatError on a malformed header,
/// LayoutError for multi-channel audio, CorruptFileError when the data chunk
/// is truncated and IoError when the file cannot be opened.
Waveform read_wav(const std::filesystem::path& path);

/// Sample rate and sample count without decoding the payload.
struct WavInfo {
  int sample_rate = 0;
  Eigen::Index n_samples = 0;
};
WavInfo probe_wav(const std::filesystem::path& path);

/// Writes canonical 16 kHz-style PCM16 mono (the waveform's own rate is kept).
/// Samples are scaled by 32768, rounded and clamped to [-32768, 32767].
/// Non-finite samples raise ValidationError.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

/// Throws ValidationError unless the waveform is 16 kHz with finite samples.
void require_dataset_audio(const Waveform& wave, const std::filesystem::path& origin);

}  // namespace kws

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "kws/audio_io.hpp"
#include "kws/augment.hpp"
#include "kws/rng.hpp"

namespace kws {

/// MFCC front-end settings. Framing is non-centred with no padding, the
/// window is periodic Hann, the mel scale is HTK and the DCT is orthonormal
/// DCT-II; those fixed choices are part of the fingerprint.
struct FeatureConfig {
  int n_mfcc = 40;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int n_mels = 80;
  int fft_size = 512;
  int sample_rate = kSampleRate;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
  bool cepstral_mean_norm = false;

  Eigen::Index window_samples() const;
  Eigen::Index hop_samples() const;
  Eigen::Index n_bins() const { return fft_size / 2 + 1; }
  void validate() const;
  std::string fingerprint() const;
  bool operator==(const FeatureConfig&) const = default;
};

/// frames x coefficients.
struct FeatureMatrix {
  Eigen::MatrixXd data;
  std::string fingerprint;

  Eigen::Index n_frames() const noexcept { return data.rows(); }
  Eigen::Index n_coeffs() const noexcept { return data.cols(); }
};

/// 1 + floor((n - window) / hop); zero when n < window.
Eigen::Index frame_count(Eigen::Index n_samples, const FeatureConfig& config);

/// frames x (fft_size/2 + 1). Throws TooShortError when |x| < window.
Eigen::MatrixXcd stft(const Waveform& x, const FeatureConfig& config);

/// n_mels x (fft_size/2 + 1) triangular filters on the HTK mel scale.
Eigen::MatrixXd mel_filterbank(const FeatureConfig& config);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Orthonormal DCT-II, n_out x n_in (rows are basis vectors).
Eigen::MatrixXd dct_matrix(Eigen::Index n_out, Eigen::Index n_in);

/// Precomputes window, filterbank and DCT once; immutable and shareable.
class MfccExtractor {
 public:
  explicit MfccExtractor(FeatureConfig config);

  FeatureMatrix operator()(const Waveform& x) const;
  /// Log mel energies, frames x n_mels.
  Eigen::MatrixXd log_mel(const Waveform& x) const;

  const FeatureConfig& config() const noexcept { return config_; }
  const Eigen::MatrixXd& filterbank() const noexcept { return filterbank_; }

 private:
  FeatureConfig config_;
  Eigen::VectorXd window_;
  Eigen::MatrixXd filterbank_;
  Eigen::MatrixXd dct_;
};

FeatureMatrix mfcc(const Waveform& x, const FeatureConfig& config);

/// SpecAugment-style masking limits.
struct MaskSpec {
  int max_time_mask_frames = 20;
  int max_freq_mask_bins = 8;
  int n_time_masks = 1;
  int n_freq_masks = 1;

  void validate(Eigen::Index n_coeffs) const;
  bool operator==(const MaskSpec&) const = default;
};

enum class MaskAxis { time, frequency };

/// Zeroes `width` rows (time) or columns (frequency) starting at `start`.
struct MaskDraw {
  MaskAxis axis = MaskAxis::time;
  Eigen::Index start = 0;
  Eigen::Index width = 0;
};

MaskDraw draw_mask(MaskAxis axis, Eigen::Index extent, int max_width, Rng& rng);
void apply_mask(FeatureMatrix& feat, const MaskDraw& draw);

/// Scheduler over the frequency-domain registry with rate gamma.
FeatureMatrix apply_freq_augment(const FeatureMatrix& feat, const MaskSpec& mask, const AugmentationPolicy& policy,
                                 Rng& rng);

/// Flat dump: one JSON header line (shape, fingerprint) then little-endian
/// float32 values in row-major order.
void write_feature_dump(const std::filesystem::path& path, const FeatureMatrix& feat);
FeatureMatrix read_feature_dump(const std::filesystem::path& path);

}  // namespace kws

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/features.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include "kws/errors.hpp"

namespace kws {

Eigen::Index FeatureConfig::window_samples() const {
  return static_cast<Eigen::Index>(std::llround(window_ms * sample_rate / 1000.0));
}

Eigen::Index FeatureConfig::hop_samples() const {
  return static_cast<Eigen::Index>(std::llround(hop_ms * sample_rate / 1000.0));
}

void FeatureConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (window_samples() < 1 || hop_samples() < 1) throw ConfigError("window and hop must span at least one sample");
  if (fft_size < window_samples()) throw ConfigError("fft_size must be >= window length in samples");
  if (n_mels < 1 || n_mfcc < 1 || n_mfcc > n_mels) throw ConfigError("need 1 <= n_mfcc <= n_mels");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) throw ConfigError("need 0 <= fmin < fmax <= sr/2");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
}

std::string FeatureConfig::fingerprint() const {
  std::ostringstream s;
  s.precision(17);
  s << "mfcc/v1;sr=" << sample_rate << ";win=" << window_samples() << ";hop=" << hop_samples()
    << ";fft=" << fft_size << ";mels=" << n_mels << ";ceps=" << n_mfcc << ";fmin=" << fmin << ";fmax=" << fmax
    << ";floor=" << log_floor << ";cmn=" << (cepstral_mean_norm ? 1 : 0)
    << ";window=hann-periodic;mel=htk;dct=ortho-ii;frames=uncentered";
  return s.str();
}

Eigen::Index frame_count(Eigen::Index n_samples, const FeatureConfig& config) {
  const Eigen::Index win = config.window_samples();
  if (n_samples < win) return 0;
  return 1 + (n_samples - win) / config.hop_samples();
}

namespace {

Eigen::VectorXd hann_periodic(Eigen::Index n) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

template <typename PerFrame>
void for_each_spectrum(const Waveform& x, const FeatureConfig& config, const Eigen::VectorXd& window,
                       PerFrame&& per_frame) {
  const Eigen::Index win = config.window_samples();
  const Eigen::Index frames = frame_count(x.size(), config);
  if (frames == 0) {
    throw TooShortError("signal of " + std::to_string(x.size()) + " samples is shorter than one " +
                        std::to_string(win) + "-sample window");
  }
  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(config.fft_size), 0.0);
  std::vector<std::complex<double>> spec;
  const Eigen::Index hop = config.hop_samples();
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index i = 0; i < win; ++i) buf[static_cast<std::size_t>(i)] = x.samples[t * hop + i] * window[i];
    fft.fwd(spec, buf);
    per_frame(t, spec);
  }
}

}  // namespace

Eigen::MatrixXcd stft(const Waveform& x, const FeatureConfig& config) {
  config.validate();
  const Eigen::VectorXd window = hann_periodic(config.window_samples());
  Eigen::MatrixXcd out(frame_count(x.size(), config), config.n_bins());
  for_each_spectrum(x, config, window, [&](Eigen::Index t, const std::vector<std::complex<double>>& spec) {
    for (Eigen::Index k = 0; k < config.n_bins(); ++k) out(t, k) = spec[static_cast<std::size_t>(k)];
  });
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd mel_filterbank(const FeatureConfig& config) {
  config.validate();
  const double lo = hz_to_mel(config.fmin);
  const double hi = hz_to_mel(config.fmax);
  std::vector<double> edges(static_cast<std::size_t>(config.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(config.n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(config.n_mels, config.n_bins());
  const double bin_hz = static_cast<double>(config.sample_rate) / config.fft_size;
  for (int m = 0; m < config.n_mels; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    for (Eigen::Index k = 0; k < config.n_bins(); ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double up = (f - left) / (centre - left);
      const double down = (right - f) / (right - centre);
      fb(m, k) = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

Eigen::MatrixXd dct_matrix(Eigen::Index n_out, Eigen::Index n_in) {
  Eigen::MatrixXd d(n_out, n_in);
  const double n = static_cast<double>(n_in);
  for (Eigen::Index k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (Eigen::Index i = 0; i < n_in; ++i) {
      d(k, i) = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                                 (2.0 * n));
    }
  }
  return d;
}

MfccExtractor::MfccExtractor(FeatureConfig config) : config_(std::move(config)) {
  config_.validate();
  window_ = hann_periodic(config_.window_samples());
  filterbank_ = mel_filterbank(config_);
  dct_ = dct_matrix(config_.n_mfcc, config_.n_mels);
}

Eigen::MatrixXd MfccExtractor::log_mel(const Waveform& x) const {
  const Eigen::Index bins = config_.n_bins();
  Eigen::MatrixXd power(frame_count(x.size(), config_), bins);
  for_each_spectrum(x, config_, window_, [&](Eigen::Index t, const std::vector<std::complex<double>>& spec) {
    for (Eigen::Index k = 0; k < bins; ++k) power(t, k) = std::norm(spec[static_cast<std::size_t>(k)]);
  });
  Eigen::MatrixXd mel = power * filterbank_.transpose();
  return mel.array().max(config_.log_floor).log().matrix();
}

FeatureMatrix MfccExtractor::operator()(const Waveform& x) const {
  FeatureMatrix out;
  out.data = log_mel(x) * dct_.transpose();
  if (config_.cepstral_mean_norm) out.data.rowwise() -= out.data.colwise().mean();
  out.fingerprint = config_.fingerprint();
  return out;
}

FeatureMatrix mfcc(const Waveform& x, const FeatureConfig& config) { return MfccExtractor(config)(x); }

// --- masking -------------------------------------------------------------------

void MaskSpec::validate(Eigen::Index n_coeffs) const {
  if (max_time_mask_frames < 0 || max_freq_mask_bins < 0 || n_time_masks < 0 || n_freq_masks < 0) {
    throw ConfigError("mask parameters must be non-negative");
  }
  if (max_freq_mask_bins > n_coeffs) throw ConfigError("frequency mask wider than the coefficient axis");
}

MaskDraw draw_mask(MaskAxis axis, Eigen::Index extent, int max_width, Rng& rng) {
  MaskDraw d;
  d.axis = axis;
  d.width = std::min<Eigen::Index>(rng.uniform_int(0, max_width), extent);
  d.start = rng.uniform_int(0, extent - d.width);
  return d;
}

void apply_mask(FeatureMatrix& feat, const MaskDraw& d) {
  const Eigen::Index extent = d.axis == MaskAxis::time ? feat.n_frames() : feat.n_coeffs();
  if (d.start < 0 || d.width < 0 || d.start + d.width > extent) throw ValidationError("mask out of range");
  if (d.width == 0) return;
  if (d.axis == MaskAxis::time) {
    feat.data.middleRows(d.start, d.width).setZero();
  } else {
    feat.data.middleCols(d.start, d.width).setZero();
  }
}

FeatureMatrix apply_freq_augment(const FeatureMatrix& feat, const MaskSpec& mask, const AugmentationPolicy& policy,
                                 Rng& rng) {
  note_augmentation_invocation();
  mask.validate(feat.n_coeffs());
  FeatureMatrix out = feat;
  for (FreqOp op : select_ops(std::span<const FreqOp>(policy.freq_ops), policy.gamma_rate, rng)) {
    if (op == FreqOp::time_mask) {
      for (int i = 0; i < mask.n_time_masks; ++i) {
        apply_mask(out, draw_mask(MaskAxis::time, out.n_frames(), mask.max_time_mask_frames, rng));
      }
    } else {
      for (int i = 0; i < mask.n_freq_masks; ++i) {
        apply_mask(out, draw_mask(MaskAxis::frequency, out.n_coeffs(), mask.max_freq_mask_bins, rng));
      }
    }
  }
  return out;
}

// --- dumps ---------------------------------------------------------------------

void write_feature_dump(const std::filesystem::path& path, const FeatureMatrix& feat) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  nlohmann::ordered_json header;
  header["shape"] = {feat.n_frames(), feat.n_coeffs()};
  header["dtype"] = "float32-le";
  header["fingerprint"] = feat.fingerprint;
  out << header.dump() << '\n';
  for (Eigen::Index r = 0; r < feat.n_frames(); ++r) {
    for (Eigen::Index c = 0; c < feat.n_coeffs(); ++c) {
      const float v = static_cast<float>(feat.data(r, c));
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      const char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>(bits >> 24)};
      out.write(b, 4);
    }
  }
  if (!out) throw IoError("short write to " + path.string());
}

FeatureMatrix read_feature_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad feature dump header: " + e.what());
  }
  const auto rows = header.at("shape").at(0).get<Eigen::Index>();
  const auto cols = header.at("shape").at(1).get<Eigen::Index>();
  FeatureMatrix feat;
  feat.fingerprint = header.at("fingerprint").get<std::string>();
  feat.data.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      unsigned char b[4];
      if (!in.read(reinterpret_cast<char*>(b), 4)) throw CorruptFileError(path.string() + ": truncated feature dump");
      const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
      float v;
      std::memcpy(&v, &bits, sizeof v);
      feat.data(r, c) = v;
    }
  }
  return feat;
}

}  // namespace kws

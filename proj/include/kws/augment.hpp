// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "kws/audio_io.hpp"
#include "kws/rng.hpp"

namespace kws {

// Integer draws below use closed ranges [lo, hi]; real draws use [lo, hi).

enum class TimeOp { noise, reverb, gain, fade };
enum class FreqOp { time_mask, freq_mask };

std::string_view to_string(TimeOp op);
std::string_view to_string(FreqOp op);
TimeOp parse_time_op(std::string_view s);
FreqOp parse_freq_op(std::string_view s);

/// Rates and operator registries for the time and frequency domains.
struct AugmentationPolicy {
  double lambda_rate = 0.5;  // time-domain rate
  double gamma_rate = 0.5;   // frequency-domain rate
  std::vector<TimeOp> time_ops{TimeOp::noise, TimeOp::reverb, TimeOp::gain, TimeOp::fade};
  std::vector<FreqOp> freq_ops{FreqOp::time_mask, FreqOp::freq_mask};
  std::uint64_t rng_seed = 0;
  bool normalize_rir_peak = false;

  void validate() const;
  bool operator==(const AugmentationPolicy&) const = default;
};

/// All noise recordings concatenated into one signal.
class NoiseBank {
 public:
  explicit NoiseBank(Waveform concatenated);
  static NoiseBank from_recordings(std::span<const Waveform> recordings);
  static NoiseBank load_directory(const std::filesystem::path& dir);

  const Eigen::VectorXd& signal() const noexcept { return signal_.samples; }
  Eigen::Index length() const noexcept { return signal_.size(); }

 private:
  Waveform signal_;
};

/// Room impulse responses, each exactly one second at 16 kHz.
class ImpulseResponseSet {
 public:
  static constexpr Eigen::Index kResponseLength = kSampleRate;

  explicit ImpulseResponseSet(std::vector<Waveform> responses, bool normalize_peak = false);
  static ImpulseResponseSet load_directory(const std::filesystem::path& dir, bool normalize_peak = false);

  std::size_t size() const noexcept { return responses_.size(); }
  const Eigen::VectorXd& response(std::size_t i) const { return responses_.at(i).samples; }

 private:
  std::vector<Waveform> responses_;
};

/// Reverberation tail bounds in samples: 31 ms and 250 ms at 16 kHz.
inline constexpr Eigen::Index kReverbMinLength = 496;
inline constexpr Eigen::Index kReverbMaxLength = 4000;

inline constexpr double kGainMin = 0.2;
inline constexpr double kGainMax = 2.0;

enum class FadeShape { linear, exponential, logarithmic, quarter_sine, half_sine };
inline constexpr FadeShape kFadeShapes[] = {FadeShape::linear, FadeShape::exponential, FadeShape::logarithmic,
                                            FadeShape::quarter_sine, FadeShape::half_sine};

/// Fade-in parametrisation: maps t in [0, 1] onto [0, 1], shape(0)=0, shape(1)=1.
double fade_shape(FadeShape shape, double t);

// Concrete draws. The random operators sample one of these and then apply it,
// so every operator can also be driven with fixed values.

struct NoiseDraw {
  Eigen::Index start = 0;   // m
  Eigen::Index end = 0;     // n, exclusive
  Eigen::Index offset = 0;  // f, leading zeros
  double gain = 0.0;
};

struct ReverbDraw {
  std::size_t response = 0;
  Eigen::Index length = 0;  // l; taps h[0..l]
};

struct GainDraw {
  double gain = 1.0;
};

struct FadeDraw {
  FadeShape in_shape = FadeShape::linear;
  Eigen::Index in_length = 0;
  FadeShape out_shape = FadeShape::linear;
  Eigen::Index out_length = 0;
};

using TimeOpDraw = std::variant<NoiseDraw, ReverbDraw, GainDraw, FadeDraw>;

/// Each op is kept iff its own U[0,1) draw is >= rate; survivors are shuffled.
template <typename Op>
std::vector<Op> select_ops(std::span<const Op> registry, double rate, Rng& rng) {
  std::vector<Op> chosen;
  for (const Op& op : registry) {
    if (rng.uniform() >= rate) chosen.push_back(op);
  }
  rng.shuffle(std::span(chosen));
  return chosen;
}

NoiseDraw draw_noise(Eigen::Index signal_length, const NoiseBank& bank, Rng& rng);
/// The zero-padded noise segment (xi) for a signal of `signal_length` samples.
Eigen::VectorXd noise_segment(Eigen::Index signal_length, const NoiseBank& bank, const NoiseDraw& draw);
Waveform inject_noise(const Waveform& x, const NoiseBank& bank, const NoiseDraw& draw);
Waveform inject_noise(const Waveform& x, const NoiseBank& bank, Rng& rng);

ReverbDraw draw_reverb(const ImpulseResponseSet& irs, Rng& rng);
/// out[n] = sum_{i=0..min(l, |h|-1)} h[i] x[n-i], truncated to |x| samples.
/// Uses FFT convolution when the direct sum would be large.
Eigen::VectorXd convolve_truncated(const Eigen::VectorXd& x, const Eigen::VectorXd& h, Eigen::Index length);
Waveform reverberate(const Waveform& x, const ImpulseResponseSet& irs, const ReverbDraw& draw);
Waveform reverberate(const Waveform& x, const ImpulseResponseSet& irs, Rng& rng);

GainDraw draw_gain(Rng& rng);
Waveform apply_gain(const Waveform& x, const GainDraw& draw);
Waveform random_gain(const Waveform& x, Rng& rng);

FadeDraw draw_fade(Eigen::Index signal_length, Rng& rng);
/// Product F_in * F_out for a signal of `n` samples.
Eigen::VectorXd fade_envelope(Eigen::Index n, const FadeDraw& draw);
Waveform apply_fade(const Waveform& x, const FadeDraw& draw);
Waveform random_fade(const Waveform& x, Rng& rng);

/// Borrowed, immutable augmentation material. Either may be null when the
/// policy does not register the corresponding operator.
struct AugmentResources {
  const NoiseBank* noise = nullptr;
  const ImpulseResponseSet* rirs = nullptr;
};

/// Throws ConfigError when a registered op lacks its material.
void check_resources(const AugmentationPolicy& policy, const AugmentResources& resources);

Waveform apply_time_draws(const Waveform& x, std::span<const TimeOpDraw> draws, const AugmentResources& resources);
Waveform apply_time_augment(const Waveform& x, const AugmentationPolicy& policy, const AugmentResources& resources,
                            Rng& rng);

/// Number of apply_time_augment / apply_freq_augment invocations in this
/// process. Evaluation paths must leave it untouched.
std::uint64_t augmentation_invocations() noexcept;
void note_augmentation_invocation() noexcept;

}  // namespace kws

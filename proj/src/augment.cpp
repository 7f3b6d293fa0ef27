// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <string>

#include <unsupported/Eigen/FFT>

#include "kws/errors.hpp"
#include "kws/manifest.hpp"

namespace kws {
namespace {

std::atomic<std::uint64_t> g_invocations{0};

template <typename Op>
void require_registry(const std::vector<Op>& ops, const char* what) {
  if (ops.empty()) throw ConfigError(std::string(what) + " registry is empty");
  std::set<Op> unique(ops.begin(), ops.end());
  if (unique.size() != ops.size()) throw ConfigError(std::string(what) + " registry has duplicates");
}

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::string_view to_string(TimeOp op) {
  switch (op) {
    case TimeOp::noise: return "noise";
    case TimeOp::reverb: return "reverb";
    case TimeOp::gain: return "gain";
    case TimeOp::fade: return "fade";
  }
  return "?";
}

std::string_view to_string(FreqOp op) {
  switch (op) {
    case FreqOp::time_mask: return "time_mask";
    case FreqOp::freq_mask: return "freq_mask";
  }
  return "?";
}

TimeOp parse_time_op(std::string_view s) {
  for (TimeOp op : {TimeOp::noise, TimeOp::reverb, TimeOp::gain, TimeOp::fade}) {
    if (to_string(op) == s) return op;
  }
  throw ConfigError("unknown time-domain op: " + std::string(s));
}

FreqOp parse_freq_op(std::string_view s) {
  for (FreqOp op : {FreqOp::time_mask, FreqOp::freq_mask}) {
    if (to_string(op) == s) return op;
  }
  throw ConfigError("unknown frequency-domain op: " + std::string(s));
}

void AugmentationPolicy::validate() const {
  if (!(lambda_rate >= 0.0 && lambda_rate <= 1.0)) throw ConfigError("lambda rate must lie in [0, 1]");
  if (!(gamma_rate >= 0.0 && gamma_rate <= 1.0)) throw ConfigError("gamma rate must lie in [0, 1]");
  require_registry(time_ops, "time-domain");
  require_registry(freq_ops, "frequency-domain");
}

NoiseBank::NoiseBank(Waveform concatenated) : signal_(std::move(concatenated)) {
  require_dataset_audio(signal_, "noise bank");
  if (signal_.size() < 1) throw ValidationError("noise bank is empty");
}

NoiseBank NoiseBank::from_recordings(std::span<const Waveform> recordings) {
  Eigen::Index total = 0;
  for (const auto& r : recordings) {
    require_dataset_audio(r, "noise recording");
    total += r.size();
  }
  Waveform all;
  all.samples.resize(total);
  Eigen::Index at = 0;
  for (const auto& r : recordings) {
    all.samples.segment(at, r.size()) = r.samples;
    at += r.size();
  }
  return NoiseBank(std::move(all));
}

NoiseBank NoiseBank::load_directory(const std::filesystem::path& dir) {
  std::vector<Waveform> recordings;
  for (const auto& f : list_wavs(dir)) recordings.push_back(read_wav(f));
  if (recordings.empty()) throw InsufficientMaterialError("no noise recordings in " + dir.string());
  return from_recordings(recordings);
}

ImpulseResponseSet::ImpulseResponseSet(std::vector<Waveform> responses, bool normalize_peak)
    : responses_(std::move(responses)) {
  if (responses_.empty()) throw ValidationError("impulse response set is empty");
  for (auto& r : responses_) {
    require_dataset_audio(r, "impulse response");
    if (r.size() != kResponseLength) {
      throw ValidationError("impulse responses must be exactly 16000 samples, got " + std::to_string(r.size()));
    }
    if (normalize_peak) {
      const double peak = r.samples.cwiseAbs().maxCoeff();
      if (peak > 0.0) r.samples /= peak;
    }
  }
}

ImpulseResponseSet ImpulseResponseSet::load_directory(const std::filesystem::path& dir, bool normalize_peak) {
  std::vector<Waveform> responses;
  for (const auto& f : list_wavs(dir)) responses.push_back(read_wav(f));
  return ImpulseResponseSet(std::move(responses), normalize_peak);
}

double fade_shape(FadeShape shape, double t) {
  t = std::clamp(t, 0.0, 1.0);
  switch (shape) {
    case FadeShape::linear: return t;
    case FadeShape::exponential: return std::expm1(5.0 * t) / std::expm1(5.0);
    case FadeShape::logarithmic: return std::log1p(9.0 * t) / std::log(10.0);
    case FadeShape::quarter_sine: return std::sin(std::numbers::pi * t / 2.0);
    case FadeShape::half_sine: return (1.0 - std::cos(std::numbers::pi * t)) / 2.0;
  }
  return t;
}

// --- noise -------------------------------------------------------------------

NoiseDraw draw_noise(Eigen::Index signal_length, const NoiseBank& bank, Rng& rng) {
  const Eigen::Index bank_length = bank.length();
  NoiseDraw d;
  d.start = rng.uniform_int(0, bank_length - 1);
  d.end = rng.uniform_int(d.start, std::min(bank_length, d.start + signal_length));
  d.offset = rng.uniform_int(0, std::max<Eigen::Index>(0, signal_length - (d.end - d.start) - 1));
  d.gain = rng.uniform(0.0, 1.0);
  return d;
}

Eigen::VectorXd noise_segment(Eigen::Index signal_length, const NoiseBank& bank, const NoiseDraw& d) {
  const Eigen::Index seg = d.end - d.start;
  if (d.start < 0 || seg < 0 || d.end > bank.length() || seg > signal_length || d.offset < 0 ||
      d.offset + seg > signal_length) {
    throw ValidationError("noise draw out of range");
  }
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(signal_length);
  xi.segment(d.offset, seg) = bank.signal().segment(d.start, seg);
  return xi;
}

Waveform inject_noise(const Waveform& x, const NoiseBank& bank, const NoiseDraw& draw) {
  Waveform out = x;
  if (draw.gain == 0.0 || draw.end == draw.start) return out;
  out.samples += draw.gain * noise_segment(x.size(), bank, draw);
  return out;
}

Waveform inject_noise(const Waveform& x, const NoiseBank& bank, Rng& rng) {
  return inject_noise(x, bank, draw_noise(x.size(), bank, rng));
}

// --- reverberation -------------------------------------------------------------

ReverbDraw draw_reverb(const ImpulseResponseSet& irs, Rng& rng) {
  ReverbDraw d;
  d.response = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(irs.size()) - 1));
  d.length = rng.uniform_int(kReverbMinLength, kReverbMaxLength);
  return d;
}

Eigen::VectorXd convolve_truncated(const Eigen::VectorXd& x, const Eigen::VectorXd& h, Eigen::Index length) {
  if (length < 0) throw ValidationError("negative reverberation length");
  const Eigen::Index n = x.size();
  Eigen::Index taps = std::min(length + 1, h.size());
  while (taps > 0 && h[taps - 1] == 0.0) --taps;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (n == 0 || taps == 0) return out;

  if (taps <= 64 || n * taps <= (Eigen::Index{1} << 20)) {
    for (Eigen::Index i = 0; i < taps; ++i) {
      if (h[i] == 0.0) continue;
      out.tail(n - std::min(i, n)).noalias() += h[i] * x.head(n - std::min(i, n));
    }
    return out;
  }

  const Eigen::Index nfft = next_pow2(n + taps - 1);
  std::vector<double> xa(static_cast<std::size_t>(nfft), 0.0), ha(static_cast<std::size_t>(nfft), 0.0);
  std::copy(x.data(), x.data() + n, xa.begin());
  std::copy(h.data(), h.data() + taps, ha.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> xf, hf;
  fft.fwd(xf, xa);
  fft.fwd(hf, ha);
  for (std::size_t k = 0; k < xf.size(); ++k) xf[k] *= hf[k];
  std::vector<double> y;
  fft.inv(y, xf);
  std::copy(y.begin(), y.begin() + n, out.data());
  return out;
}

Waveform reverberate(const Waveform& x, const ImpulseResponseSet& irs, const ReverbDraw& draw) {
  Waveform out;
  out.sample_rate = x.sample_rate;
  out.samples = convolve_truncated(x.samples, irs.response(draw.response), draw.length);
  return out;
}

Waveform reverberate(const Waveform& x, const ImpulseResponseSet& irs, Rng& rng) {
  return reverberate(x, irs, draw_reverb(irs, rng));
}

// --- gain ----------------------------------------------------------------------

GainDraw draw_gain(Rng& rng) { return {rng.uniform(kGainMin, kGainMax)}; }

Waveform apply_gain(const Waveform& x, const GainDraw& draw) {
  Waveform out = x;
  if (draw.gain != 1.0) out.samples *= draw.gain;
  return out;
}

Waveform random_gain(const Waveform& x, Rng& rng) { return apply_gain(x, draw_gain(rng)); }

// --- fades ---------------------------------------------------------------------

FadeDraw draw_fade(Eigen::Index signal_length, Rng& rng) {
  constexpr std::int64_t n_shapes = std::size(kFadeShapes);
  FadeDraw d;
  d.in_shape = kFadeShapes[rng.uniform_int(0, n_shapes - 1)];
  d.in_length = rng.uniform_int(0, signal_length);
  d.out_shape = kFadeShapes[rng.uniform_int(0, n_shapes - 1)];
  d.out_length = rng.uniform_int(0, signal_length);
  return d;
}

Eigen::VectorXd fade_envelope(Eigen::Index n, const FadeDraw& d) {
  if (d.in_length < 0 || d.in_length > n || d.out_length < 0 || d.out_length > n) {
    throw ValidationError("fade length out of range");
  }
  // Ramp of `len` points from shape(0) to shape(1).
  const auto ramp_at = [](FadeShape s, Eigen::Index i, Eigen::Index len) {
    return len == 1 ? fade_shape(s, 0.0) : fade_shape(s, static_cast<double>(i) / static_cast<double>(len - 1));
  };
  Eigen::VectorXd env = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < d.in_length; ++i) env[i] *= ramp_at(d.in_shape, i, d.in_length);
  for (Eigen::Index i = 0; i < d.out_length; ++i) {
    env[n - d.out_length + i] *= ramp_at(d.out_shape, d.out_length - 1 - i, d.out_length);
  }
  return env;
}

Waveform apply_fade(const Waveform& x, const FadeDraw& draw) {
  Waveform out = x;
  if (draw.in_length == 0 && draw.out_length == 0) return out;
  out.samples.array() *= fade_envelope(x.size(), draw).array();
  return out;
}

Waveform random_fade(const Waveform& x, Rng& rng) { return apply_fade(x, draw_fade(x.size(), rng)); }

// --- pipeline ------------------------------------------------------------------

void check_resources(const AugmentationPolicy& policy, const AugmentResources& resources) {
  for (TimeOp op : policy.time_ops) {
    if (op == TimeOp::noise && resources.noise == nullptr) {
      throw ConfigError("noise injection is registered but no noise bank was supplied");
    }
    if (op == TimeOp::reverb && resources.rirs == nullptr) {
      throw ConfigError("reverberation is registered but no impulse responses were supplied");
    }
  }
}

Waveform apply_time_draws(const Waveform& x, std::span<const TimeOpDraw> draws, const AugmentResources& resources) {
  Waveform cur = x;
  for (const auto& draw : draws) {
    cur = std::visit(
        [&](const auto& d) -> Waveform {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, NoiseDraw>) {
            if (!resources.noise) throw ConfigError("noise draw without a noise bank");
            return inject_noise(cur, *resources.noise, d);
          } else if constexpr (std::is_same_v<D, ReverbDraw>) {
            if (!resources.rirs) throw ConfigError("reverb draw without impulse responses");
            return reverberate(cur, *resources.rirs, d);
          } else if constexpr (std::is_same_v<D, GainDraw>) {
            return apply_gain(cur, d);
          } else {
            return apply_fade(cur, d);
          }
        },
        draw);
  }
  return cur;
}

Waveform apply_time_augment(const Waveform& x, const AugmentationPolicy& policy, const AugmentResources& resources,
                            Rng& rng) {
  note_augmentation_invocation();
  const auto ops = select_ops(std::span<const TimeOp>(policy.time_ops), policy.lambda_rate, rng);
  std::vector<TimeOpDraw> draws;
  draws.reserve(ops.size());
  for (TimeOp op : ops) {
    switch (op) {
      case TimeOp::noise:
        if (!resources.noise) throw ConfigError("noise injection selected without a noise bank");
        draws.emplace_back(draw_noise(x.size(), *resources.noise, rng));
        break;
      case TimeOp::reverb:
        if (!resources.rirs) throw ConfigError("reverberation selected without impulse responses");
        draws.emplace_back(draw_reverb(*resources.rirs, rng));
        break;
      case TimeOp::gain: draws.emplace_back(draw_gain(rng)); break;
      case TimeOp::fade: draws.emplace_back(draw_fade(x.size(), rng)); break;
    }
  }
  return apply_time_draws(x, draws, resources);
}

std::uint64_t augmentation_invocations() noexcept { return g_invocations.load(std::memory_order_relaxed); }
void note_augmentation_invocation() noexcept { g_invocations.fetch_add(1, std::memory_order_relaxed); }

}  // namespace kws

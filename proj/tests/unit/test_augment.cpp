// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "kws/augment.hpp"
#include "kws/errors.hpp"
#include "kws/rng.hpp"
#include "toy_corpus.hpp"

using namespace kws;
namespace toy = kws::testing;

namespace {

Waveform wave(std::initializer_list<double> v) {
  Waveform w;
  w.samples = Eigen::VectorXd(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) w.samples(i++) = x;
  return w;
}

Waveform random_wave(Rng& rng, Eigen::Index n) {
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = rng.uniform(-1.0, 1.0);
  return w;
}

Waveform impulse_response(std::initializer_list<double> head) {
  Waveform w;
  w.samples = Eigen::VectorXd::Zero(ImpulseResponseSet::kResponseLength);
  Eigen::Index i = 0;
  for (double v : head) w.samples(i++) = v;
  return w;
}

NoiseBank ramp_bank(Eigen::Index n) {
  Waveform w;
  w.samples = Eigen::VectorXd::LinSpaced(n, 0.01, 0.5);
  return NoiseBank(w);
}

// Independent construction of the zero-padded noise segment.
Eigen::VectorXd scripted_segment(Eigen::Index ts, const Eigen::VectorXd& bank, const NoiseDraw& d) {
  std::vector<double> xi;
  for (Eigen::Index i = 0; i < d.offset; ++i) xi.push_back(0.0);
  for (Eigen::Index i = d.start; i < d.end; ++i) xi.push_back(bank(i));
  while (static_cast<Eigen::Index>(xi.size()) < ts) xi.push_back(0.0);
  return Eigen::Map<Eigen::VectorXd>(xi.data(), ts);
}

}  // namespace

// --- scheduler -------------------------------------------------------------------

TEST(SelectOps, RateOneSelectsNothing) {
  Rng rng(1);
  const TimeOp ops[] = {TimeOp::noise, TimeOp::reverb, TimeOp::gain, TimeOp::fade};
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(select_ops(std::span<const TimeOp>(ops), 1.0, rng).empty());
}

TEST(SelectOps, RateZeroSelectsAllShuffled) {
  Rng rng(2);
  const TimeOp ops[] = {TimeOp::noise, TimeOp::reverb, TimeOp::gain, TimeOp::fade};
  std::set<std::vector<TimeOp>> orders;
  for (int i = 0; i < 500; ++i) {
    auto chosen = select_ops(std::span<const TimeOp>(ops), 0.0, rng);
    ASSERT_EQ(chosen.size(), 4u);
    orders.insert(chosen);
    std::sort(chosen.begin(), chosen.end());
    EXPECT_TRUE(std::equal(chosen.begin(), chosen.end(), std::begin(ops)));
  }
  EXPECT_EQ(orders.size(), 24u);
}

TEST(SelectOps, InclusionFrequencyMatchesOneMinusRate) {
  const FreqOp ops[] = {FreqOp::time_mask, FreqOp::freq_mask};
  for (double rate : {0.2, 0.5, 0.9}) {
    Rng rng(derive_seed(3, "rate", static_cast<std::uint64_t>(rate * 10)));
    constexpr int kTrials = 100000;
    int hits[2] = {0, 0};
    for (int t = 0; t < kTrials; ++t) {
      for (FreqOp op : select_ops(std::span<const FreqOp>(ops), rate, rng)) hits[static_cast<int>(op)]++;
    }
    const double p = 1.0 - rate;
    const double sigma = std::sqrt(p * (1 - p) / kTrials);
    for (int h : hits) EXPECT_NEAR(h / double(kTrials), p, 3 * sigma + 1e-12) << rate;
  }
}

// --- noise ---------------------------------------------------------------------

TEST(InjectNoise, ZeroGainIsIdentity) {
  Rng rng(4);
  const Waveform x = random_wave(rng, 500);
  const NoiseBank bank = ramp_bank(2000);
  NoiseDraw d = draw_noise(500, bank, rng);
  d.gain = 0.0;
  EXPECT_EQ(inject_noise(x, bank, d).samples, x.samples);
}

TEST(InjectNoise, EmptySegmentIsIdentity) {
  Rng rng(5);
  const Waveform x = random_wave(rng, 100);
  const NoiseBank bank = ramp_bank(300);
  EXPECT_EQ(inject_noise(x, bank, NoiseDraw{40, 40, 0, 0.9}).samples, x.samples);
}

TEST(InjectNoise, HandEvaluatedExample) {
  Waveform ones;
  ones.samples = Eigen::VectorXd::Ones(4);
  const NoiseBank bank(ones);
  const NoiseDraw d{0, 2, 1, 0.5};
  const Waveform out = inject_noise(wave({0, 0, 0, 0}), bank, d);
  EXPECT_EQ(out.samples, (Eigen::VectorXd{{0.0, 0.5, 0.5, 0.0}}));
  EXPECT_EQ(noise_segment(4, bank, d), scripted_segment(4, ones.samples, d));
}

TEST(InjectNoise, DrawsStayInRangeAndSegmentMatchesConstruction) {
  Rng rng(6);
  const NoiseBank bank = ramp_bank(700);
  for (int t = 0; t < 2000; ++t) {
    const auto ts = static_cast<Eigen::Index>(rng.uniform_int(1, 1200));
    const NoiseDraw d = draw_noise(ts, bank, rng);
    ASSERT_GE(d.start, 0);
    ASSERT_LT(d.start, bank.length());
    ASSERT_GE(d.end, d.start);
    ASSERT_LE(d.end, std::min(bank.length(), d.start + ts));
    ASSERT_GE(d.offset, 0);
    ASSERT_LE(d.offset, std::max<Eigen::Index>(0, ts - (d.end - d.start) - 1));
    ASSERT_GE(d.gain, 0.0);
    ASSERT_LT(d.gain, 1.0);
    const Eigen::VectorXd xi = noise_segment(ts, bank, d);
    ASSERT_EQ(xi.size(), ts);
    EXPECT_EQ(xi, scripted_segment(ts, bank.signal(), d));
  }
}

TEST(InjectNoise, FullLengthSegmentHasNoOffset) {
  Rng rng(7);
  const NoiseBank bank = ramp_bank(10);
  for (int t = 0; t < 200; ++t) {
    const NoiseDraw d = draw_noise(3, bank, rng);
    if (d.end - d.start == 3) EXPECT_EQ(d.offset, 0);
  }
}

// --- reverb --------------------------------------------------------------------

TEST(Reverberate, UnitImpulseIsIdentity) {
  Rng rng(8);
  const Waveform x = random_wave(rng, 16000);
  const ImpulseResponseSet irs({impulse_response({1.0})});
  for (int t = 0; t < 5; ++t) EXPECT_EQ(reverberate(x, irs, rng).samples, x.samples);
}

TEST(Reverberate, HandEvaluatedTruncation) {
  const ImpulseResponseSet irs({impulse_response({1.0, 0.5})});
  const Waveform out = reverberate(wave({1, 2, 3}), irs, ReverbDraw{0, 1});
  EXPECT_EQ(out.samples, (Eigen::VectorXd{{1.0, 2.5, 4.0}}));
}

TEST(Reverberate, LengthLimitsTaps) {
  const ImpulseResponseSet irs({impulse_response({1.0, 0.5, 0.25})});
  EXPECT_EQ(reverberate(wave({1, 0, 0, 0}), irs, ReverbDraw{0, 1}).samples, (Eigen::VectorXd{{1.0, 0.5, 0.0, 0.0}}));
}

TEST(Reverberate, Homogeneous) {
  Rng rng(9);
  Waveform h = random_wave(rng, 16000);
  const ImpulseResponseSet irs({h});
  const Waveform x = random_wave(rng, 3000);
  Waveform scaled = x;
  scaled.samples *= 3.0;
  const ReverbDraw d = draw_reverb(irs, rng);
  const Eigen::VectorXd a = reverberate(scaled, irs, d).samples;
  const Eigen::VectorXd b = 3.0 * reverberate(x, irs, d).samples;
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Reverberate, DrawsLengthInBounds) {
  Rng rng(10);
  const ImpulseResponseSet irs({impulse_response({1.0}), impulse_response({0.5})});
  std::set<std::size_t> used;
  for (int t = 0; t < 2000; ++t) {
    const ReverbDraw d = draw_reverb(irs, rng);
    EXPECT_GE(d.length, kReverbMinLength);
    EXPECT_LE(d.length, kReverbMaxLength);
    used.insert(d.response);
  }
  EXPECT_EQ(used.size(), 2u);
}

TEST(Reverberate, FftPathMatchesDirectSum) {
  Rng rng(11);
  const Eigen::VectorXd x = random_wave(rng, 16000).samples;
  const Eigen::VectorXd h = random_wave(rng, 16000).samples;
  const Eigen::VectorXd fast = convolve_truncated(x, h, 4000);
  Eigen::VectorXd slow = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index n = 0; n < x.size(); n += 97) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i <= std::min<Eigen::Index>(4000, n); ++i) acc += h(i) * x(n - i);
    EXPECT_NEAR(fast(n), acc, 1e-9);
  }
}

TEST(ImpulseResponses, RequireOneSecond) {
  Waveform short_ir;
  short_ir.samples = Eigen::VectorXd::Ones(100);
  EXPECT_THROW(ImpulseResponseSet({short_ir}), ValidationError);
  EXPECT_THROW(ImpulseResponseSet(std::vector<Waveform>{}), ValidationError);
}

TEST(ImpulseResponses, OptionalPeakNormalisation) {
  const ImpulseResponseSet irs({impulse_response({0.0, -4.0, 2.0})}, true);
  EXPECT_EQ(irs.response(0)(1), -1.0);
  EXPECT_EQ(irs.response(0)(2), 0.5);
}

// --- gain ----------------------------------------------------------------------

TEST(Gain, UnitGainIsIdentity) {
  Rng rng(12);
  const Waveform x = random_wave(rng, 64);
  EXPECT_EQ(apply_gain(x, GainDraw{1.0}).samples, x.samples);
}

TEST(Gain, ScalesWithoutClipping) {
  EXPECT_EQ(apply_gain(wave({0.1, -0.2}), GainDraw{2.0}).samples, (Eigen::VectorXd{{0.2, -0.4}}));
  EXPECT_EQ(apply_gain(wave({0.9}), GainDraw{2.0}).samples(0), 1.8);
}

TEST(Gain, DrawMeanMatchesUniformMean) {
  Rng rng(13);
  double sum = 0.0;
  double lo = 10, hi = -10;
  for (int i = 0; i < 100000; ++i) {
    const double g = draw_gain(rng).gain;
    sum += g;
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  EXPECT_NEAR(sum / 100000, 1.1, 0.01);
  EXPECT_GE(lo, 0.2);
  EXPECT_LT(hi, 2.0);
}

// --- fades ---------------------------------------------------------------------

TEST(Fade, ShapesAreMonotoneWithFixedEndpoints) {
  for (FadeShape s : kFadeShapes) {
    EXPECT_NEAR(fade_shape(s, 0.0), 0.0, 1e-15);
    EXPECT_NEAR(fade_shape(s, 1.0), 1.0, 1e-15);
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double v = fade_shape(s, i / 1000.0);
      EXPECT_GE(v, prev);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-15);
      prev = v;
    }
  }
}

TEST(Fade, ZeroLengthsAreIdentity) {
  Rng rng(14);
  const Waveform x = random_wave(rng, 300);
  for (FadeShape a : kFadeShapes) {
    for (FadeShape b : kFadeShapes) EXPECT_EQ(apply_fade(x, FadeDraw{a, 0, b, 0}).samples, x.samples);
  }
}

TEST(Fade, LinearRampOverFourSamples) {
  const Waveform out = apply_fade(wave({1, 1, 1, 1}), FadeDraw{FadeShape::linear, 4, FadeShape::linear, 0});
  EXPECT_DOUBLE_EQ(out.samples(0), 0.0);
  EXPECT_DOUBLE_EQ(out.samples(1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(out.samples(2), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(out.samples(3), 1.0);
}

TEST(Fade, FullHalfSineFadeOutEndsAtZero) {
  Rng rng(15);
  const Waveform x = random_wave(rng, 50);
  const Waveform out = apply_fade(x, FadeDraw{FadeShape::linear, 0, FadeShape::half_sine, 50});
  EXPECT_EQ(out.samples(49), 0.0);
  EXPECT_EQ(out.samples(0), x.samples(0));
}

TEST(Fade, EnvelopeIsProductOfRamps) {
  const FadeDraw d{FadeShape::quarter_sine, 5, FadeShape::exponential, 7};
  const Eigen::VectorXd env = fade_envelope(10, d);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const double fin = i < 5 ? fade_shape(FadeShape::quarter_sine, i / 4.0) : 1.0;
    const Eigen::Index j = i - (10 - 7);
    const double fout = j >= 0 ? fade_shape(FadeShape::exponential, 1.0 - j / 6.0) : 1.0;
    EXPECT_NEAR(env(i), fin * fout, 1e-15);
  }
}

TEST(Fade, DrawLengthsCoverClosedRange) {
  Rng rng(16);
  std::set<Eigen::Index> lengths;
  for (int i = 0; i < 3000; ++i) {
    const FadeDraw d = draw_fade(5, rng);
    ASSERT_LE(d.in_length, 5);
    ASSERT_LE(d.out_length, 5);
    lengths.insert(d.in_length);
  }
  EXPECT_EQ(lengths.size(), 6u);
}

// --- pipeline ------------------------------------------------------------------

class Pipeline : public ::testing::Test {
 protected:
  Pipeline()
      : bank_(toy::white_noise(2.0, 0.2, 17)),
        irs_({impulse_response({1.0, 0.3, -0.2}), impulse_response({0.7})}),
        resources_{&bank_, &irs_} {}
  NoiseBank bank_;
  ImpulseResponseSet irs_;
  AugmentResources resources_;
};

TEST_F(Pipeline, LambdaOneIsIdentity) {
  Rng rng(18);
  const Waveform x = random_wave(rng, 1600);
  AugmentationPolicy p;
  p.lambda_rate = 1.0;
  for (int i = 0; i < 50; ++i) EXPECT_EQ(apply_time_augment(x, p, resources_, rng).samples, x.samples);
}

TEST_F(Pipeline, InverseGainsCompose) {
  Rng rng(19);
  const Waveform x = random_wave(rng, 100);
  const TimeOpDraw draws[] = {GainDraw{2.0}, GainDraw{0.5}};
  EXPECT_EQ(apply_time_draws(x, draws, resources_).samples, x.samples);
}

TEST_F(Pipeline, IdentityNoiseThenUnitImpulse) {
  Rng rng(20);
  const Waveform x = random_wave(rng, 800);
  const ImpulseResponseSet unit({impulse_response({1.0})});
  const AugmentResources res{&bank_, &unit};
  const TimeOpDraw draws[] = {NoiseDraw{10, 300, 5, 0.0}, ReverbDraw{0, 2000}};
  EXPECT_EQ(apply_time_draws(x, draws, res).samples, x.samples);
}

TEST_F(Pipeline, PreservesLengthAndIsDeterministic) {
  AugmentationPolicy p;
  p.lambda_rate = 0.0;
  Rng sizes(21);
  for (int t = 0; t < 40; ++t) {
    Rng src(derive_seed(22, "x", static_cast<std::uint64_t>(t)));
    const Waveform x = random_wave(src, static_cast<Eigen::Index>(sizes.uniform_int(1, 4000)));
    Rng a(derive_seed(23, "aug", static_cast<std::uint64_t>(t)));
    Rng b(derive_seed(23, "aug", static_cast<std::uint64_t>(t)));
    const Waveform ya = apply_time_augment(x, p, resources_, a);
    const Waveform yb = apply_time_augment(x, p, resources_, b);
    EXPECT_EQ(ya.samples.size(), x.samples.size());
    EXPECT_EQ(ya.samples, yb.samples);
  }
}

TEST_F(Pipeline, CountsInvocations) {
  const auto before = augmentation_invocations();
  Rng rng(24);
  const Waveform x = random_wave(rng, 100);
  apply_time_augment(x, AugmentationPolicy{}, resources_, rng);
  EXPECT_EQ(augmentation_invocations(), before + 1);
}

TEST(PolicyValidation, RejectsBadRatesAndRegistries) {
  AugmentationPolicy p;
  p.lambda_rate = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = AugmentationPolicy{};
  p.time_ops = {TimeOp::gain, TimeOp::gain};
  EXPECT_THROW(p.validate(), ConfigError);
  p = AugmentationPolicy{};
  p.freq_ops.clear();
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_NO_THROW(AugmentationPolicy{}.validate());
}

TEST(PolicyValidation, MissingMaterialIsConfigError) {
  EXPECT_THROW(check_resources(AugmentationPolicy{}, AugmentResources{}), ConfigError);
  AugmentationPolicy p;
  p.time_ops = {TimeOp::gain, TimeOp::fade};
  EXPECT_NO_THROW(check_resources(p, AugmentResources{}));
}

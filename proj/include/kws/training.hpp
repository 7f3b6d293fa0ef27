// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kws/augment.hpp"
#include "kws/checkpoint.hpp"
#include "kws/features.hpp"
#include "kws/labels.hpp"
#include "kws/manifest.hpp"
#include "kws/model.hpp"

namespace kws {

struct TrainConfig {
  double lr0 = 1e-3;
  int epochs = 0;  // required, no default
  int batch_size = 256;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  int workers = 0;         // 0: hardware concurrency; results do not depend on it
  bool keep_epoch_checkpoints = false;
  bool log_wall_time = false;  // wall_s in metrics.jsonl; off keeps logs reproducible

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Everything that shapes a training run apart from file locations.
struct PipelineConfig {
  FeatureConfig features;
  MaskSpec masks;
  AugmentationPolicy augment;
  ModelConfig model;
  TrainConfig train;

  bool operator==(const PipelineConfig&) const = default;
};

/// Right-padded utterances; only the first `lengths[i]` rows of each
/// feature block are real.
struct Batch {
  std::vector<Matrix<float>> features;  // each max_frames x n_features
  std::vector<Eigen::Index> lengths;
  std::vector<int> labels;

  Eigen::Index max_frames() const noexcept { return features.empty() ? 0 : features.front().rows(); }
  std::size_t size() const noexcept { return labels.size(); }
  auto utterance(std::size_t i) const { return features[i].topRows(lengths[i]); }
};

Batch make_batch(std::span<const Matrix<float>> utterances, std::span<const int> labels);

template <typename S>
struct OptimizerState {
  Parameters<S> first_moment;
  Parameters<S> second_moment;
  std::int64_t step = 0;
};

template <typename S>
OptimizerState<S> make_optimizer_state(const Parameters<S>& params);

/// Mean over rows of -log_probs(row, label). Rows must be normalised.
template <typename S>
double nll_loss(const Matrix<S>& log_probs, std::span<const int> labels);

/// lr0 * (1 - e / E) for 0 <= e < E; DomainError otherwise.
double lr_at(int epoch, int total_epochs, double lr0);

/// Adam with bias correction. Throws NumericFault naming the first tensor
/// with a non-finite gradient; parameters are untouched in that case.
template <typename S>
void adam_step(Parameters<S>& params, const Parameters<S>& grads, OptimizerState<S>& state, double lr,
               const TrainConfig& config);

/// Scales `grads` so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename S>
double clip_global_norm(Parameters<S>& grads, double max_norm);

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
int argmax_class(const Eigen::MatrixBase<Derived>& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(best)) best = static_cast<int>(i);
  }
  return best;
}

/// 100 * mean(predicted == label).
double accuracy(std::span<const int> predicted, std::span<const int> labels);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
  std::optional<double> wall_s;
};

std::string to_json_line(const EpochMetrics& m);

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  std::filesystem::path best_checkpoint;
  int best_epoch = -1;
  double best_dev_accuracy = 0.0;
};

/// Runs the full loop and writes `out_dir/metrics.jsonl` and
/// `out_dir/best.ckpt` (plus `epoch_NNN.ckpt` files when asked to). Numeric
/// faults are rethrown with epoch and batch context.
TrainResult train(std::span<const ManifestEntry> manifest, const PipelineConfig& config,
                  const AugmentResources& resources, const std::filesystem::path& out_dir,
                  const LabelMap& labels = LabelMap::standard(), std::ostream* progress = nullptr);

/// Evaluation-time augmentation; only used to demonstrate that it changes
/// results. Regular evaluation never augments.
struct EvalAugmentation {
  AugmentationPolicy policy;
  MaskSpec masks;
  AugmentResources resources;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;  // rows: true label, cols: predicted
  std::vector<int> predictions;
  std::vector<int> labels;
  std::size_t size() const noexcept { return labels.size(); }
};

/// Eval-mode accuracy and confusion matrix. When `expected_features` is
/// given, its fingerprint must match the checkpoint's (ConfigError
/// otherwise).
EvalReport evaluate(std::span<const ManifestEntry> entries, const Checkpoint& checkpoint,
                    const FeatureConfig* expected_features = nullptr, const EvalAugmentation* augmentation = nullptr,
                    int workers = 0);

/// Class log-probabilities for one waveform under a checkpoint.
Vector<float> infer_log_probs(const Waveform& wave, const Checkpoint& checkpoint);

}  // namespace kws

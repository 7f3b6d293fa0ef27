// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "kws/errors.hpp"

namespace kws {
namespace fs = std::filesystem;

namespace {

// Utterances per gradient chunk. Chunks are reduced in index order, so the
// summed gradient does not depend on how many workers ran them.
constexpr std::size_t kChunkSize = 16;

int resolve_workers(int requested, std::size_t jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(jobs, 1)));
}

// Runs fn(i) for i in [0, n). The exception from the lowest failing index is
// rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  const int count = resolve_workers(workers, n);
  if (count <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < count; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename S>
void add_into(Parameters<S>& acc, const Parameters<S>& g) {
  auto a = tensor_views(acc);
  auto b = tensor_views(g);
  for (std::size_t i = 0; i < a.size(); ++i) a[i].map() += b[i].map();
}

Matrix<float> to_float(const Eigen::MatrixXd& m) { return m.cast<float>(); }

std::vector<Waveform> load_waves(std::span<const ManifestEntry> entries, int workers) {
  std::vector<Waveform> out(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    out[i] = read_wav(entries[i].path);
    require_dataset_audio(out[i], entries[i].path);
  });
  return out;
}

std::vector<int> label_indices(std::span<const ManifestEntry> entries, const LabelMap& labels) {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(static_cast<int>(labels.index(e.label)));
  return out;
}

std::vector<int> predict_all(std::span<const Matrix<float>> feats, const Parameters<float>& params,
                             const ModelConfig& model, int workers) {
  std::vector<int> out(feats.size());
  parallel_for(feats.size(), workers, [&](std::size_t i) {
    out[i] = argmax_class(model_forward<float>(feats[i], params, model, Mode::eval));
  });
  return out;
}

std::string format_number(double v) {
  // Shortest round-trip form keeps metric lines stable and exact.
  return nlohmann::json(v).dump();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("train.lr0 must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs is required and must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
  if (grad_clip < 0.0) throw ConfigError("train.grad_clip must be >= 0");
  if (workers < 0) throw ConfigError("train.workers must be >= 0");
}

Batch make_batch(std::span<const Matrix<float>> utterances, std::span<const int> labels) {
  if (utterances.size() != labels.size()) throw ValidationError("batch: features and labels differ in length");
  if (utterances.empty()) throw EmptyInputError("batch: no utterances");
  Eigen::Index frames = 0;
  const Eigen::Index cols = utterances.front().cols();
  for (const auto& u : utterances) {
    if (u.cols() != cols) throw ValidationError("batch: inconsistent feature width");
    frames = std::max(frames, u.rows());
  }
  Batch b;
  b.labels.assign(labels.begin(), labels.end());
  for (const auto& u : utterances) {
    Matrix<float> padded = Matrix<float>::Zero(frames, cols);
    padded.topRows(u.rows()) = u;
    b.features.push_back(std::move(padded));
    b.lengths.push_back(u.rows());
  }
  return b;
}

template <typename S>
OptimizerState<S> make_optimizer_state(const Parameters<S>& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

template <typename S>
double nll_loss(const Matrix<S>& log_probs, std::span<const int> labels) {
  if (static_cast<std::size_t>(log_probs.rows()) != labels.size()) {
    throw ValidationError("nll_loss: row count differs from label count");
  }
  if (labels.empty()) throw EmptyInputError("nll_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= log_probs.cols()) {
      throw IndexError("nll_loss: label " + std::to_string(labels[i]) + " out of range");
    }
    total -= static_cast<double>(log_probs(static_cast<Eigen::Index>(i), labels[i]));
  }
  return total / static_cast<double>(labels.size());
}

double lr_at(int epoch, int total_epochs, double lr0) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
    throw DomainError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) + ")");
  }
  return lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(total_epochs));
}

template <typename S>
void adam_step(Parameters<S>& params, const Parameters<S>& grads, OptimizerState<S>& state, double lr,
               const TrainConfig& config) {
  if (!(lr > 0.0)) throw DomainError("adam_step: lr must be > 0");
  auto p = tensor_views(params);
  auto g = tensor_views(grads);
  auto m = tensor_views(state.first_moment);
  auto v = tensor_views(state.second_moment);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw ConsistencyError("adam_step: parameter/gradient structure mismatch");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].rows != g[i].rows || p[i].cols != g[i].cols) throw ConsistencyError("adam_step: shape of " + p[i].name);
    if (!g[i].map().allFinite()) throw NumericFault(g[i].name, "non-finite gradient");
  }
  const std::int64_t t = ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto pm = p[i].map();
    auto gm = g[i].map();
    auto mm = m[i].map();
    auto vm = v[i].map();
    for (Eigen::Index k = 0; k < pm.size(); ++k) {
      const double gk = static_cast<double>(gm(k));
      const double mk = b1 * static_cast<double>(mm(k)) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(vm(k)) + (1.0 - b2) * gk * gk;
      mm(k) = static_cast<S>(mk);
      vm(k) = static_cast<S>(vk);
      const double step = lr * (mk / c1) / (std::sqrt(vk / c2) + config.adam_eps);
      pm(k) = static_cast<S>(static_cast<double>(pm(k)) - step);
    }
  }
}

template <typename S>
double clip_global_norm(Parameters<S>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& v : tensor_views(grads)) sq += v.map().template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (auto& v : tensor_views(grads)) v.map() *= scale;
  }
  return norm;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.empty() || labels.empty()) throw DomainError("accuracy: empty input");
  if (predicted.size() != labels.size()) throw ValidationError("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::string to_json_line(const EpochMetrics& m) {
  std::string s = "{\"epoch\":" + std::to_string(m.epoch) + ",\"lr\":" + format_number(m.lr) +
                  ",\"train_loss\":" + format_number(m.train_loss) + ",\"dev_acc\":" + format_number(m.dev_accuracy) +
                  ",\"wall_s\":" + (m.wall_s ? format_number(*m.wall_s) : std::string("null")) + "}";
  return s;
}

TrainResult train(std::span<const ManifestEntry> manifest, const PipelineConfig& config,
                  const AugmentResources& resources, const fs::path& out_dir, const LabelMap& labels,
                  std::ostream* progress) {
  const TrainConfig& tc = config.train;
  tc.validate();
  config.model.validate();
  config.features.validate();
  config.augment.validate();
  config.masks.validate(config.features.n_mfcc);
  check_resources(config.augment, resources);
  if (config.model.n_features != config.features.n_mfcc) throw ConfigError("model.n_features != features.n_mfcc");
  if (config.model.n_classes != static_cast<int>(labels.size())) {
    throw ConfigError("model.n_classes must equal the label count (" + std::to_string(labels.size()) + ")");
  }

  const auto train_entries = filter_split(manifest, Split::train);
  const auto dev_entries = filter_split(manifest, Split::dev);
  if (train_entries.empty()) throw ValidationError("manifest has no train entries");
  if (dev_entries.empty()) throw ValidationError("manifest has no dev entries");
  const auto train_labels = label_indices(train_entries, labels);
  const auto dev_labels = label_indices(dev_entries, labels);

  fs::create_directories(out_dir);
  const auto train_waves = load_waves(train_entries, tc.workers);
  const auto dev_waves = load_waves(dev_entries, tc.workers);

  const MfccExtractor extractor(config.features);
  std::vector<Matrix<float>> dev_feats(dev_waves.size());
  parallel_for(dev_waves.size(), tc.workers, [&](std::size_t i) { dev_feats[i] = to_float(extractor(dev_waves[i]).data); });

  const std::uint64_t init_seed = derive_seed(tc.seed, "model");
  Parameters<float> params = init_parameters<float>(config.model, init_seed);
  OptimizerState<float> opt = make_optimizer_state(params);
  const std::uint64_t augment_root = derive_seed(tc.seed, "augment", config.augment.rng_seed);
  const std::uint64_t dropout_root = derive_seed(tc.seed, "dropout");

  TrainResult result;
  result.best_checkpoint = out_dir / "best.ckpt";
  std::ofstream metrics_log(out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  if (!metrics_log) throw IoError("cannot write " + (out_dir / "metrics.jsonl").string());

  auto make_checkpoint = [&](int epoch, double dev_acc) {
    Checkpoint c;
    c.meta.model = config.model;
    c.meta.features = config.features;
    c.meta.labels = labels;
    c.meta.train_seed = tc.seed;
    c.meta.init_seed = init_seed;
    c.meta.epoch = epoch;
    c.meta.dev_accuracy = dev_acc;
    c.params = params;
    return c;
  };

  const std::size_t n = train_entries.size();
  const auto batch_size = static_cast<std::size_t>(tc.batch_size);
  std::vector<std::size_t> order(n);

  for (int e = 0; e < tc.epochs; ++e) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_at(e, tc.epochs, tc.lr0);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(tc.seed, "shuffle", static_cast<std::uint64_t>(e)));
    shuffle_rng.shuffle(std::span(order));

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += batch_size, ++batch_index) {
      const std::size_t bn = std::min(batch_size, n - b0);
      try {
        // Featurise the batch: time augmentation, MFCC, frequency masks.
        std::vector<Matrix<float>> feats(bn);
        std::vector<int> batch_labels(bn);
        parallel_for(bn, tc.workers, [&](std::size_t k) {
          const std::size_t idx = order[b0 + k];
          Rng rng(derive_seed(augment_root, train_entries[idx].id, static_cast<std::uint64_t>(e)));
          const Waveform aug = apply_time_augment(train_waves[idx], config.augment, resources, rng);
          const FeatureMatrix f = apply_freq_augment(extractor(aug), config.masks, config.augment, rng);
          feats[k] = to_float(f.data);
          batch_labels[k] = train_labels[idx];
        });
        const Batch batch = make_batch(feats, batch_labels);

        const std::size_t n_chunks = (bn + kChunkSize - 1) / kChunkSize;
        std::vector<Parameters<float>> chunk_grads(n_chunks);
        std::vector<double> losses(bn);
        const float scale = -1.0f / static_cast<float>(bn);
        parallel_for(n_chunks, tc.workers, [&](std::size_t c) {
          chunk_grads[c] = zeros_like(params);
          for (std::size_t k = c * kChunkSize; k < std::min(bn, (c + 1) * kChunkSize); ++k) {
            const std::size_t idx = order[b0 + k];
            Rng rng(derive_seed(dropout_root, train_entries[idx].id, static_cast<std::uint64_t>(e)));
            ForwardTrace<float> trace;
            const Matrix<float> x = batch.utterance(k);
            const Vector<float> lp = model_forward<float>(x, params, config.model, Mode::train, &rng, &trace);
            losses[k] = -static_cast<double>(lp(batch.labels[k]));
            Vector<float> d = Vector<float>::Zero(lp.size());
            d(batch.labels[k]) = scale;
            accumulate_gradients(trace, params, d, chunk_grads[c]);
          }
        });
        Parameters<float> grads = std::move(chunk_grads[0]);
        for (std::size_t c = 1; c < n_chunks; ++c) add_into(grads, chunk_grads[c]);
        for (double l : losses) loss_sum += l;
        if (tc.grad_clip > 0.0) clip_global_norm(grads, tc.grad_clip);
        adam_step(params, grads, opt, lr, tc);
      } catch (const NumericFault& f) {
        throw NumericFault(f.where(), "epoch " + std::to_string(e + 1) + ", batch " + std::to_string(batch_index) +
                                          ": " + f.what());
      }
    }

    std::vector<int> dev_pred;
    try {
      dev_pred = predict_all(dev_feats, params, config.model, tc.workers);
    } catch (const NumericFault& f) {
      throw NumericFault(f.where(), "epoch " + std::to_string(e + 1) + ", dev evaluation: " + f.what());
    }
    EpochMetrics m;
    m.epoch = e + 1;
    m.lr = lr;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.dev_accuracy = accuracy(dev_pred, dev_labels);
    if (tc.log_wall_time) {
      m.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.metrics.push_back(m);
    metrics_log << to_json_line(m) << '\n';
    metrics_log.flush();

    if (m.dev_accuracy >= result.best_dev_accuracy || result.best_epoch < 0) {
      result.best_dev_accuracy = m.dev_accuracy;
      result.best_epoch = m.epoch;
      save_checkpoint(result.best_checkpoint, make_checkpoint(m.epoch, m.dev_accuracy));
    }
    if (tc.keep_epoch_checkpoints) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.ckpt", m.epoch);
      save_checkpoint(out_dir / name, make_checkpoint(m.epoch, m.dev_accuracy));
    }
    if (progress) *progress << to_json_line(m) << '\n';
  }
  if (!metrics_log) throw IoError("short write to metrics.jsonl");
  return result;
}

EvalReport evaluate(std::span<const ManifestEntry> entries, const Checkpoint& checkpoint,
                    const FeatureConfig* expected_features, const EvalAugmentation* augmentation, int workers) {
  if (entries.empty()) throw DomainError("evaluate: no entries");
  if (expected_features && expected_features->fingerprint() != checkpoint.meta.features.fingerprint()) {
    throw ConfigError("feature fingerprint mismatch: checkpoint has '" + checkpoint.meta.features.fingerprint() +
                      "', run config has '" + expected_features->fingerprint() + "'");
  }
  if (augmentation) check_resources(augmentation->policy, augmentation->resources);
  const auto& meta = checkpoint.meta;
  const auto labels = label_indices(entries, meta.labels);
  const MfccExtractor extractor(meta.features);

  EvalReport report;
  report.labels = labels;
  report.predictions.resize(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    Waveform wave = read_wav(entries[i].path);
    require_dataset_audio(wave, entries[i].path);
    FeatureMatrix feat;
    if (augmentation) {
      Rng rng(derive_seed(augmentation->seed, entries[i].id));
      wave = apply_time_augment(wave, augmentation->policy, augmentation->resources, rng);
      feat = apply_freq_augment(extractor(wave), augmentation->masks, augmentation->policy, rng);
    } else {
      feat = extractor(wave);
    }
    const Matrix<float> x = to_float(feat.data);
    report.predictions[i] = argmax_class(model_forward<float>(x, checkpoint.params, meta.model, Mode::eval));
  });
  report.accuracy = accuracy(report.predictions, report.labels);
  const auto k = static_cast<Eigen::Index>(meta.labels.size());
  report.confusion = Eigen::MatrixXi::Zero(k, k);
  for (std::size_t i = 0; i < labels.size(); ++i) report.confusion(labels[i], report.predictions[i]) += 1;
  return report;
}

Vector<float> infer_log_probs(const Waveform& wave, const Checkpoint& checkpoint) {
  require_dataset_audio(wave, "input");
  const FeatureMatrix feat = mfcc(wave, checkpoint.meta.features);
  const Matrix<float> x = to_float(feat.data);
  return model_forward<float>(x, checkpoint.params, checkpoint.meta.model, Mode::eval);
}

template OptimizerState<float> make_optimizer_state<float>(const Parameters<float>&);
template OptimizerState<double> make_optimizer_state<double>(const Parameters<double>&);
template double nll_loss<float>(const Matrix<float>&, std::span<const int>);
template double nll_loss<double>(const Matrix<double>&, std::span<const int>);
template void adam_step<float>(Parameters<float>&, const Parameters<float>&, OptimizerState<float>&, double,
                               const TrainConfig&);
template void adam_step<double>(Parameters<double>&, const Parameters<double>&, OptimizerState<double>&, double,
                                const TrainConfig&);
template double clip_global_norm<float>(Parameters<float>&, double);
template double clip_global_norm<double>(Parameters<double>&, double);

}  // namespace kws

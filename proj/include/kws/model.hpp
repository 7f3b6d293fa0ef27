// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "kws/rng.hpp"

namespace kws {

/// Shape of the ConformerGRU classifier: pre-net projection, `n_layers`
/// conformer layers, a bidirectional GRU whose two final states form the
/// utterance embedding, then a ReLU post-net and the class projection.
struct ModelConfig {
  int d_model = 64;
  int n_heads = 2;
  int n_layers = 1;
  int ff_expansion = 4;
  int conv_kernel = 15;
  int gru_hidden = 0;  // 0 means d_model
  double dropout = 0.15;
  int n_classes = 41;
  int n_features = 40;
  bool positional_encoding = false;  // absolute sinusoidal, off by default

  int gru_size() const noexcept { return gru_hidden > 0 ? gru_hidden : d_model; }
  int head_dim() const noexcept { return d_model / n_heads; }
  /// Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class Mode { train, eval };

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Parameters. Activations are frames x channels; a Linear maps rows as
// y = x W^T + b with W stored out x in.

template <typename S>
struct Linear {
  Matrix<S> weight;
  Vector<S> bias;
};

template <typename S>
struct LayerNorm {
  Vector<S> gain;
  Vector<S> offset;
};

template <typename S>
struct FeedForward {
  LayerNorm<S> norm;
  Linear<S> expand;    // d -> ff_expansion * d
  Linear<S> contract;  // ff_expansion * d -> d
};

template <typename S>
struct SelfAttention {
  LayerNorm<S> norm;
  Linear<S> qkv;  // d -> 3d, [Q | K | V]
  Linear<S> out;
};

template <typename S>
struct ConvModule {
  LayerNorm<S> norm;
  Linear<S> pointwise_in;  // d -> 2d, gated by GLU
  Matrix<S> depthwise_weight;  // d x kernel
  Vector<S> depthwise_bias;
  LayerNorm<S> depthwise_norm;
  Linear<S> pointwise_out;
};

template <typename S>
struct ConformerLayer {
  FeedForward<S> ff1;
  SelfAttention<S> attention;
  ConvModule<S> conv;
  FeedForward<S> ff2;
  LayerNorm<S> final_norm;
};

/// Gate order (reset, update, candidate); candidate uses r * (W_hn h + b_hn).
template <typename S>
struct GruDirection {
  Matrix<S> w_ih;  // 3H x in
  Matrix<S> w_hh;  // 3H x H
  Vector<S> b_ih;
  Vector<S> b_hh;
};

template <typename S>
struct Parameters {
  Linear<S> prenet;
  std::vector<ConformerLayer<S>> layers;
  GruDirection<S> gru_forward;
  GruDirection<S> gru_backward;
  Linear<S> postnet;     // 2H -> d
  Linear<S> classifier;  // d -> n_classes
};

/// Calls f(name, tensor) on every tensor of `p` in a fixed order. `P` may be
/// const-qualified; tensors are Matrix<S> or Vector<S>.
template <typename P, typename F>
void for_each_tensor(P& p, F&& f);

/// Non-owning view of one tensor's column-major storage.
template <typename T>
struct TensorView {
  std::string name;
  T* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index size() const noexcept { return rows * cols; }
  auto map() const {
    using Plain = Matrix<std::remove_const_t<T>>;
    if constexpr (std::is_const_v<T>) {
      return Eigen::Map<const Plain>(data, rows, cols);
    } else {
      return Eigen::Map<Plain>(data, rows, cols);
    }
  }
};

template <typename S>
std::vector<TensorView<S>> tensor_views(Parameters<S>& p);
template <typename S>
std::vector<TensorView<const S>> tensor_views(const Parameters<S>& p);

// Forward caches. Everything a backward pass needs is kept here; dropout
// masks are empty when dropout is inactive.

template <typename S>
struct LayerNormCache {
  Matrix<S> normalized;
  Vector<S> inv_std;
};

template <typename S>
struct FeedForwardCache {
  LayerNormCache<S> norm;
  Matrix<S> normed;
  Matrix<S> hidden_pre;
  Matrix<S> hidden;  // after activation and dropout
  Matrix<S> mask_hidden;
  Matrix<S> mask_out;
};

template <typename S>
struct AttentionCache {
  LayerNormCache<S> norm;
  Matrix<S> normed;
  Matrix<S> qkv;
  std::vector<Matrix<S>> weights;  // per head, frames x frames, rows sum to 1
  Matrix<S> context;
  Matrix<S> mask_out;
};

template <typename S>
struct ConvCache {
  LayerNormCache<S> norm;
  Matrix<S> normed;
  Matrix<S> pointwise;  // frames x 2d
  Matrix<S> gated;      // GLU output
  LayerNormCache<S> depthwise_norm;
  Matrix<S> depthwise_normed;
  Matrix<S> activated;
  Matrix<S> mask_out;
};

template <typename S>
struct LayerCache {
  FeedForwardCache<S> ff1;
  AttentionCache<S> attention;
  ConvCache<S> conv;
  FeedForwardCache<S> ff2;
  LayerNormCache<S> final_norm;
};

template <typename S>
struct GruCache {
  Matrix<S> input;
  // Rows indexed by frame.
  Matrix<S> reset, update, candidate, hidden_part, prev_hidden;
  bool reverse = false;
};

/// Activations recorded by a forward pass.
template <typename S>
struct ForwardTrace {
  Mode mode = Mode::eval;
  ModelConfig config;
  Matrix<S> input;
  Matrix<S> mask_prenet;
  std::vector<LayerCache<S>> layers;
  GruCache<S> gru_forward;
  GruCache<S> gru_backward;
  Vector<S> aggregate;
  Vector<S> post_pre;
  Vector<S> post;
  Vector<S> log_probs;
};

/// U(-s, s) weights with s = sqrt(1 / fan_in), zero biases, unit norm gains.
/// Values are drawn in double precision, so the float and double parameter
/// sets for one seed agree up to rounding.
template <typename S>
Parameters<S> init_parameters(const ModelConfig& config, std::uint64_t seed);

template <typename S>
Parameters<S> zeros_like(const Parameters<S>& p);

template <typename To, typename From>
Parameters<To> cast_parameters(const Parameters<From>& p);

/// Closed-form scalar count; equals the sum of tensor sizes.
std::int64_t param_count(const ModelConfig& config);

template <typename S>
std::int64_t tensor_scalar_count(const Parameters<S>& p);

/// Throws ConsistencyError when tensor shapes disagree with `config`.
template <typename S>
void check_shapes(const Parameters<S>& p, const ModelConfig& config);

/// One conformer layer: x + FF/2, self-attention, convolution module,
/// x + FF/2, final layer norm. `rng` is required in train mode with
/// dropout > 0. Throws NumericFault naming the sub-block that produced a
/// non-finite value.
template <typename S>
Matrix<S> conformer_layer_forward(const Matrix<S>& x, const ConformerLayer<S>& layer, const ModelConfig& config,
                                  Mode mode, Rng* rng = nullptr, LayerCache<S>* cache = nullptr,
                                  std::string_view name = "layer");

/// Accumulates into `grads` and returns d(input).
template <typename S>
Matrix<S> conformer_layer_backward(const Matrix<S>& dy, const LayerCache<S>& cache, const ConformerLayer<S>& layer,
                                   const ModelConfig& config, ConformerLayer<S>& grads);

/// Class log-probabilities for one utterance (frames x n_features).
/// Throws EmptyInputError on zero frames.
template <typename S>
Vector<S> model_forward(const Matrix<S>& features, const Parameters<S>& params, const ModelConfig& config, Mode mode,
                        Rng* rng = nullptr, ForwardTrace<S>* trace = nullptr);

/// Adds d(loss)/d(params) to `grads`, given d(loss)/d(log_probs).
template <typename S>
void accumulate_gradients(const ForwardTrace<S>& trace, const Parameters<S>& params, const Vector<S>& d_log_probs,
                          Parameters<S>& grads);

template <typename S>
Parameters<S> model_backward(const ForwardTrace<S>& trace, const Parameters<S>& params, const Vector<S>& d_log_probs);

// --- implementation of the visitor ----------------------------------------------

namespace detail {

template <typename L, typename F>
void visit_linear(const std::string& prefix, L& l, F& f) {
  f(prefix + ".weight", l.weight);
  f(prefix + ".bias", l.bias);
}

template <typename N, typename F>
void visit_norm(const std::string& prefix, N& n, F& f) {
  f(prefix + ".gain", n.gain);
  f(prefix + ".offset", n.offset);
}

template <typename FF, typename F>
void visit_ff(const std::string& prefix, FF& ff, F& f) {
  visit_norm(prefix + ".norm", ff.norm, f);
  visit_linear(prefix + ".expand", ff.expand, f);
  visit_linear(prefix + ".contract", ff.contract, f);
}

template <typename G, typename F>
void visit_gru(const std::string& prefix, G& g, F& f) {
  f(prefix + ".w_ih", g.w_ih);
  f(prefix + ".w_hh", g.w_hh);
  f(prefix + ".b_ih", g.b_ih);
  f(prefix + ".b_hh", g.b_hh);
}

}  // namespace detail

template <typename P, typename F>
void for_each_tensor(P& p, F&& f) {
  detail::visit_linear("prenet", p.prenet, f);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& layer = p.layers[i];
    const std::string base = "layers." + std::to_string(i);
    detail::visit_ff(base + ".ff1", layer.ff1, f);
    detail::visit_norm(base + ".attention.norm", layer.attention.norm, f);
    detail::visit_linear(base + ".attention.qkv", layer.attention.qkv, f);
    detail::visit_linear(base + ".attention.out", layer.attention.out, f);
    detail::visit_norm(base + ".conv.norm", layer.conv.norm, f);
    detail::visit_linear(base + ".conv.pointwise_in", layer.conv.pointwise_in, f);
    f(base + ".conv.depthwise.weight", layer.conv.depthwise_weight);
    f(base + ".conv.depthwise.bias", layer.conv.depthwise_bias);
    detail::visit_norm(base + ".conv.depthwise_norm", layer.conv.depthwise_norm, f);
    detail::visit_linear(base + ".conv.pointwise_out", layer.conv.pointwise_out, f);
    detail::visit_ff(base + ".ff2", layer.ff2, f);
    detail::visit_norm(base + ".final_norm", layer.final_norm, f);
  }
  detail::visit_gru("gru.forward", p.gru_forward, f);
  detail::visit_gru("gru.backward", p.gru_backward, f);
  detail::visit_linear("postnet", p.postnet, f);
  detail::visit_linear("classifier", p.classifier, f);
}

extern template Parameters<float> init_parameters<float>(const ModelConfig&, std::uint64_t);
extern template Parameters<double> init_parameters<double>(const ModelConfig&, std::uint64_t);

}  // namespace kws

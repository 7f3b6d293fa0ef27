// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/model.hpp"

#include <cmath>
#include <string>

#include "kws/errors.hpp"

namespace kws {

void ModelConfig::validate() const {
  if (d_model < 1 || n_heads < 1) throw ConfigError("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") is not divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  if (n_layers < 0) throw ConfigError("n_layers must be non-negative");
  if (ff_expansion < 1) throw ConfigError("ff_expansion must be positive");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be a positive odd integer");
  if (gru_hidden < 0) throw ConfigError("gru_hidden must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
  if (n_features < 1) throw ConfigError("n_features must be positive");
}

std::int64_t param_count(const ModelConfig& c) {
  c.validate();
  const std::int64_t d = c.d_model, f = c.ff_expansion * c.d_model, k = c.conv_kernel, h = c.gru_size();
  const std::int64_t norm = 2 * d;
  const std::int64_t feed_forward = norm + (d * f + f) + (f * d + d);
  const std::int64_t attention = norm + (3 * d * d + 3 * d) + (d * d + d);
  const std::int64_t conv = norm + (2 * d * d + 2 * d) + (d * k + d) + norm + (d * d + d);
  const std::int64_t layer = 2 * feed_forward + attention + conv + norm;
  const std::int64_t gru_direction = 3 * h * d + 3 * h * h + 6 * h;
  return (c.n_features * d + d) + c.n_layers * layer + 2 * gru_direction + (2 * h * d + d) +
         (d * c.n_classes + c.n_classes);
}

namespace {

constexpr double kNormEps = 1e-5;

// --- construction --------------------------------------------------------------

Linear<double> make_linear(Eigen::Index out, Eigen::Index in, Rng& rng) {
  Linear<double> l;
  const double s = std::sqrt(1.0 / static_cast<double>(in));
  l.weight.resize(out, in);
  for (Eigen::Index j = 0; j < in; ++j)
    for (Eigen::Index i = 0; i < out; ++i) l.weight(i, j) = rng.uniform(-s, s);
  l.bias = Vector<double>::Zero(out);
  return l;
}

LayerNorm<double> make_norm(Eigen::Index d) { return {Vector<double>::Ones(d), Vector<double>::Zero(d)}; }

FeedForward<double> make_ff(const ModelConfig& c, Rng& rng) {
  const Eigen::Index d = c.d_model, f = static_cast<Eigen::Index>(c.ff_expansion) * c.d_model;
  return {make_norm(d), make_linear(f, d, rng), make_linear(d, f, rng)};
}

GruDirection<double> make_gru(Eigen::Index hidden, Eigen::Index in, Rng& rng) {
  GruDirection<double> g;
  g.w_ih = make_linear(3 * hidden, in, rng).weight;
  g.w_hh = make_linear(3 * hidden, hidden, rng).weight;
  g.b_ih = Vector<double>::Zero(3 * hidden);
  g.b_hh = Vector<double>::Zero(3 * hidden);
  return g;
}

Parameters<double> init_double(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  Rng rng(derive_seed(seed, "init"));
  const Eigen::Index d = c.d_model, h = c.gru_size();
  Parameters<double> p;
  p.prenet = make_linear(d, c.n_features, rng);
  for (int i = 0; i < c.n_layers; ++i) {
    ConformerLayer<double> layer;
    layer.ff1 = make_ff(c, rng);
    layer.attention.norm = make_norm(d);
    layer.attention.qkv = make_linear(3 * d, d, rng);
    layer.attention.out = make_linear(d, d, rng);
    layer.conv.norm = make_norm(d);
    layer.conv.pointwise_in = make_linear(2 * d, d, rng);
    layer.conv.depthwise_weight = make_linear(d, c.conv_kernel, rng).weight;
    layer.conv.depthwise_bias = Vector<double>::Zero(d);
    layer.conv.depthwise_norm = make_norm(d);
    layer.conv.pointwise_out = make_linear(d, d, rng);
    layer.ff2 = make_ff(c, rng);
    layer.final_norm = make_norm(d);
    p.layers.push_back(std::move(layer));
  }
  p.gru_forward = make_gru(h, d, rng);
  p.gru_backward = make_gru(h, d, rng);
  p.postnet = make_linear(d, 2 * h, rng);
  p.classifier = make_linear(c.n_classes, d, rng);
  return p;
}

// --- primitive ops -------------------------------------------------------------

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <typename S>
void require_finite(const Matrix<S>& m, std::string_view block) {
  if (!m.allFinite()) throw NumericFault(std::string(block), "non-finite activation");
}

template <typename S>
void require_finite(const Vector<S>& v, std::string_view block) {
  if (!v.allFinite()) throw NumericFault(std::string(block), "non-finite activation");
}

template <typename S>
Matrix<S> linear_forward(const Matrix<S>& x, const Linear<S>& l) {
  Matrix<S> y = x * l.weight.transpose();
  y.rowwise() += l.bias.transpose();
  return y;
}

template <typename S>
Matrix<S> linear_backward(const Matrix<S>& dy, const Matrix<S>& x, const Linear<S>& l, Linear<S>& g) {
  g.weight.noalias() += dy.transpose() * x;
  g.bias += dy.colwise().sum().transpose();
  return dy * l.weight;
}

template <typename S>
Matrix<S> norm_forward(const Matrix<S>& x, const LayerNorm<S>& n, LayerNormCache<S>* cache) {
  const Eigen::Index rows = x.rows();
  const S width = static_cast<S>(x.cols());
  Matrix<S> xhat(rows, x.cols());
  Vector<S> inv(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S mean = x.row(r).sum() / width;
    const auto centred = (x.row(r).array() - mean);
    const S var = centred.square().sum() / width;
    inv[r] = S(1) / std::sqrt(var + static_cast<S>(kNormEps));
    xhat.row(r) = centred * inv[r];
  }
  Matrix<S> y = (xhat.array().rowwise() * n.gain.transpose().array()).matrix();
  y.rowwise() += n.offset.transpose();
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename S>
Matrix<S> norm_backward(const Matrix<S>& dy, const LayerNormCache<S>& c, const LayerNorm<S>& n, LayerNorm<S>& g) {
  g.gain += (dy.array() * c.normalized.array()).colwise().sum().matrix().transpose();
  g.offset += dy.colwise().sum().transpose();
  const Matrix<S> dxhat = (dy.array().rowwise() * n.gain.transpose().array()).matrix();
  const S width = static_cast<S>(dy.cols());
  Matrix<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const S mean_d = dxhat.row(r).sum() / width;
    const S mean_dx = (dxhat.row(r).array() * c.normalized.row(r).array()).sum() / width;
    dx.row(r) = c.inv_std[r] * (dxhat.row(r).array() - mean_d - c.normalized.row(r).array() * mean_dx);
  }
  return dx;
}

template <typename S>
Matrix<S> swish(const Matrix<S>& x) {
  return x.unaryExpr([](S v) { return v * sigmoid(v); });
}

template <typename S>
Matrix<S> swish_grad(const Matrix<S>& x) {
  return x.unaryExpr([](S v) {
    const S s = sigmoid(v);
    return s + v * s * (S(1) - s);
  });
}

template <typename S>
Matrix<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, const ModelConfig& c, Mode mode, Rng* rng) {
  if (mode == Mode::eval || c.dropout == 0.0) return {};
  if (rng == nullptr) throw ConfigError("train-mode dropout requires a random stream");
  const S keep_scale = static_cast<S>(1.0 / (1.0 - c.dropout));
  Matrix<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng->uniform() >= c.dropout ? keep_scale : S(0);
  return m;
}

template <typename S>
void apply_mask(Matrix<S>& x, const Matrix<S>& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

// --- conformer sub-blocks ------------------------------------------------------

template <typename S>
Matrix<S> ff_forward(const Matrix<S>& x, const FeedForward<S>& ff, const ModelConfig& c, Mode mode, Rng* rng,
                     FeedForwardCache<S>& cache) {
  cache.normed = norm_forward(x, ff.norm, &cache.norm);
  cache.hidden_pre = linear_forward(cache.normed, ff.expand);
  cache.hidden = swish(cache.hidden_pre);
  cache.mask_hidden = dropout_mask<S>(cache.hidden.rows(), cache.hidden.cols(), c, mode, rng);
  apply_mask(cache.hidden, cache.mask_hidden);
  Matrix<S> out = linear_forward(cache.hidden, ff.contract);
  cache.mask_out = dropout_mask<S>(out.rows(), out.cols(), c, mode, rng);
  apply_mask(out, cache.mask_out);
  return x + S(0.5) * out;
}

template <typename S>
Matrix<S> ff_backward(const Matrix<S>& dy, const FeedForwardCache<S>& cache, const FeedForward<S>& ff,
                      FeedForward<S>& g) {
  Matrix<S> d_out = S(0.5) * dy;
  apply_mask(d_out, cache.mask_out);
  Matrix<S> d_hidden = linear_backward(d_out, cache.hidden, ff.contract, g.contract);
  apply_mask(d_hidden, cache.mask_hidden);
  const Matrix<S> d_pre = (d_hidden.array() * swish_grad(cache.hidden_pre).array()).matrix();
  const Matrix<S> d_normed = linear_backward(d_pre, cache.normed, ff.expand, g.expand);
  return dy + norm_backward(d_normed, cache.norm, ff.norm, g.norm);
}

template <typename S>
Matrix<S> attention_forward(const Matrix<S>& x, const SelfAttention<S>& a, const ModelConfig& c, Mode mode, Rng* rng,
                            AttentionCache<S>& cache) {
  const Eigen::Index d = c.d_model, dk = c.head_dim(), frames = x.rows();
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  cache.normed = norm_forward(x, a.norm, &cache.norm);
  cache.qkv = linear_forward(cache.normed, a.qkv);
  cache.context.resize(frames, d);
  cache.weights.assign(static_cast<std::size_t>(c.n_heads), Matrix<S>());
  for (int head = 0; head < c.n_heads; ++head) {
    const auto q = cache.qkv.middleCols(head * dk, dk);
    const auto k = cache.qkv.middleCols(d + head * dk, dk);
    const auto v = cache.qkv.middleCols(2 * d + head * dk, dk);
    Matrix<S> w = (q * k.transpose()) * scale;
    for (Eigen::Index r = 0; r < frames; ++r) {
      const S peak = w.row(r).maxCoeff();
      w.row(r) = (w.row(r).array() - peak).exp();
      w.row(r) /= w.row(r).sum();
    }
    cache.context.middleCols(head * dk, dk).noalias() = w * v;
    cache.weights[static_cast<std::size_t>(head)] = std::move(w);
  }
  Matrix<S> out = linear_forward(cache.context, a.out);
  cache.mask_out = dropout_mask<S>(out.rows(), out.cols(), c, mode, rng);
  apply_mask(out, cache.mask_out);
  return x + out;
}

template <typename S>
Matrix<S> attention_backward(const Matrix<S>& dy, const AttentionCache<S>& cache, const SelfAttention<S>& a,
                             const ModelConfig& c, SelfAttention<S>& g) {
  const Eigen::Index d = c.d_model, dk = c.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));
  Matrix<S> d_out = dy;
  apply_mask(d_out, cache.mask_out);
  const Matrix<S> d_context = linear_backward(d_out, cache.context, a.out, g.out);
  Matrix<S> d_qkv(cache.qkv.rows(), cache.qkv.cols());
  for (int head = 0; head < c.n_heads; ++head) {
    const Matrix<S>& w = cache.weights[static_cast<std::size_t>(head)];
    const auto q = cache.qkv.middleCols(head * dk, dk);
    const auto k = cache.qkv.middleCols(d + head * dk, dk);
    const auto v = cache.qkv.middleCols(2 * d + head * dk, dk);
    const auto dc = d_context.middleCols(head * dk, dk);
    const Matrix<S> dw = dc * v.transpose();
    d_qkv.middleCols(2 * d + head * dk, dk).noalias() = w.transpose() * dc;
    const Vector<S> row_dot = (dw.array() * w.array()).rowwise().sum();
    const Matrix<S> ds = ((dw.colwise() - row_dot).array() * w.array()).matrix() * scale;
    d_qkv.middleCols(head * dk, dk).noalias() = ds * k;
    d_qkv.middleCols(d + head * dk, dk).noalias() = ds.transpose() * q;
  }
  const Matrix<S> d_normed = linear_backward(d_qkv, cache.normed, a.qkv, g.qkv);
  return dy + norm_backward(d_normed, cache.norm, a.norm, g.norm);
}

// Depthwise convolution over frames with zero "same" padding.
template <typename S>
Matrix<S> depthwise_forward(const Matrix<S>& x, const Matrix<S>& w, const Vector<S>& b) {
  const Eigen::Index frames = x.rows(), kernel = w.cols(), pad = kernel / 2;
  Matrix<S> y(frames, x.cols());
  y.rowwise() = b.transpose();
  for (Eigen::Index j = 0; j < kernel; ++j) {
    const Eigen::Index shift = j - pad;
    const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index t1 = std::min(frames, frames - shift);
    if (t1 <= t0) continue;
    y.middleRows(t0, t1 - t0).array() +=
        x.middleRows(t0 + shift, t1 - t0).array().rowwise() * w.col(j).transpose().array();
  }
  return y;
}

template <typename S>
Matrix<S> depthwise_backward(const Matrix<S>& dy, const Matrix<S>& x, const Matrix<S>& w, Matrix<S>& gw,
                             Vector<S>& gb) {
  const Eigen::Index frames = x.rows(), kernel = w.cols(), pad = kernel / 2;
  Matrix<S> dx = Matrix<S>::Zero(frames, x.cols());
  gb += dy.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < kernel; ++j) {
    const Eigen::Index shift = j - pad;
    const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index t1 = std::min(frames, frames - shift);
    if (t1 <= t0) continue;
    const auto dy_rows = dy.middleRows(t0, t1 - t0);
    const auto x_rows = x.middleRows(t0 + shift, t1 - t0);
    gw.col(j) += (dy_rows.array() * x_rows.array()).colwise().sum().matrix().transpose();
    dx.middleRows(t0 + shift, t1 - t0).array() += dy_rows.array().rowwise() * w.col(j).transpose().array();
  }
  return dx;
}

template <typename S>
Matrix<S> conv_forward(const Matrix<S>& x, const ConvModule<S>& m, const ModelConfig& c, Mode mode, Rng* rng,
                       ConvCache<S>& cache) {
  const Eigen::Index d = c.d_model;
  cache.normed = norm_forward(x, m.norm, &cache.norm);
  cache.pointwise = linear_forward(cache.normed, m.pointwise_in);
  cache.gated = (cache.pointwise.leftCols(d).array() *
                 cache.pointwise.rightCols(d).unaryExpr([](S v) { return sigmoid(v); }).array())
                    .matrix();
  const Matrix<S> conv = depthwise_forward(cache.gated, m.depthwise_weight, m.depthwise_bias);
  cache.depthwise_normed = norm_forward(conv, m.depthwise_norm, &cache.depthwise_norm);
  cache.activated = swish(cache.depthwise_normed);
  Matrix<S> out = linear_forward(cache.activated, m.pointwise_out);
  cache.mask_out = dropout_mask<S>(out.rows(), out.cols(), c, mode, rng);
  apply_mask(out, cache.mask_out);
  return x + out;
}

template <typename S>
Matrix<S> conv_backward(const Matrix<S>& dy, const ConvCache<S>& cache, const ConvModule<S>& m, const ModelConfig& c,
                        ConvModule<S>& g) {
  const Eigen::Index d = c.d_model;
  Matrix<S> d_out = dy;
  apply_mask(d_out, cache.mask_out);
  const Matrix<S> d_act = linear_backward(d_out, cache.activated, m.pointwise_out, g.pointwise_out);
  const Matrix<S> d_dn = (d_act.array() * swish_grad(cache.depthwise_normed).array()).matrix();
  const Matrix<S> d_conv = norm_backward(d_dn, cache.depthwise_norm, m.depthwise_norm, g.depthwise_norm);
  const Matrix<S> d_gated =
      depthwise_backward(d_conv, cache.gated, m.depthwise_weight, g.depthwise_weight, g.depthwise_bias);
  const auto a = cache.pointwise.leftCols(d).array();
  const Matrix<S> gate = cache.pointwise.rightCols(d).unaryExpr([](S v) { return sigmoid(v); });
  Matrix<S> d_point(cache.pointwise.rows(), 2 * d);
  d_point.leftCols(d) = (d_gated.array() * gate.array()).matrix();
  d_point.rightCols(d) = (d_gated.array() * a * gate.array() * (S(1) - gate.array())).matrix();
  const Matrix<S> d_normed = linear_backward(d_point, cache.normed, m.pointwise_in, g.pointwise_in);
  return dy + norm_backward(d_normed, cache.norm, m.norm, g.norm);
}

// --- GRU -----------------------------------------------------------------------

template <typename S>
Vector<S> gru_forward(const Matrix<S>& x, const GruDirection<S>& g, bool reverse, GruCache<S>& cache) {
  const Eigen::Index frames = x.rows(), h = g.w_hh.cols();
  Matrix<S> gates_x = x * g.w_ih.transpose();
  gates_x.rowwise() += g.b_ih.transpose();
  cache.input = x;
  cache.reverse = reverse;
  cache.reset.resize(frames, h);
  cache.update.resize(frames, h);
  cache.candidate.resize(frames, h);
  cache.hidden_part.resize(frames, h);
  cache.prev_hidden.resize(frames, h);
  Vector<S> state = Vector<S>::Zero(h);
  for (Eigen::Index s = 0; s < frames; ++s) {
    const Eigen::Index t = reverse ? frames - 1 - s : s;
    const Vector<S> gh = g.w_hh * state + g.b_hh;
    const Vector<S> gx = gates_x.row(t).transpose();
    const Vector<S> r = (gx.head(h) + gh.head(h)).unaryExpr([](S v) { return sigmoid(v); });
    const Vector<S> z = (gx.segment(h, h) + gh.segment(h, h)).unaryExpr([](S v) { return sigmoid(v); });
    const Vector<S> hn = gh.tail(h);
    const Vector<S> n = (gx.tail(h).array() + r.array() * hn.array()).tanh().matrix();
    cache.prev_hidden.row(t) = state.transpose();
    cache.reset.row(t) = r.transpose();
    cache.update.row(t) = z.transpose();
    cache.candidate.row(t) = n.transpose();
    cache.hidden_part.row(t) = hn.transpose();
    state = ((S(1) - z.array()) * n.array() + z.array() * state.array()).matrix();
  }
  return state;
}

template <typename S>
Matrix<S> gru_backward(const Vector<S>& d_final, const GruCache<S>& cache, const GruDirection<S>& g,
                       GruDirection<S>& grads) {
  const Eigen::Index frames = cache.input.rows(), h = g.w_hh.cols();
  Matrix<S> d_gates_x(frames, 3 * h);
  Vector<S> dh = d_final;
  Vector<S> d_gates_h(3 * h);
  for (Eigen::Index s = frames - 1; s >= 0; --s) {
    const Eigen::Index t = cache.reverse ? frames - 1 - s : s;
    const auto r = cache.reset.row(t).transpose().array();
    const auto z = cache.update.row(t).transpose().array();
    const auto n = cache.candidate.row(t).transpose().array();
    const auto hn = cache.hidden_part.row(t).transpose().array();
    const Vector<S> prev = cache.prev_hidden.row(t).transpose();
    const Vector<S> dn_pre = (dh.array() * (S(1) - z) * (S(1) - n * n)).matrix();
    const Vector<S> dz_pre = (dh.array() * (prev.array() - n) * z * (S(1) - z)).matrix();
    const Vector<S> dr_pre = (dn_pre.array() * hn * r * (S(1) - r)).matrix();
    d_gates_x.row(t) << dr_pre.transpose(), dz_pre.transpose(), dn_pre.transpose();
    d_gates_h << dr_pre, dz_pre, (dn_pre.array() * r).matrix();
    grads.w_hh.noalias() += d_gates_h * prev.transpose();
    grads.b_hh += d_gates_h;
    dh = (dh.array() * z).matrix();
    dh.noalias() += g.w_hh.transpose() * d_gates_h;
  }
  grads.w_ih.noalias() += d_gates_x.transpose() * cache.input;
  grads.b_ih += d_gates_x.colwise().sum().transpose();
  return d_gates_x * g.w_ih;
}

template <typename S>
Matrix<S> positional_encoding(Eigen::Index frames, Eigen::Index d) {
  Matrix<S> pe(frames, d);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(t) * rate;
      pe(t, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename S>
void check_trace(const ForwardTrace<S>& trace, const Parameters<S>& params) {
  if (trace.mode != Mode::train) throw ConsistencyError("gradients need a train-mode trace");
  if (trace.layers.size() != params.layers.size()) throw ConsistencyError("trace and parameters differ in depth");
  if (trace.log_probs.size() == 0) throw ConsistencyError("trace holds no forward pass");
  check_shapes(params, trace.config);
}

}  // namespace

// --- public API ------------------------------------------------------------------

template <typename S>
Parameters<S> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  if constexpr (std::is_same_v<S, double>) {
    return init_double(config, seed);
  } else {
    return cast_parameters<S>(init_double(config, seed));
  }
}

template <typename S>
std::vector<TensorView<S>> tensor_views(Parameters<S>& p) {
  std::vector<TensorView<S>> out;
  for_each_tensor(p, [&](const std::string& name, auto& t) { out.push_back({name, t.data(), t.rows(), t.cols()}); });
  return out;
}

template <typename S>
std::vector<TensorView<const S>> tensor_views(const Parameters<S>& p) {
  std::vector<TensorView<const S>> out;
  for_each_tensor(p, [&](const std::string& name, const auto& t) {
    out.push_back({name, t.data(), t.rows(), t.cols()});
  });
  return out;
}

template <typename S>
Parameters<S> zeros_like(const Parameters<S>& p) {
  Parameters<S> z = p;
  for_each_tensor(z, [](const std::string&, auto& t) { t.setZero(); });
  return z;
}

template <typename To, typename From>
Parameters<To> cast_parameters(const Parameters<From>& p) {
  Parameters<To> out;
  out.layers.resize(p.layers.size());
  const auto src = tensor_views(p);
  std::size_t i = 0;
  auto resize_like = [&](const std::string&, auto& t) {
    t.resize(src[i].rows, src[i].cols);
    ++i;
  };
  for_each_tensor(out, resize_like);
  auto dst = tensor_views(out);
  for (std::size_t k = 0; k < src.size(); ++k) dst[k].map() = src[k].map().template cast<To>();
  return out;
}

template <typename S>
std::int64_t tensor_scalar_count(const Parameters<S>& p) {
  std::int64_t n = 0;
  for_each_tensor(p, [&](const std::string&, const auto& t) { n += t.size(); });
  return n;
}

template <typename S>
void check_shapes(const Parameters<S>& p, const ModelConfig& c) {
  c.validate();
  const Eigen::Index d = c.d_model, h = c.gru_size(), f = static_cast<Eigen::Index>(c.ff_expansion) * d;
  const auto expect = [](const auto& t, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (t.rows() != rows || t.cols() != cols) {
      throw ConsistencyError(std::string("tensor ") + what + " has shape " + std::to_string(t.rows()) + "x" +
                             std::to_string(t.cols()) + ", expected " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
  };
  expect(p.prenet.weight, d, c.n_features, "prenet.weight");
  if (p.layers.size() != static_cast<std::size_t>(c.n_layers)) throw ConsistencyError("layer count mismatch");
  for (const auto& layer : p.layers) {
    expect(layer.ff1.expand.weight, f, d, "ff1.expand.weight");
    expect(layer.ff2.expand.weight, f, d, "ff2.expand.weight");
    expect(layer.attention.qkv.weight, 3 * d, d, "attention.qkv.weight");
    expect(layer.conv.depthwise_weight, d, c.conv_kernel, "conv.depthwise.weight");
  }
  expect(p.gru_forward.w_ih, 3 * h, d, "gru.forward.w_ih");
  expect(p.gru_backward.w_hh, 3 * h, h, "gru.backward.w_hh");
  expect(p.postnet.weight, d, 2 * h, "postnet.weight");
  expect(p.classifier.weight, c.n_classes, d, "classifier.weight");
}

template <typename S>
Matrix<S> conformer_layer_forward(const Matrix<S>& x, const ConformerLayer<S>& layer, const ModelConfig& config,
                                  Mode mode, Rng* rng, LayerCache<S>* cache, std::string_view name) {
  LayerCache<S> local;
  LayerCache<S>& c = cache ? *cache : local;
  const std::string base(name);
  Matrix<S> h = ff_forward(x, layer.ff1, config, mode, rng, c.ff1);
  require_finite(h, base + ".ff1");
  h = attention_forward(h, layer.attention, config, mode, rng, c.attention);
  require_finite(h, base + ".attention");
  h = conv_forward(h, layer.conv, config, mode, rng, c.conv);
  require_finite(h, base + ".conv");
  h = ff_forward(h, layer.ff2, config, mode, rng, c.ff2);
  require_finite(h, base + ".ff2");
  h = norm_forward(h, layer.final_norm, &c.final_norm);
  require_finite(h, base + ".final_norm");
  return h;
}

template <typename S>
Matrix<S> conformer_layer_backward(const Matrix<S>& dy, const LayerCache<S>& cache, const ConformerLayer<S>& layer,
                                   const ModelConfig& config, ConformerLayer<S>& grads) {
  Matrix<S> d = norm_backward(dy, cache.final_norm, layer.final_norm, grads.final_norm);
  d = ff_backward(d, cache.ff2, layer.ff2, grads.ff2);
  d = conv_backward(d, cache.conv, layer.conv, config, grads.conv);
  d = attention_backward(d, cache.attention, layer.attention, config, grads.attention);
  return ff_backward(d, cache.ff1, layer.ff1, grads.ff1);
}

template <typename S>
Vector<S> model_forward(const Matrix<S>& features, const Parameters<S>& params, const ModelConfig& config, Mode mode,
                        Rng* rng, ForwardTrace<S>* trace) {
  if (features.rows() == 0) throw EmptyInputError("utterance has zero frames");
  if (features.cols() != config.n_features) {
    throw ConsistencyError("expected " + std::to_string(config.n_features) + " features per frame, got " +
                           std::to_string(features.cols()));
  }
  if (!features.allFinite()) throw NumericFault("input", "non-finite feature value");
  ForwardTrace<S> local;
  ForwardTrace<S>& tr = trace ? *trace : local;
  tr.mode = mode;
  tr.config = config;
  tr.input = features;

  Matrix<S> h = linear_forward(features, params.prenet);
  if (config.positional_encoding) h += positional_encoding<S>(h.rows(), h.cols());
  tr.mask_prenet = dropout_mask<S>(h.rows(), h.cols(), config, mode, rng);
  apply_mask(h, tr.mask_prenet);
  require_finite(h, "prenet");

  tr.layers.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    h = conformer_layer_forward(h, params.layers[i], config, mode, rng, &tr.layers[i], "layers." + std::to_string(i));
  }

  const Vector<S> fwd = gru_forward(h, params.gru_forward, false, tr.gru_forward);
  const Vector<S> bwd = gru_forward(h, params.gru_backward, true, tr.gru_backward);
  tr.aggregate.resize(fwd.size() + bwd.size());
  tr.aggregate << fwd, bwd;
  require_finite(tr.aggregate, "gru");

  tr.post_pre = params.postnet.weight * tr.aggregate + params.postnet.bias;
  tr.post = tr.post_pre.cwiseMax(S(0));
  require_finite(tr.post, "postnet");

  const Vector<S> logits = params.classifier.weight * tr.post + params.classifier.bias;
  const S peak = logits.maxCoeff();
  const S lse = peak + std::log((logits.array() - peak).exp().sum());
  tr.log_probs = logits.array() - lse;
  require_finite(tr.log_probs, "classifier");
  return tr.log_probs;
}

template <typename S>
void accumulate_gradients(const ForwardTrace<S>& trace, const Parameters<S>& params, const Vector<S>& d_log_probs,
                          Parameters<S>& grads) {
  check_trace(trace, params);
  if (d_log_probs.size() != trace.log_probs.size()) throw ConsistencyError("upstream gradient has the wrong size");
  const Vector<S> probs = trace.log_probs.array().exp();
  const Vector<S> d_logits = d_log_probs - probs * d_log_probs.sum();

  grads.classifier.weight.noalias() += d_logits * trace.post.transpose();
  grads.classifier.bias += d_logits;
  const Vector<S> d_post = params.classifier.weight.transpose() * d_logits;
  const Vector<S> d_post_pre = (d_post.array() * (trace.post_pre.array() > S(0)).template cast<S>()).matrix();
  grads.postnet.weight.noalias() += d_post_pre * trace.aggregate.transpose();
  grads.postnet.bias += d_post_pre;
  const Vector<S> d_aggregate = params.postnet.weight.transpose() * d_post_pre;

  const Eigen::Index h = params.gru_forward.w_hh.cols();
  Matrix<S> d = gru_backward<S>(d_aggregate.head(h), trace.gru_forward, params.gru_forward, grads.gru_forward);
  d += gru_backward<S>(d_aggregate.tail(h), trace.gru_backward, params.gru_backward, grads.gru_backward);

  for (std::size_t i = params.layers.size(); i-- > 0;) {
    d = conformer_layer_backward(d, trace.layers[i], params.layers[i], trace.config, grads.layers[i]);
  }
  apply_mask(d, trace.mask_prenet);
  linear_backward(d, trace.input, params.prenet, grads.prenet);
}

template <typename S>
Parameters<S> model_backward(const ForwardTrace<S>& trace, const Parameters<S>& params, const Vector<S>& d_log_probs) {
  Parameters<S> grads = zeros_like(params);
  accumulate_gradients(trace, params, d_log_probs, grads);
  return grads;
}

#define KWS_INSTANTIATE_MODEL(S)                                                                                     \
  template Parameters<S> init_parameters<S>(const ModelConfig&, std::uint64_t);                                      \
  template std::vector<TensorView<S>> tensor_views<S>(Parameters<S>&);                                               \
  template std::vector<TensorView<const S>> tensor_views<S>(const Parameters<S>&);                                   \
  template Parameters<S> zeros_like<S>(const Parameters<S>&);                                                        \
  template std::int64_t tensor_scalar_count<S>(const Parameters<S>&);                                                \
  template void check_shapes<S>(const Parameters<S>&, const ModelConfig&);                                           \
  template Matrix<S> conformer_layer_forward<S>(const Matrix<S>&, const ConformerLayer<S>&, const ModelConfig&, Mode, \
                                                Rng*, LayerCache<S>*, std::string_view);                             \
  template Matrix<S> conformer_layer_backward<S>(const Matrix<S>&, const LayerCache<S>&, const ConformerLayer<S>&,    \
                                                 const ModelConfig&, ConformerLayer<S>&);                            \
  template Vector<S> model_forward<S>(const Matrix<S>&, const Parameters<S>&, const ModelConfig&, Mode, Rng*,         \
                                      ForwardTrace<S>*);                                                             \
  template void accumulate_gradients<S>(const ForwardTrace<S>&, const Parameters<S>&, const Vector<S>&,               \
                                        Parameters<S>&);                                                             \
  template Parameters<S> model_backward<S>(const ForwardTrace<S>&, const Parameters<S>&, const Vector<S>&);

KWS_INSTANTIATE_MODEL(float)
KWS_INSTANTIATE_MODEL(double)
#undef KWS_INSTANTIATE_MODEL

template Parameters<float> cast_parameters<float, double>(const Parameters<double>&);
template Parameters<double> cast_parameters<double, float>(const Parameters<float>&);
template Parameters<float> cast_parameters<float, float>(const Parameters<float>&);
template Parameters<double> cast_parameters<double, double>(const Parameters<double>&);

}  // namespace kws

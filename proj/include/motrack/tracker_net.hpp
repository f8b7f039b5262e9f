// SPDX-License-Identifier: Apache-2.0
//
// Encoder-decoder visual feature extractor, motion-aware fusion, sigmoid
// heatmap head and the focal-weighted binary cross-entropy loss.
//
// Data flow for one temporal block of T' frames:
//
//   rgb x T' --(U-Net)--> V (T' pre-sigmoid maps)
//   gray x T' --(diff, |.|, PN)--> A (T'-1 attention maps)
//   fuse(A, V) --(sigmoid)--> H (T' heatmaps)
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "motrack/frames.hpp"
#include "motrack/layers.hpp"
#include "motrack/model_weights.hpp"
#include "motrack/motion_prompt.hpp"

namespace motrack {

template <typename T>
using FeatureStack = MapStack<T>;
template <typename T>
using HeatmapStack = MapStack<T>;

// ---------------------------------------------------------------------------
// Backbone

template <typename T>
struct ConvUnitCache {
  Tensor<T> input;
  nn::BatchNormCache<T> bn;
  Tensor<T> output;
};

template <typename T>
struct ForwardCache {
  std::vector<ConvUnitCache<T>> units;  // execution order
  std::vector<std::vector<std::int32_t>> pool_argmax;
  std::vector<int> skip_unit;  // index of the unit whose output feeds skip l
  Tensor<T> head_input;
};

namespace detail {

template <typename T>
struct UnitRefs {
  int weight, gamma, beta, mean, var;
};

template <typename T>
UnitRefs<T> unit_refs(const ModelWeights<T>& w, const std::string& name) {
  return {w.index_of(name + ".weight"), w.index_of(name + ".bn.gamma"),
          w.index_of(name + ".bn.beta"), w.index_of(name + ".bn.running_mean"),
          w.index_of(name + ".bn.running_var")};
}

// Runs conv -> BN -> ReLU. `stats` is non-null in training mode; running
// statistics are then updated in place.
template <typename T>
Tensor<T> unit_forward(const ModelWeights<T>& w, ModelWeights<T>* stats, const std::string& name,
                       const Tensor<T>& x, ConvUnitCache<T>* cache, AlignedVector<T>& scratch) {
  const auto r = unit_refs(w, name);
  const auto& wb = w.blocks[r.weight];
  Tensor<T> y;
  nn::conv_forward(x, wb.value.data(), static_cast<const T*>(nullptr), wb.dims[0], 3, y, scratch);
  nn::BatchNormCache<T> local;
  auto& bn = cache ? cache->bn : local;
  if (stats) {
    nn::batchnorm_forward(y, w.blocks[r.gamma].value.data(), w.blocks[r.beta].value.data(),
                          stats->blocks[r.mean].value.data(), stats->blocks[r.var].value.data(),
                          true, bn);
  } else {
    // Frozen statistics: pass copies so the weights stay untouched.
    AlignedVector<T> mean = w.blocks[r.mean].value, var = w.blocks[r.var].value;
    nn::batchnorm_forward(y, w.blocks[r.gamma].value.data(), w.blocks[r.beta].value.data(),
                          mean.data(), var.data(), false, bn);
  }
  nn::relu_forward(y);
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

template <typename T>
Tensor<T> unit_backward(ModelWeights<T>& w, const std::string& name, const ConvUnitCache<T>& cache,
                        Tensor<T> g, bool need_input_grad, AlignedVector<T>& scratch) {
  const auto r = unit_refs(w, name);
  nn::relu_backward(cache.output, g);
  nn::batchnorm_backward(g, w.blocks[r.gamma].value.data(), cache.bn,
                         w.blocks[r.gamma].grad.data(), w.blocks[r.beta].grad.data());
  Tensor<T> din;
  nn::conv_backward(cache.input, w.blocks[r.weight].value.data(), g, 3,
                    w.blocks[r.weight].grad.data(), static_cast<T*>(nullptr),
                    need_input_grad ? &din : nullptr, scratch);
  return din;
}

template <typename T>
Tensor<T> backbone_forward_impl(const ModelWeights<T>& w, ModelWeights<T>* stats,
                                const Tensor<T>& x, ForwardCache<T>* cache) {
  const NetworkConfig& cfg = w.config;
  const auto names = conv_unit_names(cfg);
  AlignedVector<T> scratch;
  if (cache) {
    cache->units.assign(names.size(), {});
    cache->pool_argmax.assign(cfg.levels, {});
    cache->skip_unit.assign(cfg.levels, -1);
  }
  std::size_t u = 0;
  auto run = [&](const Tensor<T>& in) {
    Tensor<T> out = unit_forward(w, stats, names[u], in, cache ? &cache->units[u] : nullptr, scratch);
    ++u;
    return out;
  };
  std::vector<Tensor<T>> skips(cfg.levels);
  Tensor<T> h = x;
  for (int l = 0; l < cfg.levels; ++l) {
    h = run(h);
    h = run(h);
    if (cache) cache->skip_unit[l] = static_cast<int>(u) - 1;
    Tensor<T> pooled;
    std::vector<std::int32_t> argmax;
    nn::maxpool2_forward(h, pooled, argmax);
    if (cache) cache->pool_argmax[l] = std::move(argmax);
    if (cfg.skip_connections) skips[l] = std::move(h);
    h = std::move(pooled);
  }
  h = run(h);
  h = run(h);
  for (int l = cfg.levels - 1; l >= 0; --l) {
    Tensor<T> up;
    nn::upsample2_forward(h, up);
    h = cfg.skip_connections ? nn::concat_channels(up, skips[l]) : std::move(up);
    h = run(h);
    h = run(h);
  }
  const auto& hw = w.block("head.weight");
  Tensor<T> out;
  nn::conv_forward(h, hw.value.data(), w.block("head.bias").value.data(), hw.dims[0], 1, out,
                   scratch);
  if (cache) cache->head_input = std::move(h);
  return out;
}

}  // namespace detail

/// Inference pass with frozen normalization statistics.
template <typename T>
Tensor<T> backbone_forward(const ModelWeights<T>& w, const Tensor<T>& x) {
  return detail::backbone_forward_impl<T>(w, nullptr, x, nullptr);
}

/// Training pass: batch statistics, running statistics updated, cache filled.
template <typename T>
Tensor<T> backbone_forward_train(ModelWeights<T>& w, const Tensor<T>& x, ForwardCache<T>& cache) {
  return detail::backbone_forward_impl<T>(w, &w, x, &cache);
}

/// Accumulates parameter gradients into w.blocks[*].grad.
template <typename T>
void backbone_backward(ModelWeights<T>& w, const ForwardCache<T>& cache, const Tensor<T>& dout) {
  const NetworkConfig& cfg = w.config;
  const auto names = conv_unit_names(cfg);
  AlignedVector<T> scratch;
  auto& hw = w.block("head.weight");
  auto& hb = w.block("head.bias");
  Tensor<T> g;
  nn::conv_backward(cache.head_input, hw.value.data(), dout, 1, hw.grad.data(), hb.grad.data(), &g,
                    scratch);
  int u = static_cast<int>(names.size()) - 1;
  auto back = [&](Tensor<T> grad, bool need_input) {
    Tensor<T> d = detail::unit_backward(w, names[u], cache.units[u], std::move(grad), need_input, scratch);
    --u;
    return d;
  };
  std::vector<Tensor<T>> skip_grads(cfg.levels);
  for (int l = 0; l < cfg.levels; ++l) {
    g = back(std::move(g), true);
    g = back(std::move(g), true);
    Tensor<T> gup;
    if (cfg.skip_connections) {
      const int up_c = g.c - cfg.channels_at(l);
      nn::split_channels(g, up_c, gup, skip_grads[l]);
    } else {
      gup = std::move(g);
    }
    nn::upsample2_backward(gup, g);
  }
  g = back(std::move(g), true);
  g = back(std::move(g), true);
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const Tensor<T>& skip_out = cache.units[cache.skip_unit[l]].output;
    Tensor<T> gpre(skip_out.n, skip_out.c, skip_out.h, skip_out.w);
    nn::maxpool2_backward(g, cache.pool_argmax[l], gpre);
    if (cfg.skip_connections)
      for (std::size_t k = 0; k < gpre.size(); ++k) gpre.data[k] += skip_grads[l].data[k];
    g = back(std::move(gpre), true);
    g = back(std::move(g), l > 0);
  }
}

/// Stacks the RGB frames of each block into one NCHW tensor with 3*T' channels.
template <typename T>
Tensor<T> pack_input(std::span<const TemporalBlock* const> blocks, const NetworkConfig& cfg) {
  Tensor<T> x(static_cast<int>(blocks.size()), cfg.input_channels(), cfg.input_height, cfg.input_width);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const TemporalBlock& b = *blocks[i];
    require(b.length() == cfg.t_prime, "block has " + std::to_string(b.length()) +
                                           " frames, network expects " + std::to_string(cfg.t_prime));
    require(b.width() == cfg.input_width && b.height() == cfg.input_height,
            "block resolution " + std::to_string(b.width()) + "x" + std::to_string(b.height()) +
                " does not match network input " + std::to_string(cfg.input_width) + "x" +
                std::to_string(cfg.input_height));
    for (int k = 0; k < cfg.t_prime; ++k) {
      const Frame& f = b.rgb[k];
      for (int ch = 0; ch < 3; ++ch) {
        T* p = x.plane(static_cast<int>(i), 3 * k + ch);
        for (std::size_t q = 0; q < f.pixel_count(); ++q) p[q] = static_cast<T>(f.data[q * 3 + ch]);
      }
    }
  }
  return x;
}

template <typename T>
MapStack<T> tensor_sample_to_stack(const Tensor<T>& t, int i) {
  MapStack<T> out;
  for (int ch = 0; ch < t.c; ++ch) {
    Map2D<T> m(t.w, t.h);
    std::copy(t.plane(i, ch), t.plane(i, ch) + t.plane_size(), m.data.begin());
    out.push_back(std::move(m));
  }
  return out;
}

template <typename T>
void stack_to_tensor_sample(const MapStack<T>& s, Tensor<T>& t, int i) {
  for (int ch = 0; ch < t.c; ++ch) std::copy(s[ch].data.begin(), s[ch].data.end(), t.plane(i, ch));
}

/// Pre-sigmoid visual features V for one block (inference mode).
template <typename T>
FeatureStack<T> extract_features(const TemporalBlock& block, const ModelWeights<T>& w) {
  const TemporalBlock* ptr = &block;
  Tensor<T> x = pack_input<T>(std::span<const TemporalBlock* const>(&ptr, 1), w.config);
  return tensor_sample_to_stack(backbone_forward(w, x), 0);
}

// ---------------------------------------------------------------------------
// Fusion

namespace detail {
template <typename T>
void check_fusion_shapes(const AttentionStack<T>& attn, const FeatureStack<T>& feats) {
  require(!feats.empty() && attn.size() + 1 == feats.size(),
          "fusion expects T'-1 attention maps for T' feature maps, got " +
              std::to_string(attn.size()) + " and " + std::to_string(feats.size()));
  for (const auto& a : attn) require(a.same_shape(feats.front()), "fusion: attention/feature size mismatch");
  for (const auto& f : feats) require(f.same_shape(feats.front()), "fusion: feature size mismatch");
}
}  // namespace detail

/// [V_0, A_0 * V_1, ..., A_{T'-2} * V_{T'-1}]
template <typename T>
FeatureStack<T> fuse_v1(const AttentionStack<T>& attn, const FeatureStack<T>& feats) {
  detail::check_fusion_shapes(attn, feats);
  FeatureStack<T> out = feats;
  for (std::size_t t = 1; t < feats.size(); ++t)
    for (std::size_t k = 0; k < out[t].size(); ++k) out[t].data[k] = attn[t - 1].data[k] * feats[t].data[k];
  return out;
}

template <typename T>
Map2D<T> mean_attention(const AttentionStack<T>& attn) {
  Map2D<T> mean(attn.front().width, attn.front().height);
  for (const auto& a : attn)
    for (std::size_t k = 0; k < mean.size(); ++k) mean.data[k] += a.data[k];
  const T inv = T(1) / static_cast<T>(attn.size());
  for (auto& v : mean.data) v *= inv;
  return mean;
}

/// mean(A) * V_t for every t.
template <typename T>
FeatureStack<T> fuse_v2(const AttentionStack<T>& attn, const FeatureStack<T>& feats) {
  detail::check_fusion_shapes(attn, feats);
  const Map2D<T> mean = mean_attention(attn);
  FeatureStack<T> out = feats;
  for (auto& m : out)
    for (std::size_t k = 0; k < m.size(); ++k) m.data[k] *= mean.data[k];
  return out;
}

template <typename T>
FeatureStack<T> fuse(FusionMode mode, const AttentionStack<T>& attn, const FeatureStack<T>& feats) {
  switch (mode) {
    case FusionMode::v1: return fuse_v1(attn, feats);
    case FusionMode::v2: return fuse_v2(attn, feats);
    case FusionMode::off: break;
  }
  return feats;
}

template <typename T>
struct FusionGrad {
  FeatureStack<T> d_feats;
  AttentionStack<T> d_attn;
};

template <typename T>
FusionGrad<T> fuse_backward(FusionMode mode, const AttentionStack<T>& attn,
                            const FeatureStack<T>& feats, const FeatureStack<T>& dout) {
  FusionGrad<T> g;
  g.d_feats = dout;
  if (mode == FusionMode::off) return g;
  g.d_attn.assign(attn.size(), Map2D<T>(feats.front().width, feats.front().height));
  if (mode == FusionMode::v1) {
    for (std::size_t t = 1; t < feats.size(); ++t)
      for (std::size_t k = 0; k < feats[t].size(); ++k) {
        g.d_feats[t].data[k] = attn[t - 1].data[k] * dout[t].data[k];
        g.d_attn[t - 1].data[k] = feats[t].data[k] * dout[t].data[k];
      }
    return g;
  }
  const Map2D<T> mean = mean_attention(attn);
  Map2D<T> dmean(mean.width, mean.height);
  for (std::size_t t = 0; t < feats.size(); ++t)
    for (std::size_t k = 0; k < mean.size(); ++k) {
      g.d_feats[t].data[k] = mean.data[k] * dout[t].data[k];
      dmean.data[k] += feats[t].data[k] * dout[t].data[k];
    }
  const T inv = T(1) / static_cast<T>(attn.size());
  for (auto& da : g.d_attn)
    for (std::size_t k = 0; k < da.size(); ++k) da.data[k] = dmean.data[k] * inv;
  return g;
}

// ---------------------------------------------------------------------------
// Heatmap head

/// Logistic function restricted to the open interval (0,1).
template <typename T>
T sigmoid(T z) {
  T s;
  if (z >= T(0)) {
    s = T(1) / (T(1) + std::exp(-z));
  } else {
    const T e = std::exp(z);
    s = e / (T(1) + e);
  }
  constexpr T lo = std::numeric_limits<T>::denorm_min();
  const T hi = std::nextafter(T(1), T(0));
  return std::min(std::max(s, lo), hi);
}

template <typename T>
HeatmapStack<T> apply_sigmoid(FeatureStack<T> z) {
  for (auto& m : z)
    for (auto& v : m.data) v = sigmoid(v);
  return z;
}

template <typename T>
AttentionStack<T> block_attention(const TemporalBlock& block, const PNParams& params) {
  return attention<T>(frame_diff(block), params);
}

/// H = sigmoid(fuse(A, V)); fusion is skipped for FusionMode::off.
template <typename T>
HeatmapStack<T> predict_heatmaps(const TemporalBlock& block, const ModelWeights<T>& w,
                                 const PNParams& params, FusionMode mode) {
  FeatureStack<T> v = extract_features(block, w);
  if (mode == FusionMode::off) return apply_sigmoid(std::move(v));
  return apply_sigmoid(fuse(mode, block_attention<T>(block, params), v));
}

/// Uses the model's own fusion mode and motion prompt parameters.
template <typename T>
HeatmapStack<T> predict_heatmaps(const TemporalBlock& block, const ModelWeights<T>& w) {
  return predict_heatmaps(block, w, w.pn.value_or(PNParams{}), w.config.fusion_mode);
}

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kLossClamp = 1e-7;

struct LossReport {
  double total = 0.0;
  std::vector<double> per_slice;
  std::size_t pixel_count = 0;
};

/// -[(1-q)^2 y log q + q^2 (1-y) log(1-q)], q clamped to [1e-7, 1-1e-7].
inline double wbce_term(double pred, double y) {
  const double q = std::clamp(pred, kLossClamp, 1.0 - kLossClamp);
  return -((1 - q) * (1 - q) * y * std::log(q) + q * q * (1 - y) * std::log(1 - q));
}

/// d term / d logit where pred = sigmoid(logit); zero inside the clamped tails.
inline double wbce_dlogit(double pred, double y) {
  if (pred < kLossClamp || pred > 1.0 - kLossClamp) return 0.0;
  const double q = pred, p = 1.0 - q;
  return -(y * (-2.0 * q * p * p * std::log(q) + p * p * p) +
           (1.0 - y) * (2.0 * q * q * p * std::log(p) - q * q * q));
}

/// Loss term and its logit derivative in one pass (shares the logarithms).
inline double wbce_term_and_dlogit(double pred, double y, double& dlogit) {
  const double q = std::clamp(pred, kLossClamp, 1.0 - kLossClamp), p = 1.0 - q;
  const double lq = std::log(q), lp = std::log(p);
  if (pred < kLossClamp || pred > 1.0 - kLossClamp) {
    dlogit = 0.0;
  } else {
    dlogit = -(y * (-2.0 * q * p * p * lq + p * p * p) + (1.0 - y) * (2.0 * q * q * p * lp - q * q * q));
  }
  return -(p * p * y * lq + q * q * (1 - y) * lp);
}

template <typename T>
LossReport wbce_loss(const HeatmapStack<T>& pred, const HeatmapStack<T>& target) {
  require(pred.size() == target.size() && !pred.empty(), "wbce_loss: slice count mismatch");
  LossReport r;
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    require(pred[t].same_shape(target[t]), "wbce_loss: map size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < pred[t].size(); ++k)
      s += wbce_term(static_cast<double>(pred[t].data[k]), static_cast<double>(target[t].data[k]));
    r.per_slice.push_back(s / static_cast<double>(pred[t].size()));
    sum += s;
    r.pixel_count += pred[t].size();
  }
  r.total = sum / static_cast<double>(r.pixel_count);
  return r;
}

}  // namespace motrack

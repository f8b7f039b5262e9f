// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#if defined(__SSE__)
#include <xmmintrin.h>
#endif
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "motrack/tracker_net.hpp"

namespace motrack {

struct TrainSample {
  TemporalBlock block;
  HeatmapStack<double> target;  // T' ground-truth maps
};

enum class Optimizer { sgd, adadelta };

inline std::string to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adadelta"; }

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adadelta") return Optimizer::adadelta;
  throw DataError("unknown optimizer '" + s + "' (expected sgd or adadelta)");
}

struct TrainHyper {
  Optimizer optimizer = Optimizer::sgd;
  double lr = 1.0;
  double lr_decay = 1.0;  // multiplicative, applied after every epoch
  int epochs = 30;
  int batch = 4;
  std::uint64_t seed = 1;
};

template <typename T>
struct TrainResult {
  ModelWeights<T> weights;
  std::vector<double> epoch_loss;
};

/// Flushes denormal floats to zero for the lifetime of the guard. Per-pixel
/// loss gradients are O(1/pixels) and would otherwise hit the slow denormal
/// path deep in the backward pass.
class DenormalGuard {
 public:
#if defined(__SSE__)
  DenormalGuard() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~DenormalGuard() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
 public:
  DenormalGuard(const DenormalGuard&) = delete;
  DenormalGuard& operator=(const DenormalGuard&) = delete;
};

struct BatchStats {
  double loss = 0.0;
  PNGrad pn;
};

/// One forward/backward pass over a batch in training mode. Parameter
/// gradients are accumulated into w (call zero_grad first); the motion prompt
/// gradients are returned. Returns the mean loss over every pixel of the batch.
template <typename T>
BatchStats forward_backward(ModelWeights<T>& w, std::span<const TrainSample* const> batch) {
  const NetworkConfig& cfg = w.config;
  const DenormalGuard ftz;
  std::vector<const TemporalBlock*> blocks;
  blocks.reserve(batch.size());
  for (const auto* s : batch) blocks.push_back(&s->block);
  Tensor<T> x = pack_input<T>(blocks, cfg);

  ForwardCache<T> cache;
  Tensor<T> v = backbone_forward_train(w, x, cache);
  Tensor<T> dv(v.n, v.c, v.h, v.w);

  const PNParams pn = w.pn.value_or(PNParams{});
  const double norm = 1.0 / static_cast<double>(v.size());
  BatchStats stats;
  double loss_sum = 0.0;
  for (int i = 0; i < v.n; ++i) {
    const TrainSample& s = *batch[i];
    require(static_cast<int>(s.target.size()) == cfg.t_prime, "target slice count mismatch");
    FeatureStack<T> feats = tensor_sample_to_stack(v, i);
    DiffStack diffs;
    AttentionStack<T> attn;
    FeatureStack<T> z;
    if (cfg.fusion_mode != FusionMode::off) {
      diffs = frame_diff(s.block);
      attn = attention<T>(diffs, pn);
      z = fuse(cfg.fusion_mode, attn, feats);
    } else {
      z = feats;
    }
    FeatureStack<T> dz = z;
    for (std::size_t t = 0; t < z.size(); ++t) {
      require(z[t].width == s.target[t].width && z[t].height == s.target[t].height,
              "target map size mismatch");
      for (std::size_t k = 0; k < z[t].size(); ++k) {
        double d;
        loss_sum += wbce_term_and_dlogit(static_cast<double>(sigmoid(z[t].data[k])),
                                         s.target[t].data[k], d);
        dz[t].data[k] = static_cast<T>(d * norm);
      }
    }
    FusionGrad<T> g = fuse_backward(cfg.fusion_mode, attn, feats, dz);
    stack_to_tensor_sample(g.d_feats, dv, i);
    if (cfg.fusion_mode != FusionMode::off) {
      const PNGrad pg = pn_grad_from_attention(diffs, pn, attn, g.d_attn);
      stats.pn.d_slope += pg.d_slope;
      stats.pn.d_shift += pg.d_shift;
    }
  }
  backbone_backward(w, cache, dv);
  stats.loss = loss_sum * norm;
  return stats;
}

template <typename T>
void sgd_step(ModelWeights<T>& w, const PNGrad& pn_grad, double lr) {
  for (auto& b : w.blocks) {
    if (!b.trainable) continue;
    const T step = static_cast<T>(lr);
    for (std::size_t k = 0; k < b.value.size(); ++k) b.value[k] -= step * b.grad[k];
  }
  if (w.pn) {
    w.pn->slope -= lr * pn_grad.d_slope;
    w.pn->shift -= lr * pn_grad.d_shift;
    w.pn->clamp_slope();
  }
}

/// Adadelta with rho 0.95 and epsilon 1e-7; `lr` scales the update.
template <typename T>
class AdadeltaState {
 public:
  static constexpr double kRho = 0.95, kEps = 1e-7;

  explicit AdadeltaState(const ModelWeights<T>& w) {
    for (const auto& b : w.blocks) {
      sq_grad_.emplace_back(b.grad.size(), 0.0);
      sq_step_.emplace_back(b.grad.size(), 0.0);
    }
  }

  void step(ModelWeights<T>& w, const PNGrad& pn_grad, double lr) {
    for (std::size_t i = 0; i < w.blocks.size(); ++i) {
      auto& b = w.blocks[i];
      if (!b.trainable) continue;
      for (std::size_t k = 0; k < b.value.size(); ++k)
        b.value[k] += static_cast<T>(lr * update(sq_grad_[i][k], sq_step_[i][k], b.grad[k]));
    }
    if (w.pn) {
      w.pn->slope += lr * update(pn_sq_[0], pn_sq_[1], pn_grad.d_slope);
      w.pn->shift += lr * update(pn_sq_[2], pn_sq_[3], pn_grad.d_shift);
      w.pn->clamp_slope();
    }
  }

 private:
  static double update(double& eg, double& ex, double g) {
    eg = kRho * eg + (1.0 - kRho) * g * g;
    const double dx = -std::sqrt(ex + kEps) / std::sqrt(eg + kEps) * g;
    ex = kRho * ex + (1.0 - kRho) * dx * dx;
    return dx;
  }

  std::vector<std::vector<double>> sq_grad_, sq_step_;
  double pn_sq_[4] = {0, 0, 0, 0};
};

/// Called after every epoch with (epoch index, mean loss, current weights).
template <typename T>
using EpochCallback = std::function<void(int, double, const ModelWeights<T>&)>;

/// Mini-batch training over a shuffled dataset. Deterministic for a given seed.
/// When `init` is given, training continues from those weights (fine-tuning);
/// a baseline without motion prompt parameters gains freshly initialized ones
/// if cfg enables fusion.
template <typename T>
TrainResult<T> train(const std::vector<TrainSample>& dataset, const NetworkConfig& cfg,
                     const TrainHyper& hyper, const ModelWeights<T>* init = nullptr,
                     EpochCallback<T> on_epoch = {}) {
  require(!dataset.empty(), "training dataset is empty");
  require(hyper.batch >= 1 && hyper.epochs >= 0, "invalid batch size or epoch count");
  cfg.validate();
  TrainResult<T> result;
  if (init) {
    NetworkConfig a = init->config, b = cfg;
    a.fusion_mode = b.fusion_mode = FusionMode::off;
    require(a == b, "init weights were built for a different network configuration");
    result.weights = *init;
    result.weights.config.fusion_mode = cfg.fusion_mode;
    if (cfg.fusion_mode == FusionMode::off) result.weights.pn.reset();
    else if (!result.weights.pn) result.weights.pn = PNParams{};
  } else {
    result.weights = init_weights<T>(cfg, hyper.seed);
  }
  ModelWeights<T>& w = result.weights;

  std::mt19937_64 rng(hyper.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<AdadeltaState<T>> adadelta;
  if (hyper.optimizer == Optimizer::adadelta) adadelta.emplace(w);
  double lr = hyper.lr;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) {
      const std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k));
      std::swap(order[k - 1], order[std::min(j, k - 1)]);
    }
    double epoch_sum = 0.0;
    std::size_t epoch_n = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch, ++batch_index) {
      std::vector<const TrainSample*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + hyper.batch); ++k)
        batch.push_back(&dataset[order[k]]);
      w.zero_grad();
      const BatchStats st = forward_backward<T>(w, batch);
      if (!std::isfinite(st.loss))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(batch_index + 1));
      if (adadelta) adadelta->step(w, st.pn, lr);
      else sgd_step(w, st.pn, lr);
      epoch_sum += st.loss * static_cast<double>(batch.size());
      epoch_n += batch.size();
    }
    const double mean = epoch_sum / static_cast<double>(epoch_n);
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, w);
    lr *= hyper.lr_decay;
  }
  return result;
}

}  // namespace motrack

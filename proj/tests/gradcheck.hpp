// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks shared by the unit and acceptance suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "motrack/motion_prompt.hpp"
#include "motrack/model_weights.hpp"
#include "motrack/train.hpp"
#include "test_util.hpp"

namespace motrack::test {

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_name;
};

/// |a - f| / max(|a|, |f|, scale). The scale keeps gradients that are zero up
/// to rounding from dividing by nothing; above it this is plain relative error.
inline double grad_rel_err(double a, double f, double scale = 1e-6) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), scale});
}

inline double pn_rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic), 1e-300);
}

/// Central difference of a(d) = 1 / (1 + exp(-slope (d - shift))) along one
/// coordinate (0 slope, 1 shift, 2 input). Near saturation the difference is
/// taken on the small side of the curve, where the values are representable.
inline double pn_central_difference(double d, PNParams p, int coord, double h) {
  auto z_at = [&](double dx) {
    double s = p.slope, m = p.shift, x = d;
    (coord == 0 ? s : coord == 1 ? m : x) += dx;
    return s * (x - m);
  };
  const bool complement = p.slope * (d - p.shift) > 0;
  auto side = [&](double dx) {
    const double z = z_at(dx);
    return complement ? std::exp(-z) / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  };
  const double diff = (side(h) - side(-h)) / (2 * h);
  return complement ? -diff : diff;
}

/// 100 random (d, slope, shift) points, central differences with h = 1e-5.
inline GradCheckReport pn_gradient_check(std::uint64_t seed = 100, int points = 100, double tol = 1e-4) {
  GradCheckReport r;
  std::mt19937_64 rng(seed);
  const double h = 1e-5;
  for (int i = 0; i < points; ++i) {
    const PNParams p{0.5 + 29.5 * uniform01(rng), uniform01(rng)};
    double d = uniform01(rng);
    // d == shift makes d_slope exactly zero and relative error meaningless.
    if (std::abs(d - p.shift) < 1e-3) d = std::fmod(d + 0.1, 1.0);
    const PNGrad g = pn_grad(d, p, 1.0);
    const double ana[3] = {g.d_slope, g.d_shift, g.d_input};
    const char* names[3] = {"slope", "shift", "input"};
    for (int k = 0; k < 3; ++k) {
      const double e = pn_rel_err(ana[k], pn_central_difference(d, p, k, h));
      ++r.checked;
      if (e >= tol) ++r.failed;
      if (e > r.worst) {
        r.worst = e;
        r.worst_name = names[k];
      }
    }
  }
  return r;
}

/// Two-sample batch of random 16x16 blocks with random targets.
inline std::vector<TrainSample> toy_batch(const NetworkConfig& cfg, std::uint64_t seed) {
  std::vector<TrainSample> out;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 2; ++i) {
    TrainSample s;
    s.block = random_block(cfg.input_width, cfg.input_height, cfg.t_prime, seed + 17 * i);
    for (int t = 0; t < cfg.t_prime; ++t) {
      Map2D<double> m(cfg.input_width, cfg.input_height);
      for (auto& v : m.data) v = uniform01(rng) < 0.1 ? uniform01(rng) : 0.0;
      s.target.push_back(m);
    }
    out.push_back(s);
  }
  return out;
}

inline double toy_loss(ModelWeights<double> w, const std::vector<const TrainSample*>& batch) {
  w.zero_grad();
  return forward_backward<double>(w, batch).loss;
}

/// Every trainable scalar (and the motion prompt pair when fused) against
/// central differences of the batch loss in training mode.
inline GradCheckReport network_gradient_check(FusionMode mode, double tol = 1e-3, std::uint64_t seed = 7) {
  NetworkConfig cfg;
  cfg.input_width = 16;
  cfg.input_height = 16;
  cfg.base_channels = 2;
  cfg.levels = 3;
  cfg.fusion_mode = mode;
  ModelWeights<double> w = init_weights<double>(cfg, seed);
  std::mt19937_64 rng(seed + 1);
  // Move affine terms off their trivial initial values so every path is exercised.
  for (auto& b : w.blocks) {
    if (b.name.ends_with(".bn.gamma")) for (auto& v : b.value) v = 0.5 + uniform01(rng);
    if (b.name.ends_with(".bn.beta") || b.name == "head.bias") for (auto& v : b.value) v = 0.2 * (uniform01(rng) - 0.5);
  }
  if (w.pn) *w.pn = PNParams{3.0, 0.3};
  const auto samples = toy_batch(cfg, seed + 2);
  std::vector<const TrainSample*> batch;
  for (const auto& s : samples) batch.push_back(&s);

  ModelWeights<double> g = w;
  g.zero_grad();
  const BatchStats stats = forward_backward<double>(g, batch);

  GradCheckReport r;
  const double h = 1e-6;
  auto record = [&](const std::string& name, double analytic, double numeric) {
    const double e = grad_rel_err(analytic, numeric);
    ++r.checked;
    if (e >= tol) ++r.failed;
    if (e > r.worst) {
      r.worst = e;
      r.worst_name = name;
    }
  };
  for (std::size_t bi = 0; bi < w.blocks.size(); ++bi) {
    if (!w.blocks[bi].trainable) continue;
    for (std::size_t k = 0; k < w.blocks[bi].value.size(); ++k) {
      ModelWeights<double> wp = w, wm = w;
      wp.blocks[bi].value[k] += h;
      wm.blocks[bi].value[k] -= h;
      const double num = (toy_loss(wp, batch) - toy_loss(wm, batch)) / (2 * h);
      record(w.blocks[bi].name + "[" + std::to_string(k) + "]", g.blocks[bi].grad[k], num);
    }
  }
  if (w.pn) {
    ModelWeights<double> wp = w, wm = w;
    wp.pn->slope += h;
    wm.pn->slope -= h;
    record("pn.slope", stats.pn.d_slope, (toy_loss(wp, batch) - toy_loss(wm, batch)) / (2 * h));
    wp = w;
    wm = w;
    wp.pn->shift += h;
    wm.pn->shift -= h;
    record("pn.shift", stats.pn.d_shift, (toy_loss(wp, batch) - toy_loss(wm, batch)) / (2 * h));
  }
  return r;
}

}  // namespace motrack::test

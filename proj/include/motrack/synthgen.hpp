// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic fast-ball clips: a small bright ball moving in a
// straight line with border reflection, optional occlusion, sensor noise and
// an unlabeled moving distractor blob.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "motrack/frames.hpp"
#include "motrack/model_weights.hpp"

namespace motrack {

enum class BackgroundMode { flat, gradient, moving_distractor };

inline std::string to_string(BackgroundMode m) {
  switch (m) {
    case BackgroundMode::flat: return "flat";
    case BackgroundMode::gradient: return "gradient";
    case BackgroundMode::moving_distractor: return "moving-distractor";
  }
  return "flat";
}

inline BackgroundMode parse_background_mode(const std::string& s) {
  if (s == "flat") return BackgroundMode::flat;
  if (s == "gradient") return BackgroundMode::gradient;
  if (s == "moving-distractor" || s == "moving_distractor") return BackgroundMode::moving_distractor;
  throw DataError("unknown background_mode '" + s + "'");
}

struct SynthConfig {
  int width = 128;
  int height = 72;
  int n_frames = 200;
  double ball_radius = 2.0;
  double speed_min = 4.0;
  double speed_max = 14.0;
  double contrast = 0.8;
  double occlusion_prob = 0.0;
  double occlusion_burst_mean = 1.0;  // mean occlusion length in frames; 1 = single frames
  double noise_sigma = 0.0;
  BackgroundMode background_mode = BackgroundMode::flat;
  std::uint64_t seed = 1;

  void validate() const {
    require(width > 0 && height > 0, "synth: width and height must be positive");
    require(n_frames >= 1, "synth: n_frames must be >= 1");
    require(ball_radius >= 1.0, "synth: ball_radius must be >= 1");
    require(speed_min > 0.0 && speed_max >= speed_min, "synth: speed range must be positive");
    require(contrast >= 0.0 && contrast <= 1.0, "synth: contrast must be in [0,1]");
    require(occlusion_prob >= 0.0 && occlusion_prob <= 1.0, "synth: occlusion_prob must be in [0,1]");
    require(occlusion_burst_mean >= 1.0, "synth: occlusion_burst_mean must be >= 1");
    require(noise_sigma >= 0.0, "synth: noise_sigma must be >= 0");
  }
};

struct BallLabel {
  int frame_index = 0;
  int visibility = 0;  // 0 = not visible, 1 = visible
  double x = 0.0;
  double y = 0.0;

  bool visible() const { return visibility == 1; }
};

struct SynthClip {
  FrameSequence frames;
  std::vector<BallLabel> labels;
};

namespace detail {

struct Mover {
  double x, y, vx, vy;

  void step(int width, int height) {
    x += vx;
    y += vy;
    const double xmax = width - 1.0, ymax = height - 1.0;
    // A single step never exceeds the frame size for the configured speeds,
    // but loop to stay correct for tiny frames.
    while (x < 0.0 || x > xmax) {
      if (x < 0.0) x = -x;
      if (x > xmax) x = 2.0 * xmax - x;
      vx = -vx;
    }
    while (y < 0.0 || y > ymax) {
      if (y < 0.0) y = -y;
      if (y > ymax) y = 2.0 * ymax - y;
      vy = -vy;
    }
  }
};

inline Mover random_mover(std::mt19937_64& rng, int width, int height, double margin,
                          double speed_min, double speed_max) {
  const double mx = std::min(margin, (width - 1) / 2.0), my = std::min(margin, (height - 1) / 2.0);
  Mover m;
  m.x = mx + uniform01(rng) * (width - 1 - 2 * mx);
  m.y = my + uniform01(rng) * (height - 1 - 2 * my);
  const double angle = 2.0 * M_PI * uniform01(rng);
  const double speed = speed_min + uniform01(rng) * (speed_max - speed_min);
  m.vx = speed * std::cos(angle);
  m.vy = speed * std::sin(angle);
  return m;
}

inline void draw_disc(Frame& f, double cx, double cy, double radius, const std::array<double, 3>& color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(cx + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(cy + radius)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= radius * radius)
        for (int ch = 0; ch < 3; ++ch) f.at(x, y, ch) = color[ch];
    }
}

inline std::array<double, 3> background_color(const SynthConfig& cfg, int y) {
  constexpr std::array<double, 3> base{0.20, 0.42, 0.26};
  if (cfg.background_mode != BackgroundMode::gradient || cfg.height <= 1) return base;
  const double t = static_cast<double>(y) / (cfg.height - 1);
  return {0.12 + 0.18 * t, 0.30 + 0.22 * t, 0.18 + 0.14 * t};
}

}  // namespace detail

/// One label per frame; frame indices start at 1.
inline SynthClip generate_sequence(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SynthClip clip;
  clip.frames.fps_hint = 30.0;
  detail::Mover ball = detail::random_mover(rng, cfg.width, cfg.height, cfg.ball_radius + 1,
                                            cfg.speed_min, cfg.speed_max);
  const double distractor_radius = 2.0 * cfg.ball_radius + 1.0;
  detail::Mover distractor = detail::random_mover(rng, cfg.width, cfg.height, distractor_radius, 1.0, 3.0);
  const bool with_distractor = cfg.background_mode == BackgroundMode::moving_distractor;

  int occluded_left = 0;
  for (int i = 0; i < cfg.n_frames; ++i) {
    bool occluded = false;
    if (occluded_left > 0) {
      occluded = true;
      --occluded_left;
    } else if (cfg.occlusion_prob > 0.0 && uniform01(rng) < cfg.occlusion_prob) {
      occluded = true;
      int length = 1;
      if (cfg.occlusion_burst_mean > 1.0) {
        double u = uniform01(rng);
        while (u <= 0.0) u = uniform01(rng);
        length = 1 + static_cast<int>(std::floor(std::log(u) / std::log(1.0 - 1.0 / cfg.occlusion_burst_mean)));
      }
      occluded_left = length - 1;
    }

    Frame f(cfg.width, cfg.height, 3);
    for (int y = 0; y < cfg.height; ++y) {
      const auto bg = detail::background_color(cfg, y);
      for (int x = 0; x < cfg.width; ++x)
        for (int ch = 0; ch < 3; ++ch) f.at(x, y, ch) = bg[ch];
    }
    if (with_distractor) {
      const auto bg = detail::background_color(cfg, static_cast<int>(distractor.y));
      const double c = 0.6 * cfg.contrast;
      detail::draw_disc(f, distractor.x, distractor.y, distractor_radius,
                        {std::min(1.0, bg[0] + c), std::max(0.0, bg[1] - 0.3 * c), std::max(0.0, bg[2] - 0.3 * c)});
    }
    BallLabel label;
    label.frame_index = i + 1;
    if (!occluded) {
      const auto bg = detail::background_color(cfg, static_cast<int>(ball.y));
      detail::draw_disc(f, ball.x, ball.y, cfg.ball_radius,
                        {std::min(1.0, bg[0] + cfg.contrast), std::min(1.0, bg[1] + cfg.contrast),
                         std::min(1.0, bg[2] + 0.8 * cfg.contrast)});
      label.visibility = 1;
      label.x = ball.x;
      label.y = ball.y;
    }
    if (cfg.noise_sigma > 0.0)
      for (auto& v : f.data) v = std::clamp(v + cfg.noise_sigma * standard_normal(rng), 0.0, 1.0);

    clip.frames.frames.push_back(std::move(f));
    clip.frames.frame_indices.push_back(i + 1);
    clip.labels.push_back(label);
    ball.step(cfg.width, cfg.height);
    if (with_distractor) distractor.step(cfg.width, cfg.height);
  }
  return clip;
}

inline constexpr double kDefaultHeatmapSigma = 2.5;

/// Unnormalized Gaussian, peak 1 at the label center; all zero when invisible.
inline Map2D<double> render_gt_heatmap(const BallLabel& label, int width, int height,
                                       double sigma_g = kDefaultHeatmapSigma) {
  require(sigma_g > 0.0, "render_gt_heatmap: sigma must be positive");
  Map2D<double> h(width, height);
  if (!label.visible()) return h;
  require(label.x >= 0.0 && label.x < width && label.y >= 0.0 && label.y < height,
          "render_gt_heatmap: label center (" + std::to_string(label.x) + ", " +
              std::to_string(label.y) + ") outside " + std::to_string(width) + "x" +
              std::to_string(height));
  const double inv = 1.0 / (2.0 * sigma_g * sigma_g);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = x - label.x, dy = y - label.y;
      h(x, y) = std::exp(-(dx * dx + dy * dy) * inv);
    }
  return h;
}

}  // namespace motrack

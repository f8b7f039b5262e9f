// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "motrack/eval.hpp"
#include "motrack/frames.hpp"
#include "motrack/motion_prompt.hpp"

namespace motrack {

enum class VisualMode { attention, prompted, heatmap, trajectory };

inline VisualMode parse_visual_mode(const std::string& s) {
  if (s == "attention") return VisualMode::attention;
  if (s == "prompted") return VisualMode::prompted;
  if (s == "heatmap") return VisualMode::heatmap;
  if (s == "trajectory") return VisualMode::trajectory;
  throw DataError("unknown visualize mode '" + s + "'");
}

/// Used when no model supplies learned parameters: a typical converged curve.
inline constexpr PNParams kVisualizationPN{16.24, 0.28};

/// Single-channel frame holding an attention map.
template <typename T>
Frame attention_image(const Map2D<T>& a) {
  Frame f(a.width, a.height, 1);
  for (std::size_t k = 0; k < a.size(); ++k) f.data[k] = static_cast<double>(a.data[k]);
  return f;
}

/// Element-wise attention times the RGB frame.
template <typename T>
Frame prompted_image(const Map2D<T>& a, const Frame& rgb) {
  require(rgb.channels == 3 && rgb.width == a.width && rgb.height == a.height,
          "prompted_image: frame and attention differ in size");
  Frame f = rgb;
  for (std::size_t p = 0; p < a.size(); ++p)
    for (int ch = 0; ch < 3; ++ch) f.data[p * 3 + ch] *= static_cast<double>(a.data[p]);
  return f;
}

/// Blue-cyan-yellow-red ramp for v in [0,1].
inline std::array<double, 3> heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const double r = std::clamp(1.5 - std::abs(4.0 * v - 3.0), 0.0, 1.0);
  const double g = std::clamp(1.5 - std::abs(4.0 * v - 2.0), 0.0, 1.0);
  const double b = std::clamp(1.5 - std::abs(4.0 * v - 1.0), 0.0, 1.0);
  return {r, g, b};
}

/// Heatmap blended over the frame; opacity grows with the heat value.
template <typename T>
Frame heatmap_overlay(const Map2D<T>& h, const Frame& rgb, double alpha = 0.7) {
  require(rgb.channels == 3 && rgb.width == h.width && rgb.height == h.height,
          "heatmap_overlay: frame and heatmap differ in size");
  Frame f = rgb;
  for (std::size_t p = 0; p < h.size(); ++p) {
    const double v = static_cast<double>(h.data[p]);
    const auto c = heat_color(v);
    const double k = alpha * v;
    for (int ch = 0; ch < 3; ++ch) f.data[p * 3 + ch] = (1.0 - k) * f.data[p * 3 + ch] + k * c[ch];
  }
  return f;
}

/// Detected centers drawn as small red crosses on a copy of `last`.
inline Frame trajectory_overlay(const std::vector<Detection>& dets, const Frame& last) {
  require(last.channels == 3, "trajectory_overlay: RGB frame required");
  Frame f = last;
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= f.width || y >= f.height) return;
    f.at(x, y, 0) = 1.0;
    f.at(x, y, 1) = 0.0;
    f.at(x, y, 2) = 0.0;
  };
  for (const auto& d : dets) {
    if (!d.present) continue;
    const int x = static_cast<int>(std::lround(d.x)), y = static_cast<int>(std::lround(d.y));
    put(x, y);
    put(x - 1, y);
    put(x + 1, y);
    put(x, y - 1);
    put(x, y + 1);
  }
  return f;
}

}  // namespace motrack

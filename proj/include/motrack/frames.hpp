// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "motrack/tensor.hpp"

namespace motrack {

/// Interleaved image with intensities normalized to [0,1].
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 0;  // 3 (RGB) or 1 (gray)
  std::vector<double> data;

  Frame() = default;
  Frame(int w, int h, int ch, double fill = 0.0)
      : width(w), height(h), channels(ch),
        data(static_cast<std::size_t>(w) * h * ch, fill) {}

  double& at(int x, int y, int ch = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  double at(int x, int y, int ch = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_geometry(const Frame& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

struct FrameSequence {
  std::vector<Frame> frames;
  std::vector<int> frame_indices;
  std::optional<double> fps_hint;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
};

/// T' consecutive frames: RGB for the network, gray for differencing.
struct TemporalBlock {
  std::vector<Frame> rgb;
  std::vector<Frame> gray;
  int start_index = 0;

  int length() const { return static_cast<int>(rgb.size()); }
  int width() const { return rgb.empty() ? 0 : rgb.front().width; }
  int height() const { return rgb.empty() ? 0 : rgb.front().height; }
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// BT.601 luma.
inline Frame to_gray(const Frame& rgb) {
  require(rgb.channels == 3, "to_gray expects a 3-channel frame, got " +
                                 std::to_string(rgb.channels));
  Frame g(rgb.width, rgb.height, 1);
  const std::size_t n = rgb.pixel_count();
  for (std::size_t p = 0; p < n; ++p) {
    const double* px = &rgb.data[p * 3];
    g.data[p] = std::clamp(kLumaR * px[0] + kLumaG * px[1] + kLumaB * px[2], 0.0, 1.0);
  }
  return g;
}

inline Frame gray_to_rgb(const Frame& gray) {
  require(gray.channels == 1, "gray_to_rgb expects a 1-channel frame");
  Frame out(gray.width, gray.height, 3);
  for (std::size_t p = 0; p < gray.pixel_count(); ++p)
    for (int ch = 0; ch < 3; ++ch) out.data[p * 3 + ch] = gray.data[p];
  return out;
}

/// Bilinear resampling with pixel-center alignment.
inline Frame resize_bilinear(const Frame& src, int width, int height) {
  if (src.width == width && src.height == height) return src;
  require(width > 0 && height > 0, "resize target must be positive");
  Frame out(width, height, src.channels);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < src.channels; ++ch) {
        const double top = (1 - wx) * src.at(x0, y0, ch) + wx * src.at(x1, y0, ch);
        const double bot = (1 - wx) * src.at(x0, y1, ch) + wx * src.at(x1, y1, ch);
        out.at(x, y, ch) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

/// Resize every frame to (width, height); a no-op when the size already matches.
inline FrameSequence resize_sequence(const FrameSequence& seq, int width, int height) {
  FrameSequence out;
  out.frame_indices = seq.frame_indices;
  out.fps_hint = seq.fps_hint;
  out.frames.reserve(seq.size());
  for (const auto& f : seq.frames) out.frames.push_back(resize_bilinear(f, width, height));
  return out;
}

/// Stride-1 sliding blocks of length t_prime. The i-th block starts at frame i.
inline std::vector<TemporalBlock> make_blocks(const FrameSequence& seq, int t_prime,
                                              int stride = 1) {
  require(t_prime >= 2, "block length must be at least 2");
  require(stride >= 1, "block stride must be positive");
  const int total = static_cast<int>(seq.size());
  require(total >= t_prime, "sequence shorter than block (" + std::to_string(total) +
                                " < " + std::to_string(t_prime) + ")");
  std::vector<Frame> gray;
  gray.reserve(seq.size());
  for (const auto& f : seq.frames) gray.push_back(f.channels == 3 ? to_gray(f) : f);

  std::vector<TemporalBlock> blocks;
  for (int start = 0; start + t_prime <= total; start += stride) {
    TemporalBlock b;
    b.start_index = start;
    for (int k = 0; k < t_prime; ++k) {
      const Frame& f = seq.frames[start + k];
      b.rgb.push_back(f.channels == 3 ? f : gray_to_rgb(f));
      b.gray.push_back(gray[start + k]);
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace motrack

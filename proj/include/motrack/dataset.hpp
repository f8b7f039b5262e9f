// SPDX-License-Identifier: Apache-2.0
//
// On-disk clips (<dir>/<%06d>.png + labels.csv) and training-sample assembly.
#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "motrack/csv.hpp"
#include "motrack/png_io.hpp"
#include "motrack/track.hpp"
#include "motrack/train.hpp"

namespace motrack {

struct Clip {
  std::string name;
  FrameSequence frames;
  std::vector<BallLabel> labels;  // aligned with frames
};

inline const char* const kLabelsFile = "labels.csv";

/// Labels are matched to frames by index; every frame needs a label.
inline Clip load_clip(const fs::path& dir) {
  Clip c;
  c.name = dir.filename().string();
  c.frames = load_sequence(dir);
  const fs::path lp = dir / kLabelsFile;
  if (!fs::exists(lp)) throw DataError("missing " + lp.string());
  const auto labels = read_labels(lp);
  for (int idx : c.frames.frame_indices) {
    const auto it = std::find_if(labels.begin(), labels.end(),
                                 [&](const BallLabel& l) { return l.frame_index == idx; });
    if (it == labels.end()) throw DataError(lp.string() + ": no label for frame " + std::to_string(idx));
    c.labels.push_back(*it);
  }
  return c;
}

inline void save_clip(const fs::path& dir, const SynthClip& clip) {
  fs::create_directories(dir);
  save_sequence(dir, clip.frames);
  write_file_atomic(dir / kLabelsFile, format_labels(clip.labels));
}

/// A clip directory, or a directory whose subdirectories are clips (natural order).
inline std::vector<Clip> load_clips(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  if (fs::exists(dir / kLabelsFile)) return {load_clip(dir)};
  std::vector<fs::path> subs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / kLabelsFile)) subs.push_back(e.path());
  if (subs.empty()) throw DataError("no clips (directories with " + std::string(kLabelsFile) + ") in " + dir.string());
  std::sort(subs.begin(), subs.end(), [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  std::vector<Clip> out;
  for (const auto& s : subs) out.push_back(load_clip(s));
  return out;
}

/// Label in network coordinates after resizing from (src_w, src_h).
inline BallLabel rescale_label(const BallLabel& l, int src_w, int src_h, int dst_w, int dst_h) {
  BallLabel r = l;
  if (!l.visible() || (src_w == dst_w && src_h == dst_h)) return r;
  r.x = std::clamp(rescale_coord(l.x, src_w, dst_w), 0.0, dst_w - 1e-6);
  r.y = std::clamp(rescale_coord(l.y, src_h, dst_h), 0.0, dst_h - 1e-6);
  return r;
}

/// Blocks every `stride` frames with Gaussian targets, resized to the network input.
inline std::vector<TrainSample> build_samples(const std::vector<Clip>& clips, const NetworkConfig& cfg,
                                              int stride = 1, double sigma_g = kDefaultHeatmapSigma) {
  std::vector<TrainSample> out;
  for (const auto& c : clips) {
    require(!c.frames.empty(), "clip " + c.name + " has no frames");
    const int sw = c.frames.frames.front().width, sh = c.frames.frames.front().height;
    const FrameSequence seq = resize_sequence(c.frames, cfg.input_width, cfg.input_height);
    for (auto& b : make_blocks(seq, cfg.t_prime, stride)) {
      TrainSample s;
      for (int k = 0; k < cfg.t_prime; ++k) {
        const BallLabel l = rescale_label(c.labels[b.start_index + k], sw, sh, cfg.input_width, cfg.input_height);
        s.target.push_back(render_gt_heatmap(l, cfg.input_width, cfg.input_height, sigma_g));
      }
      s.block = std::move(b);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace motrack

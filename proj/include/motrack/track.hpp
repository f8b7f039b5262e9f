// SPDX-License-Identifier: Apache-2.0
//
// Sequence-level inference. Stride-1 blocks give every frame up to T'
// heatmaps; the overlap policy picks one.
#pragma once

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include "motrack/eval.hpp"
#include "motrack/frames.hpp"
#include "motrack/tracker_net.hpp"

namespace motrack {

enum class OverlapPolicy {
  last_slot,  // heatmap from the block where the frame is last; earlier slots at sequence start
  pixel_max,  // per-pixel maximum over every covering block
};

inline std::string to_string(OverlapPolicy p) {
  return p == OverlapPolicy::last_slot ? "last-slot" : "pixel-max";
}

inline OverlapPolicy parse_overlap_policy(const std::string& s) {
  if (s == "last-slot" || s == "last_slot") return OverlapPolicy::last_slot;
  if (s == "pixel-max" || s == "pixel_max") return OverlapPolicy::pixel_max;
  throw DataError("unknown overlap_policy '" + s + "' (expected last-slot or pixel-max)");
}

struct TrackOptions {
  double threshold = kDefaultThreshold;
  OverlapPolicy overlap = OverlapPolicy::last_slot;
  bool resize = false;  // resample frames to the network resolution when they differ
  int batch = 8;        // blocks per backbone call
};

struct TrackResult {
  std::vector<Detection> detections;  // one per frame, coordinates at input resolution
  std::vector<Map2D<float>> heatmaps;  // per-frame resolved heatmaps at network resolution
  double model_seconds = 0.0;
};

/// Maps a network-resolution pixel coordinate back to the source resolution
/// (inverse of the pixel-center convention used by resize_bilinear).
inline double rescale_coord(double v, int from, int to) {
  return (v + 0.5) * static_cast<double>(to) / static_cast<double>(from) - 0.5;
}

inline TrackResult track_sequence(const FrameSequence& seq, const ModelWeights<float>& w,
                                  const TrackOptions& opt = {}) {
  const NetworkConfig& cfg = w.config;
  require(!seq.empty(), "track: empty frame sequence");
  const int src_w = seq.frames.front().width, src_h = seq.frames.front().height;
  const bool needs_resize = src_w != cfg.input_width || src_h != cfg.input_height;
  if (needs_resize && !opt.resize)
    throw DataError("frame resolution " + std::to_string(src_w) + "x" + std::to_string(src_h) +
                    " does not match model input " + std::to_string(cfg.input_width) + "x" +
                    std::to_string(cfg.input_height) + " (enable resizing)");
  const FrameSequence net_seq = needs_resize ? resize_sequence(seq, cfg.input_width, cfg.input_height) : seq;
  const std::vector<TemporalBlock> blocks = make_blocks(net_seq, cfg.t_prime);
  const int n_frames = static_cast<int>(seq.size());
  const int tp = cfg.t_prime;
  const PNParams pn = w.pn.value_or(PNParams{});

  TrackResult out;
  out.heatmaps.assign(n_frames, Map2D<float>(cfg.input_width, cfg.input_height));
  std::vector<char> filled(n_frames, 0);
  const int batch = std::max(1, opt.batch);
  for (std::size_t start = 0; start < blocks.size(); start += batch) {
    const std::size_t end = std::min(blocks.size(), start + batch);
    std::vector<const TemporalBlock*> ptrs;
    for (std::size_t b = start; b < end; ++b) ptrs.push_back(&blocks[b]);
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor<float> v = backbone_forward(w, pack_input<float>(ptrs, cfg));
    std::vector<HeatmapStack<float>> hs;
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      FeatureStack<float> feats = tensor_sample_to_stack(v, static_cast<int>(i));
      if (cfg.fusion_mode != FusionMode::off)
        feats = fuse(cfg.fusion_mode, block_attention<float>(*ptrs[i], pn), feats);
      hs.push_back(apply_sigmoid(std::move(feats)));
    }
    out.model_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      const int b = ptrs[i]->start_index;
      for (int slot = 0; slot < tp; ++slot) {
        const int f = b + slot;
        if (opt.overlap == OverlapPolicy::pixel_max) {
          auto& dst = out.heatmaps[f].data;
          const auto& src = hs[i][slot].data;
          if (!filled[f]) dst = src;
          else
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = std::max(dst[k], src[k]);
          filled[f] = 1;
        } else if (slot == tp - 1 || b == 0) {
          // Block 0 supplies frames 0..T'-2; every later frame has a last-slot block.
          out.heatmaps[f] = hs[i][slot];
          filled[f] = 1;
        }
      }
    }
  }

  out.detections.reserve(n_frames);
  for (int f = 0; f < n_frames; ++f) {
    Detection d = decode_heatmap(out.heatmaps[f], opt.threshold, seq.frame_indices[f]);
    if (d.present && needs_resize) {
      d.x = rescale_coord(d.x, cfg.input_width, src_w);
      d.y = rescale_coord(d.y, cfg.input_height, src_h);
    }
    out.detections.push_back(d);
  }
  return out;
}

}  // namespace motrack

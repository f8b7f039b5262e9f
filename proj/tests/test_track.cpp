// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "motrack/dataset.hpp"
#include "motrack/synthgen.hpp"
#include "motrack/track.hpp"
#include "motrack/visualize.hpp"
#include "test_util.hpp"

using namespace motrack;

namespace {

NetworkConfig small(FusionMode m) {
  NetworkConfig c;
  c.input_width = 32;
  c.input_height = 16;
  c.base_channels = 2;
  c.fusion_mode = m;
  return c;
}

SynthClip clip(int w, int h, int n, std::uint64_t seed = 1) {
  SynthConfig s;
  s.width = w;
  s.height = h;
  s.n_frames = n;
  s.seed = seed;
  s.speed_min = 1.0;
  s.speed_max = 2.0;
  return generate_sequence(s);
}

}  // namespace

TEST(Track, OneDetectionPerFrame) {
  const auto w = init_weights<float>(small(FusionMode::v1), 2);
  const SynthClip c = clip(32, 16, 10);
  const TrackResult r = track_sequence(c.frames, w);
  ASSERT_EQ(r.detections.size(), 10u);
  ASSERT_EQ(r.heatmaps.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(r.detections[i].frame_index, i + 1);
  const TrackResult again = track_sequence(c.frames, w);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(r.heatmaps[i].data, again.heatmaps[i].data);
}

TEST(Track, LastSlotMatchesBlockPrediction) {
  const auto w = init_weights<float>(small(FusionMode::v2), 5);
  const SynthClip c = clip(32, 16, 6);
  const TrackResult r = track_sequence(c.frames, w);
  const auto blocks = make_blocks(c.frames, 3);
  ASSERT_EQ(blocks.size(), 4u);
  const auto b0 = predict_heatmaps(blocks[0], w), b2 = predict_heatmaps(blocks[2], w);
  for (std::size_t k = 0; k < b0[0].data.size(); ++k) {
    EXPECT_NEAR(r.heatmaps[0].data[k], b0[0].data[k], 1e-6f);
    EXPECT_NEAR(r.heatmaps[1].data[k], b0[1].data[k], 1e-6f);
    EXPECT_NEAR(r.heatmaps[4].data[k], b2[2].data[k], 1e-6f);
  }
}

TEST(Track, PixelMaxDominatesLastSlot) {
  const auto w = init_weights<float>(small(FusionMode::v1), 6);
  const SynthClip c = clip(32, 16, 8);
  TrackOptions o;
  const TrackResult last = track_sequence(c.frames, w, o);
  o.overlap = OverlapPolicy::pixel_max;
  const TrackResult mx = track_sequence(c.frames, w, o);
  for (int f = 0; f < 8; ++f)
    for (std::size_t k = 0; k < last.heatmaps[f].data.size(); ++k)
      EXPECT_GE(mx.heatmaps[f].data[k], last.heatmaps[f].data[k]);
  EXPECT_EQ(parse_overlap_policy("pixel-max"), OverlapPolicy::pixel_max);
  EXPECT_THROW(parse_overlap_policy("mean"), DataError);
}

TEST(Track, ResolutionMismatchNeedsResize) {
  const auto w = init_weights<float>(small(FusionMode::off), 2);
  const SynthClip c = clip(64, 32, 4);
  EXPECT_THROW_MSG(track_sequence(c.frames, w), DataError, "does not match");
  TrackOptions o;
  o.resize = true;
  o.threshold = 0.0;  // every frame decodes, so coordinates get rescaled
  const TrackResult r = track_sequence(c.frames, w, o);
  ASSERT_EQ(r.detections.size(), 4u);
  const Detection d = decode_heatmap(r.heatmaps[0], 0.0, 1);
  EXPECT_DOUBLE_EQ(r.detections[0].x, (d.x + 0.5) * 2.0 - 0.5);
  EXPECT_DOUBLE_EQ(r.detections[0].y, (d.y + 0.5) * 2.0 - 0.5);
}

TEST(Track, TooFewFramesRejected) {
  const auto w = init_weights<float>(small(FusionMode::off), 2);
  EXPECT_THROW(track_sequence(clip(32, 16, 2).frames, w), DataError);
}

TEST(Rescale, PixelCenters) {
  EXPECT_DOUBLE_EQ(rescale_coord(0.0, 128, 1280), 4.5);
  EXPECT_DOUBLE_EQ(rescale_coord(127.0, 128, 1280), 1274.5);
  EXPECT_DOUBLE_EQ(rescale_coord(rescale_coord(17.25, 128, 512), 512, 128), 17.25);
}

TEST(Visualize, PromptedWithUnitAttentionIsIdentity) {
  const Frame f = clip(16, 8, 1).frames.frames[0];
  Map2D<double> ones(16, 8);
  std::fill(ones.data.begin(), ones.data.end(), 1.0);
  EXPECT_EQ(prompted_image(ones, f).data, f.data);
  Map2D<double> zeros(16, 8);
  for (double v : prompted_image(zeros, f).data) EXPECT_EQ(v, 0.0);
}

TEST(Visualize, StaticClipAttentionIsDark) {
  FrameSequence seq;
  Frame f(32, 16, 3);
  std::fill(f.data.begin(), f.data.end(), 0.4);
  for (int i = 0; i < 4; ++i) {
    seq.frames.push_back(f);
    seq.frame_indices.push_back(i + 1);
  }
  const auto blocks = make_blocks(seq, 4);
  for (const auto& a : block_attention<double>(blocks[0], kVisualizationPN))
    for (double v : attention_image(a).data) EXPECT_LT(v, 0.02);
}

TEST(Visualize, TrajectoryMarksDetections) {
  Frame last(32, 16, 3);
  std::vector<Detection> dets;
  for (int i = 0; i < 5; ++i) {
    Detection d;
    d.present = true;
    d.x = 4.0 + 5.0 * i;
    d.y = 3.0 + 2.0 * i;
    dets.push_back(d);
  }
  dets[2].present = false;
  const Frame img = trajectory_overlay(dets, last);
  EXPECT_EQ(img.at(4, 3, 0), 1.0);
  EXPECT_EQ(img.at(24, 11, 0), 1.0);
  EXPECT_EQ(img.at(14, 7, 0), 0.0);

  // Marked centers lie on the generated straight path.
  double sq = 0.0;
  int n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (img.at(x, y, 0) != 1.0) continue;
      const double line_dist = std::abs(2.0 * x - 5.0 * y + 7.0) / std::hypot(2.0, 5.0);
      sq += line_dist * line_dist;
      ++n;
    }
  EXPECT_EQ(n, 4 * 5);
  EXPECT_LT(std::sqrt(sq / n), 2.0);
}

TEST(Visualize, HeatColorRamp) {
  EXPECT_EQ(heat_color(0.0)[2], 0.5);
  EXPECT_EQ(heat_color(1.0)[0], 0.5);
  EXPECT_EQ(heat_color(0.5)[1], 1.0);
  const Frame f = clip(16, 8, 1).frames.frames[0];
  Map2D<double> zero(16, 8);
  EXPECT_EQ(heatmap_overlay(zero, f).data, f.data);
  EXPECT_THROW(parse_visual_mode("xray"), DataError);
}

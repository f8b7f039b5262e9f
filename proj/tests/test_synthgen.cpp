// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "motrack/eval.hpp"
#include "motrack/synthgen.hpp"
#include "test_util.hpp"

using namespace motrack;

TEST(Synth, LengthAndOneLabelPerFrame) {
  SynthConfig c;
  c.n_frames = 37;
  const SynthClip clip = generate_sequence(c);
  ASSERT_EQ(clip.frames.size(), 37u);
  ASSERT_EQ(clip.labels.size(), 37u);
  for (int i = 0; i < 37; ++i) {
    EXPECT_EQ(clip.frames.frame_indices[i], i + 1);
    EXPECT_EQ(clip.labels[i].frame_index, i + 1);
  }
}

TEST(Synth, NoOcclusionMeansAllVisible) {
  SynthConfig c;
  c.occlusion_prob = 0.0;
  const SynthClip clip = generate_sequence(c);
  for (const auto& l : clip.labels) {
    EXPECT_EQ(l.visibility, 1);
    EXPECT_GE(l.x, 0.0);
    EXPECT_LT(l.x, c.width);
    EXPECT_GE(l.y, 0.0);
    EXPECT_LT(l.y, c.height);
  }
}

TEST(Synth, DeterministicPerSeed) {
  SynthConfig c;
  c.n_frames = 20;
  c.noise_sigma = 0.05;
  c.occlusion_prob = 0.2;
  c.background_mode = BackgroundMode::moving_distractor;
  const SynthClip a = generate_sequence(c), b = generate_sequence(c);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(a.frames.frames[i].data, b.frames.frames[i].data);
    EXPECT_EQ(a.labels[i].x, b.labels[i].x);
    EXPECT_EQ(a.labels[i].visibility, b.labels[i].visibility);
  }
  c.seed = 2;
  EXPECT_NE(generate_sequence(c).frames.frames[0].data, a.frames.frames[0].data);
}

TEST(Synth, BrightestPixelNearBall) {
  SynthConfig c;
  c.noise_sigma = 0.0;
  c.contrast = 1.0;
  c.background_mode = BackgroundMode::flat;
  c.n_frames = 100;
  const SynthClip clip = generate_sequence(c);
  for (int i = 0; i < c.n_frames; ++i) {
    const auto& l = clip.labels[i];
    ASSERT_TRUE(l.visible());
    const Frame g = to_gray(clip.frames.frames[i]);
    const auto it = std::max_element(g.data.begin(), g.data.end());
    const int p = static_cast<int>(it - g.data.begin());
    EXPECT_LE(std::hypot(p % g.width - l.x, p / g.width - l.y), c.ball_radius) << "frame " << i;
  }
}

TEST(Synth, OcclusionHidesBall) {
  SynthConfig c;
  c.occlusion_prob = 0.3;
  c.n_frames = 400;
  c.noise_sigma = 0.0;
  const SynthClip clip = generate_sequence(c);
  int hidden = 0;
  for (int i = 0; i < c.n_frames; ++i) {
    if (clip.labels[i].visible()) continue;
    ++hidden;
    // Flat background with no ball: every pixel has the background color.
    const Frame& f = clip.frames.frames[i];
    for (std::size_t p = 1; p < f.pixel_count(); ++p) EXPECT_EQ(f.data[p * 3], f.data[0]);
  }
  EXPECT_GT(hidden, 60);
  EXPECT_LT(hidden, 180);
}

TEST(Synth, BurstsLengthenOcclusions) {
  SynthConfig c;
  c.occlusion_prob = 0.1;
  c.n_frames = 2000;
  auto mean_run = [](const SynthClip& clip) {
    int runs = 0, hidden = 0;
    for (std::size_t i = 0; i < clip.labels.size(); ++i) {
      if (clip.labels[i].visible()) continue;
      ++hidden;
      if (i == 0 || clip.labels[i - 1].visible()) ++runs;
    }
    return runs ? double(hidden) / runs : 0.0;
  };
  const double single = mean_run(generate_sequence(c));
  c.occlusion_burst_mean = 3.0;
  const double burst = mean_run(generate_sequence(c));
  EXPECT_LT(single, 1.5);
  EXPECT_GT(burst, 2.0);
}

TEST(Synth, DistractorIsUnlabeledExtraMotion) {
  SynthConfig c;
  c.background_mode = BackgroundMode::moving_distractor;
  c.occlusion_prob = 1.0;
  c.n_frames = 5;
  const SynthClip clip = generate_sequence(c);
  for (const auto& l : clip.labels) EXPECT_FALSE(l.visible());
  // Frames still differ: the distractor moves.
  EXPECT_NE(clip.frames.frames[0].data, clip.frames.frames[4].data);
}

TEST(Synth, GradientBackgroundVariesVertically) {
  SynthConfig c;
  c.background_mode = BackgroundMode::gradient;
  c.occlusion_prob = 1.0;
  c.n_frames = 1;
  const SynthClip clip = generate_sequence(c);
  const Frame& f = clip.frames.frames[0];
  EXPECT_NE(f.at(0, 0, 1), f.at(0, c.height - 1, 1));
  EXPECT_EQ(f.at(0, 5, 1), f.at(c.width - 1, 5, 1));
}

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.occlusion_prob = 1.5;
  EXPECT_THROW(generate_sequence(c), DataError);
  c = SynthConfig{};
  c.ball_radius = 0.5;
  EXPECT_THROW(generate_sequence(c), DataError);
  c = SynthConfig{};
  c.speed_min = 0.0;
  EXPECT_THROW(generate_sequence(c), DataError);
  EXPECT_THROW(parse_background_mode("stripes"), DataError);
  EXPECT_EQ(parse_background_mode("moving-distractor"), BackgroundMode::moving_distractor);
}

TEST(GtHeatmap, InvisibleIsZero) {
  BallLabel l;
  l.visibility = 0;
  for (double v : render_gt_heatmap(l, 16, 8).data) EXPECT_EQ(v, 0.0);
}

TEST(GtHeatmap, PeakAndOneSigma) {
  BallLabel l{1, 1, 10.0, 5.0};
  const auto h = render_gt_heatmap(l, 32, 16, 2.5);
  EXPECT_DOUBLE_EQ(h(10, 5), 1.0);
  // (12.5, 5) is not a pixel; render at a center offset by sigma instead.
  BallLabel off{1, 1, 7.5, 5.0};
  EXPECT_NEAR(render_gt_heatmap(off, 32, 16, 2.5)(10, 5), 0.606530659712633424, 1e-15);
}

TEST(GtHeatmap, DecreasesWithDistance) {
  BallLabel l{1, 1, 15.3, 7.8};
  const auto h = render_gt_heatmap(l, 32, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x)
      for (int y2 = 0; y2 < 16; ++y2) {
        const double d1 = std::hypot(x - l.x, y - l.y), d2 = std::hypot(x - l.x, y2 - l.y);
        if (d1 < d2 - 1e-9) EXPECT_GT(h(x, y), h(x, y2));
      }
}

TEST(GtHeatmap, OutOfBoundsRejected) {
  EXPECT_THROW(render_gt_heatmap({1, 1, 40.0, 3.0}, 32, 16), DataError);
  EXPECT_THROW(render_gt_heatmap({1, 1, 3.0, 3.0}, 32, 16, 0.0), DataError);
}

// Away from the border; clipped Gaussians near corners bias the centroid inward.
TEST(GtHeatmap, DecodeRecoversCenter) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    BallLabel l{i, 1, 3.0 + uniform01(rng) * 122.0, 3.0 + uniform01(rng) * 66.0};
    const Detection d = decode_heatmap(render_gt_heatmap(l, 128, 72), kDefaultThreshold, i);
    ASSERT_TRUE(d.present);
    EXPECT_LE(std::hypot(d.x - l.x, d.y - l.y), 1.0);
  }
}

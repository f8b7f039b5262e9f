// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "motrack/csv.hpp"
#include "motrack/dataset.hpp"
#include "motrack/run_config.hpp"
#include "motrack/serialize.hpp"
#include "test_util.hpp"

using namespace motrack;
namespace fs = std::filesystem;

namespace {

NetworkConfig tiny(FusionMode m = FusionMode::v1) {
  NetworkConfig c;
  c.input_width = 16;
  c.input_height = 16;
  c.base_channels = 2;
  c.fusion_mode = m;
  return c;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override { dir = test::temp_dir("io"); }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

}  // namespace

TEST(Serialize, RoundTripIsBitExact) {
  auto w = init_weights<float>(tiny(), 3);
  w.pn = PNParams{16.24f, 0.28f};
  const std::string a = serialize_weights(w);
  const auto back = deserialize_weights(a);
  EXPECT_EQ(serialize_weights(back), a);
  EXPECT_EQ(back.config, w.config);
  ASSERT_TRUE(back.pn.has_value());
  EXPECT_EQ(back.pn->slope, static_cast<double>(16.24f));
  for (std::size_t k = 0; k < w.blocks.size(); ++k) {
    EXPECT_EQ(back.blocks[k].name, w.blocks[k].name);
    EXPECT_EQ(back.blocks[k].value, w.blocks[k].value);
    EXPECT_EQ(back.blocks[k].trainable, w.blocks[k].trainable);
  }
}

TEST(Serialize, LayoutHeader) {
  const std::string s = serialize_weights(init_weights<float>(tiny(FusionMode::off), 1));
  EXPECT_EQ(s.substr(0, 5), "MTRK1");
  const std::uint32_t len = static_cast<unsigned char>(s[5]) | static_cast<unsigned char>(s[6]) << 8 |
                            static_cast<unsigned char>(s[7]) << 16 | static_cast<unsigned char>(s[8]) << 24;
  EXPECT_EQ(s.substr(9, len), tiny(FusionMode::off).echo());
}

TEST(Serialize, PnBlockOnlyWhenFused) {
  const std::string off = serialize_weights(init_weights<float>(tiny(FusionMode::off), 1));
  const std::string on = serialize_weights(init_weights<float>(tiny(FusionMode::v1), 1));
  EXPECT_EQ(off.find(kPnBlockName), std::string::npos);
  EXPECT_NE(on.find(kPnBlockName), std::string::npos);
}

TEST(Serialize, RejectsCorruptFiles) {
  const std::string s = serialize_weights(init_weights<float>(tiny(), 1));
  EXPECT_THROW_MSG(deserialize_weights("XXXXX" + s.substr(5)), DataError, "bad magic");
  EXPECT_THROW_MSG(deserialize_weights(s.substr(0, s.size() - 3)), DataError, "truncated");
  EXPECT_THROW_MSG(deserialize_weights(s + "x"), DataError, "trailing");
  std::string nan = s;
  // Last four bytes are the shift of the motion prompt block; overwrite a
  // kernel value instead: the first float after the first block header.
  const auto pos = nan.find("enc0.conv1.weight") + std::string("enc0.conv1.weight").size() + 4 + 16;
  nan[pos] = '\x00';
  nan[pos + 1] = '\x00';
  nan[pos + 2] = '\xc0';
  nan[pos + 3] = '\x7f';
  EXPECT_THROW_MSG(deserialize_weights(nan), DataError, "non-finite");
}

TEST_F(TempDir, SaveLoadSave) {
  const auto w = init_weights<float>(tiny(FusionMode::v2), 9);
  save_weights(dir / "a.mtrk", w);
  save_weights(dir / "b.mtrk", load_weights(dir / "a.mtrk"));
  EXPECT_EQ(test::read_text(dir / "a.mtrk"), test::read_text(dir / "b.mtrk"));
  EXPECT_FALSE(fs::exists(dir / "a.mtrk.tmp"));
  EXPECT_THROW_MSG(save_weights(dir / "missing" / "c.mtrk", w), DataError, "missing");
}

TEST_F(TempDir, LabelsRoundTrip) {
  std::vector<BallLabel> labels{{1, 1, 10.25, 3.5}, {2, 0, 0, 0}, {3, 1, 0.0, 71.999}};
  const std::string text = format_labels(labels);
  EXPECT_EQ(text, "frame,visibility,x,y\n1,1,10.250,3.500\n2,0,,\n3,1,0.000,71.999\n");
  test::write_text(dir / "labels.csv", text);
  const auto back = read_labels(dir / "labels.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].x, 10.25);
  EXPECT_FALSE(back[1].visible());
  EXPECT_EQ(back[2].y, 71.999);
}

TEST_F(TempDir, PredictionsRoundTrip) {
  Detection a;
  a.frame_index = 4;
  a.present = true;
  a.x = 1.5;
  a.y = 2.0;
  a.confidence = 0.75;
  Detection b;
  b.frame_index = 5;
  const std::string text = format_predictions({a, b});
  EXPECT_EQ(text, "frame,visibility,x,y,confidence\n4,1,1.500,2.000,0.750000\n5,0,,,\n");
  test::write_text(dir / "p.csv", text);
  const auto back = read_predictions(dir / "p.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[0].present);
  EXPECT_EQ(back[0].confidence, 0.75);
  EXPECT_FALSE(back[1].present);
}

TEST_F(TempDir, CsvErrors) {
  test::write_text(dir / "bad_header.csv", "frame,x\n1,2\n");
  EXPECT_THROW_MSG(read_labels(dir / "bad_header.csv"), DataError, "header");
  test::write_text(dir / "bad_row.csv", "frame,visibility,x,y\n1,1,2\n");
  EXPECT_THROW_MSG(read_labels(dir / "bad_row.csv"), DataError, ":2:");
  test::write_text(dir / "bad_vis.csv", "frame,visibility,x,y\n1,2,,\n");
  EXPECT_THROW(read_labels(dir / "bad_vis.csv"), DataError);
  test::write_text(dir / "bad_num.csv", "frame,visibility,x,y\n1,1,abc,3\n");
  EXPECT_THROW_MSG(read_labels(dir / "bad_num.csv"), DataError, "abc");
  EXPECT_THROW(read_labels(dir / "absent.csv"), DataError);
}

TEST_F(TempDir, ManifestRoundTrip) {
  SplitManifest m;
  m.entries = {{"game1", "c1", 10, Assignment::train}, {"game2", "c1", 5, Assignment::unassigned}};
  test::write_text(dir / "m.csv", format_manifest(m));
  const auto back = read_manifest(dir / "m.csv");
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[0].assignment, Assignment::train);
  EXPECT_EQ(back.entries[1].assignment, Assignment::unassigned);
  EXPECT_EQ(back.entries[1].frames, 5);
}

TEST(RunConfig, DefaultsEchoRoundTrip) {
  const RunConfig d;
  const RunConfig back = parse_run_config(d.echo());
  EXPECT_EQ(back.echo(), d.echo());
  RunConfig c = parse_run_config("base_channels = 4\nfusion_mode = v2\ncontrast = 0.3\nlr = 0.1\nseed = 9\n"
                                 "overlap_policy = pixel-max\npn_slope = 16.24\n# comment\n\n");
  EXPECT_EQ(c.net.base_channels, 4);
  EXPECT_EQ(c.net.fusion_mode, FusionMode::v2);
  EXPECT_EQ(c.synth.contrast, 0.3);
  EXPECT_EQ(c.overlap, OverlapPolicy::pixel_max);
  EXPECT_EQ(c.resolved_hyper().seed, 9u);
  EXPECT_EQ(c.resolved_synth().seed, 9u);
  EXPECT_EQ(parse_run_config(c.echo()).echo(), c.echo());
  EXPECT_NE(c.echo().find("contrast = 0.3\n"), std::string::npos);
}

TEST(RunConfig, RejectsUnknownAndInvalid) {
  EXPECT_THROW_MSG(parse_run_config("colour = red\n"), DataError, "unknown config key 'colour'");
  EXPECT_THROW_MSG(parse_run_config("epochs = many\n"), DataError, "epochs");
  EXPECT_THROW(parse_run_config("epochs = 2.5\n"), DataError);
  EXPECT_THROW(parse_run_config("input_width = 100\n"), DataError);
  EXPECT_THROW(parse_run_config("threshold = 1.5\n"), DataError);
  EXPECT_THROW(parse_run_config("fusion_mode = v3\n"), DataError);
  EXPECT_THROW(parse_run_config("no equals sign\n"), DataError);
}

TEST(RunConfig, SynthFollowsNetworkSize) {
  RunConfig c = parse_run_config("input_width = 64\ninput_height = 32\n");
  EXPECT_EQ(c.resolved_synth().width, 64);
  c = parse_run_config("synth_width = 256\nsynth_height = 144\n");
  EXPECT_EQ(c.resolved_synth().width, 256);
  EXPECT_EQ(c.resolved_synth().height, 144);
}

TEST_F(TempDir, ClipsLoadInNaturalOrder) {
  SynthConfig s;
  s.width = 16;
  s.height = 16;
  s.n_frames = 4;
  for (int k : {10, 2}) {
    s.seed = k;
    save_clip(dir / ("clip" + std::to_string(k)), generate_sequence(s));
  }
  const auto clips = load_clips(dir);
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_EQ(clips[0].name, "clip2");
  EXPECT_EQ(clips[1].name, "clip10");
  EXPECT_EQ(clips[0].labels.size(), 4u);
  const auto single = load_clips(dir / "clip2");
  ASSERT_EQ(single.size(), 1u);
  EXPECT_THROW(load_clips(dir / "nope"), DataError);
}

TEST_F(TempDir, SamplesResizeLabels) {
  SynthConfig s;
  s.width = 64;
  s.height = 64;
  s.n_frames = 6;
  const SynthClip g = generate_sequence(s);
  Clip c{"c", g.frames, g.labels};
  auto cfg = tiny();
  const auto samples = build_samples({c}, cfg, 2);
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[1].block.start_index, 2);
  EXPECT_EQ(samples[0].block.width(), 16);
  const BallLabel l = rescale_label(g.labels[0], 64, 64, 16, 16);
  const Detection d = decode_heatmap(samples[0].target[0]);
  EXPECT_LE(std::hypot(d.x - l.x, d.y - l.y), 1.0);
  EXPECT_NEAR(l.x, (g.labels[0].x + 0.5) / 4.0 - 0.5, 1e-12);
}

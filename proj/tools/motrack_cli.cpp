// SPDX-License-Identifier: Apache-2.0
//
// motrack command-line entry point.
//
// Exit codes: 0 ok, 2 usage, 3 data/I-O, 4 numerical abort.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motrack/motrack.hpp"

namespace fs = std::filesystem;
using namespace motrack;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

constexpr const char* kModelFile = "model.mtrk";
constexpr const char* kLossFile = "loss.csv";
constexpr const char* kPredictionsFile = "predictions.csv";
constexpr const char* kConfigEcho = "config.resolved";

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve(const Globals& g) {
  RunConfig rc;
  if (!g.config.empty()) rc = parse_run_config(read_file(g.config));
  if (g.seed) rc.seed = *g.seed;
  rc.validate();
  return rc;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw CLI::RequiredError("--out");
  const fs::path p(g.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw DataError("cannot create output directory: " + p.string());
  return p;
}

void echo_config(const fs::path& out, const RunConfig& rc) { write_file_atomic(out / kConfigEcho, rc.echo()); }

std::string clip_dir_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip%02d", k + 1);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g) {
  const RunConfig rc = resolve(g);
  const fs::path out = require_out(g);
  long frames = 0, visible = 0;
  for (int k = 0; k < rc.clips; ++k) {
    SynthConfig sc = rc.resolved_synth();
    sc.seed = rc.seed + static_cast<std::uint64_t>(k);
    const SynthClip clip = generate_sequence(sc);
    save_clip(rc.clips == 1 ? out : out / clip_dir_name(k), clip);
    frames += static_cast<long>(clip.labels.size());
    for (const auto& l : clip.labels) visible += l.visibility;
  }
  echo_config(out, rc);
  std::cout << "clips " << rc.clips << "\nframes " << frames << "\nvisible " << visible << "\noccluded "
            << frames - visible << "\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& data, const std::string& init) {
  RunConfig rc = resolve(g);
  const fs::path out = require_out(g);
  std::optional<ModelWeights<float>> init_w;
  if (!init.empty()) {
    init_w = load_weights(init);
    // Architecture comes from the pretrained file; the run config picks the fusion mode.
    const FusionMode mode = rc.net.fusion_mode;
    rc.net = init_w->config;
    rc.net.fusion_mode = mode;
  }
  const auto clips = load_clips(data);
  const auto samples = build_samples(clips, rc.net, rc.train_stride, rc.sigma_g);
  std::cerr << "training on " << samples.size() << " blocks from " << clips.size() << " clip(s)\n";
  std::string log = "epoch,loss\n";
  auto progress = [&](int epoch, double loss, const ModelWeights<float>& w) {
    char line[96];
    std::snprintf(line, sizeof(line), "%d,%.9g\n", epoch + 1, loss);
    log += line;
    std::cerr << "epoch " << epoch + 1 << " loss " << loss;
    if (w.pn) std::cerr << " slope " << w.pn->slope << " shift " << w.pn->shift;
    std::cerr << "\n";
  };
  const auto result = train<float>(samples, rc.net, rc.resolved_hyper(), init_w ? &*init_w : nullptr, progress);
  save_weights(out / kModelFile, result.weights);
  write_file_atomic(out / kLossFile, log);
  echo_config(out, rc);
  std::cout << "model " << (out / kModelFile).string() << "\n";
  return 0;
}

int cmd_track(const Globals& g, const std::string& model, const std::string& frames,
              std::optional<double> threshold, const std::string& overlap, bool resize) {
  RunConfig rc = resolve(g);
  if (threshold) rc.threshold = *threshold;
  if (!overlap.empty()) rc.overlap = parse_overlap_policy(overlap);
  rc.validate();
  const fs::path out = require_out(g);
  const ModelWeights<float> w = load_weights(model);
  rc.net = w.config;
  TrackOptions opt;
  opt.threshold = rc.threshold;
  opt.overlap = rc.overlap;
  opt.resize = resize;
  const TrackResult r = track_sequence(load_sequence(frames), w, opt);
  write_file_atomic(out / kPredictionsFile, format_predictions(r.detections));
  echo_config(out, rc);
  long present = 0;
  for (const auto& d : r.detections) present += d.present ? 1 : 0;
  std::cout << "frames " << r.detections.size() << "\ndetections " << present << "\n";
  return 0;
}

std::string json_number(const std::optional<double>& v) {
  if (!v) return "null";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

int cmd_eval(const Globals& g, const std::string& pred_path, const std::string& labels_path,
             std::optional<double> tol) {
  RunConfig rc = resolve(g);
  if (tol) rc.tolerance = *tol;
  rc.validate();
  const auto preds = read_predictions(pred_path);
  const auto labels = read_labels(labels_path);
  std::map<int, const Detection*> by_frame;
  for (const auto& d : preds) by_frame[d.frame_index] = &d;
  std::vector<Outcome> outcomes;
  std::vector<int> missing;
  for (const auto& l : labels) {
    const auto it = by_frame.find(l.frame_index);
    if (it == by_frame.end()) missing.push_back(l.frame_index);
    else outcomes.push_back(classify_frame(*it->second, l, rc.tolerance));
  }
  if (outcomes.empty()) throw DataError("predictions and labels share no frames");
  if (!missing.empty()) {
    std::string list;
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) list += (k ? "," : "") + std::to_string(missing[k]);
    if (missing.size() > 20) list += ",...";
    throw DataError(std::to_string(missing.size()) + " labeled frame(s) missing from predictions: " + list);
  }
  const ConfusionCounts c = aggregate(outcomes);
  const MetricsReport m = metrics(c);
  std::cout << "TP " << c.tp << "\nTN " << c.tn << "\nFP1 " << c.fp1 << "\nFP2 " << c.fp2 << "\nFN " << c.fn
            << "\nTotal " << c.total << "\nAcc " << format1(m.accuracy) << "\nPrec " << format1(m.precision)
            << "\nRec " << format1(m.recall) << "\nF1 " << format1(m.f1) << "\n";
  if (!g.out.empty()) {
    const fs::path out = require_out(g);
    std::string json = "{\n";
    json += "  \"tp\": " + std::to_string(c.tp) + ",\n  \"tn\": " + std::to_string(c.tn) +
            ",\n  \"fp1\": " + std::to_string(c.fp1) + ",\n  \"fp2\": " + std::to_string(c.fp2) +
            ",\n  \"fn\": " + std::to_string(c.fn) + ",\n  \"total\": " + std::to_string(c.total) + ",\n";
    json += "  \"accuracy\": " + json_number(m.accuracy) + ",\n  \"precision\": " + json_number(m.precision) +
            ",\n  \"recall\": " + json_number(m.recall) + ",\n  \"f1\": " + json_number(m.f1) + "\n}\n";
    write_file_atomic(out / "metrics.json", json);
    echo_config(out, rc);
  }
  return 0;
}

int cmd_visualize(const Globals& g, const std::string& model, const std::string& frames_dir,
                  const std::string& mode_name, bool resize) {
  const RunConfig rc = resolve(g);
  const VisualMode mode = parse_visual_mode(mode_name);
  const fs::path out = require_out(g);
  std::optional<ModelWeights<float>> w;
  if (!model.empty()) w = load_weights(model);
  if (!w && (mode == VisualMode::heatmap || mode == VisualMode::trajectory))
    throw CLI::RequiredError("--model (required for " + mode_name + " mode)");
  const FrameSequence seq = load_sequence(frames_dir);

  if (mode == VisualMode::attention || mode == VisualMode::prompted) {
    PNParams pn = kVisualizationPN;
    if (w && w->pn) pn = *w->pn;
    if (rc.pn_slope) pn.slope = *rc.pn_slope;
    if (rc.pn_shift) pn.shift = *rc.pn_shift;
    require(seq.size() >= 2, "attention needs at least two frames");
    TemporalBlock all = make_blocks(seq, static_cast<int>(seq.size()), 1).front();
    const auto attn = block_attention<double>(all, pn);
    for (std::size_t t = 0; t < attn.size(); ++t) {
      const Frame img = mode == VisualMode::attention ? attention_image(attn[t]) : prompted_image(attn[t], seq.frames[t + 1]);
      save_png(out / frame_filename(seq.frame_indices[t + 1]), img);
    }
    std::cout << "wrote " << attn.size() << " images\n";
  } else {
    TrackOptions opt;
    opt.threshold = rc.threshold;
    opt.overlap = rc.overlap;
    opt.resize = resize;
    const TrackResult r = track_sequence(seq, *w, opt);
    if (mode == VisualMode::heatmap) {
      const FrameSequence net = resize_sequence(seq, w->config.input_width, w->config.input_height);
      for (std::size_t f = 0; f < seq.size(); ++f)
        save_png(out / frame_filename(seq.frame_indices[f]), heatmap_overlay(r.heatmaps[f], net.frames[f]));
      std::cout << "wrote " << seq.size() << " images\n";
    } else {
      save_png(out / "trajectory.png", trajectory_overlay(r.detections, seq.frames.back()));
      write_file_atomic(out / kPredictionsFile, format_predictions(r.detections));
      std::cout << "wrote trajectory.png\n";
    }
  }
  echo_config(out, rc);
  return 0;
}

int cmd_bench(const Globals& g, const std::string& model, const std::string& frames_dir, bool resize) {
  const RunConfig rc = resolve(g);
  const ModelWeights<float> w = load_weights(model);
  TrackOptions opt;
  opt.threshold = rc.threshold;
  opt.overlap = rc.overlap;
  opt.resize = resize;
  std::string csv;
  const std::size_t n = load_sequence(frames_dir).size();
  auto run = [&] {
    const FrameSequence seq = load_sequence(frames_dir);
    const TrackResult r = track_sequence(seq, w, opt);
    csv = format_predictions(r.detections);
    return r.model_seconds;
  };
  const FpsReport rep = measure_fps(run, n);
  char line[160];
  std::snprintf(line, sizeof(line), "frames %zu\nmodel_fps %.2f\nend_to_end_fps %.2f\n", rep.frames,
                rep.model_fps(), rep.end_to_end_fps());
  std::cout << line;
  if (!g.out.empty()) {
    const fs::path out = require_out(g);
    write_file_atomic(out / kPredictionsFile, csv);
    write_file_atomic(out / "bench.txt", line);
    echo_config(out, rc);
  }
  return 0;
}

int cmd_simcheck(const std::string& a_path, const std::string& b_path) {
  const auto a = load_weights(a_path);
  const auto b = load_weights(b_path);
  for (const auto& s : weights_cosine_similarity(a, b)) {
    std::cout << s.name << " ";
    if (s.cosine) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", *s.cosine);
      std::cout << buf << "\n";
    } else {
      std::cout << "undefined\n";
    }
  }
  return 0;
}

int cmd_split(const Globals& g, const std::string& manifest, const std::string& protocol, double fraction,
              const std::vector<std::string>& games) {
  const SplitManifest m = read_manifest(manifest);
  SplitResult r;
  if (protocol == "game") r = games.empty() ? split_game_level(m) : split_game_level(m, games);
  else if (protocol == "clip") r = split_clip_level(m, fraction);
  else throw CLI::ValidationError("--protocol", "expected game or clip");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * r.train_fraction);
  std::cout << "train_fraction " << buf << "%\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  if (!g.out.empty()) {
    const fs::path out = require_out(g);
    write_file_atomic(out / "split.csv", format_manifest(r.manifest));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion-attention heatmap tracker"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "key = value run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "overrides the configured seed");
  app.add_option("--out", g.out, "output directory");

  std::string data, init, model, frames, mode = "attention", overlap, pred, labels, model_b, manifest,
                                        protocol = "game";
  std::optional<double> threshold, tol;
  double fraction = 0.70;
  std::vector<std::string> games;
  bool resize = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* trn = app.add_subcommand("train", "train a model");
  trn->add_option("--data", data, "clip dir or dir of clip dirs")->required();
  trn->add_option("--init", init, "pretrained model to fine-tune");
  auto* trk = app.add_subcommand("track", "write per-frame predictions");
  trk->add_option("--model", model)->required();
  trk->add_option("--frames", frames)->required();
  trk->add_option("--threshold", threshold);
  trk->add_option("--overlap", overlap, "last-slot or pixel-max");
  trk->add_flag("--resize", resize, "resample frames to the model resolution");
  auto* ev = app.add_subcommand("eval", "score predictions against labels");
  ev->add_option("--pred", pred)->required();
  ev->add_option("--labels", labels)->required();
  ev->add_option("--tol", tol, "TP distance tolerance in pixels");
  auto* vis = app.add_subcommand("visualize", "render attention, prompted, heatmap or trajectory images");
  vis->add_option("--model", model);
  vis->add_option("--frames", frames)->required();
  vis->add_option("--mode", mode)->check(CLI::IsMember({"attention", "prompted", "heatmap", "trajectory"}));
  vis->add_flag("--resize", resize);
  auto* bench = app.add_subcommand("bench", "model-only and end-to-end FPS");
  bench->add_option("--model", model)->required();
  bench->add_option("--frames", frames)->required();
  bench->add_flag("--resize", resize);
  auto* sim = app.add_subcommand("simcheck", "per-layer cosine similarity of two models");
  sim->add_option("a", model, "first model")->required();
  sim->add_option("b", model_b, "second model")->required();
  auto* split = app.add_subcommand("split", "train/test split of a clip manifest");
  split->add_option("--manifest", manifest)->required();
  split->add_option("--protocol", protocol)->check(CLI::IsMember({"game", "clip"}));
  split->add_option("--fraction", fraction)->check(CLI::Range(0.0, 1.0));
  split->add_option("--train-games", games);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(g);
    if (trn->parsed()) return cmd_train(g, data, init);
    if (trk->parsed()) return cmd_track(g, model, frames, threshold, overlap, resize);
    if (ev->parsed()) return cmd_eval(g, pred, labels, tol);
    if (vis->parsed()) return cmd_visualize(g, model, frames, mode, resize);
    if (bench->parsed()) return cmd_bench(g, model, frames, resize);
    if (sim->parsed()) return cmd_simcheck(model, model_b);
    if (split->parsed()) return cmd_split(g, manifest, protocol, fraction, games);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

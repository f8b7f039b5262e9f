// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "motrack/model_weights.hpp"
#include "motrack/synthgen.hpp"
#include "motrack/tensor.hpp"

namespace motrack {

struct Detection {
  int frame_index = 0;
  bool present = false;
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
};

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr double kDefaultTolerance = 4.0;

/// Peak test plus intensity-weighted centroid of the 4-connected component of
/// pixels >= threshold that contains the argmax.
template <typename T>
Detection decode_heatmap(const Map2D<T>& h, double threshold = kDefaultThreshold,
                         int frame_index = 0) {
  Detection det;
  det.frame_index = frame_index;
  if (h.size() == 0) return det;
  const auto peak_it = std::max_element(h.data.begin(), h.data.end());
  const double peak = static_cast<double>(*peak_it);
  if (peak < threshold) return det;

  const int w = h.width, ht = h.height;
  std::vector<char> seen(h.size(), 0);
  std::vector<int> stack{static_cast<int>(peak_it - h.data.begin())};
  seen[stack.back()] = 1;
  double sw = 0.0, sx = 0.0, sy = 0.0;
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    const int x = p % w, y = p / w;
    const double v = static_cast<double>(h.data[p]);
    sw += v;
    sx += v * x;
    sy += v * y;
    const std::array<std::pair<int, int>, 4> nb{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
    for (auto [nx, ny] : nb) {
      if (nx < 0 || ny < 0 || nx >= w || ny >= ht) continue;
      const int q = ny * w + nx;
      if (seen[q] || static_cast<double>(h.data[q]) < threshold) continue;
      seen[q] = 1;
      stack.push_back(q);
    }
  }
  det.present = true;
  det.x = sx / sw;
  det.y = sy / sw;
  det.confidence = peak;
  return det;
}

enum class Outcome { tp, tn, fp1, fp2, fn };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::tp: return "TP";
    case Outcome::tn: return "TN";
    case Outcome::fp1: return "FP1";
    case Outcome::fp2: return "FP2";
    case Outcome::fn: return "FN";
  }
  return "?";
}

/// TP: visible, detected within tol. FP1: visible, detected beyond tol.
/// FP2: not visible but detected. FN: visible, missed. TN: neither.
inline Outcome classify_frame(const Detection& det, const BallLabel& label,
                              double tol = kDefaultTolerance) {
  require(det.frame_index == label.frame_index,
          "classify_frame: detection frame " + std::to_string(det.frame_index) +
              " does not match label frame " + std::to_string(label.frame_index));
  if (label.visible()) {
    if (!det.present) return Outcome::fn;
    return std::hypot(det.x - label.x, det.y - label.y) <= tol ? Outcome::tp : Outcome::fp1;
  }
  return det.present ? Outcome::fp2 : Outcome::tn;
}

struct ConfusionCounts {
  long tp = 0, tn = 0, fp1 = 0, fp2 = 0, fn = 0;
  long total = 0;

  bool closed() const { return tp + tn + fp1 + fp2 + fn == total; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts aggregate(std::span<const Outcome> outcomes) {
  require(!outcomes.empty(), "aggregate: empty outcome list");
  ConfusionCounts c;
  for (Outcome o : outcomes) {
    switch (o) {
      case Outcome::tp: ++c.tp; break;
      case Outcome::tn: ++c.tn; break;
      case Outcome::fp1: ++c.fp1; break;
      case Outcome::fp2: ++c.fp2; break;
      case Outcome::fn: ++c.fn; break;
    }
  }
  c.total = static_cast<long>(outcomes.size());
  return c;
}

/// Percentages; nullopt marks a zero denominator.
struct MetricsReport {
  std::optional<double> accuracy, precision, recall, f1;
};

inline MetricsReport metrics(const ConfusionCounts& c) {
  require(c.total > 0, "metrics: total must be positive");
  MetricsReport r;
  r.accuracy = 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total);
  if (const long d = c.tp + c.fp1 + c.fp2; d > 0) r.precision = 100.0 * c.tp / static_cast<double>(d);
  if (const long d = c.tp + c.fn; d > 0) r.recall = 100.0 * c.tp / static_cast<double>(d);
  if (r.precision && r.recall && *r.precision + *r.recall > 0.0)
    r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
  return r;
}

/// Half-up rounding to one decimal.
inline double round1(double v) { return std::floor(v * 10.0 + 0.5) / 10.0; }

inline std::string format1(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", round1(*v));
  return buf;
}

// ---------------------------------------------------------------------------
// Split protocols

enum class Assignment { unassigned, train, test };

inline std::string to_string(Assignment a) {
  switch (a) {
    case Assignment::train: return "train";
    case Assignment::test: return "test";
    case Assignment::unassigned: return "";
  }
  return "";
}

struct ClipEntry {
  std::string game;
  std::string clip;
  long frames = 0;
  Assignment assignment = Assignment::unassigned;
};

struct SplitManifest {
  std::vector<ClipEntry> entries;

  long total_frames() const {
    long n = 0;
    for (const auto& e : entries) n += e.frames;
    return n;
  }
  long frames_in(Assignment a) const {
    long n = 0;
    for (const auto& e : entries)
      if (e.assignment == a) n += e.frames;
    return n;
  }
  double train_fraction() const {
    const long t = total_frames();
    return t > 0 ? static_cast<double>(frames_in(Assignment::train)) / static_cast<double>(t) : 0.0;
  }
};

struct SplitResult {
  SplitManifest manifest;
  double train_fraction = 0.0;
  std::vector<std::string> warnings;
};

/// Game ids used for training in the tennis game-level protocol.
inline const std::vector<std::string>& tennis_game_level_train_games() {
  static const std::vector<std::string> games{"game5", "game10", "game6", "game2",
                                              "game7", "game3",  "game8"};
  return games;
}

/// Orders "game2" before "game10".
inline bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      const std::string na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      const auto sa = na.find_first_not_of('0'), sb = nb.find_first_not_of('0');
      const std::string ta = sa == std::string::npos ? "" : na.substr(sa);
      const std::string tb = sb == std::string::npos ? "" : nb.substr(sb);
      if (ta.size() != tb.size()) return ta.size() < tb.size();
      if (ta != tb) return ta < tb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

namespace detail {
inline void add_empty_side_warnings(SplitResult& r) {
  if (r.manifest.frames_in(Assignment::test) == 0) r.warnings.push_back("test split is empty");
  if (r.manifest.frames_in(Assignment::train) == 0) r.warnings.push_back("train split is empty");
}
}  // namespace detail

/// Whole games go to train when listed, otherwise to test.
inline SplitResult split_game_level(const SplitManifest& manifest,
                                    const std::vector<std::string>& train_games =
                                        tennis_game_level_train_games()) {
  require(!manifest.entries.empty(), "split_game_level: empty manifest");
  for (const auto& g : train_games) {
    const bool known = std::any_of(manifest.entries.begin(), manifest.entries.end(),
                                   [&](const ClipEntry& e) { return e.game == g; });
    require(known, "split_game_level: unknown game id '" + g + "'");
  }
  SplitResult r;
  r.manifest = manifest;
  for (auto& e : r.manifest.entries) {
    const bool train = std::find(train_games.begin(), train_games.end(), e.game) != train_games.end();
    e.assignment = train ? Assignment::train : Assignment::test;
  }
  r.train_fraction = r.manifest.train_fraction();
  detail::add_empty_side_warnings(r);
  return r;
}

/// Greedy cumulative split in (game, clip) order: clips go to train until the
/// cumulative frame count first reaches train_fraction of the total.
inline SplitResult split_clip_level(const SplitManifest& manifest, double train_fraction = 0.70) {
  require(!manifest.entries.empty(), "split_clip_level: empty manifest");
  require(train_fraction >= 0.0 && train_fraction <= 1.0, "split_clip_level: fraction must be in [0,1]");
  for (const auto& e : manifest.entries)
    require(e.frames > 0, "split_clip_level: clip " + e.game + "/" + e.clip + " has no frames");
  SplitResult r;
  r.manifest = manifest;
  auto& es = r.manifest.entries;
  std::stable_sort(es.begin(), es.end(), [](const ClipEntry& a, const ClipEntry& b) {
    if (a.game != b.game) return natural_less(a.game, b.game);
    return natural_less(a.clip, b.clip);
  });
  const double target = train_fraction * static_cast<double>(r.manifest.total_frames());
  long cumulative = 0;
  bool reached = false;
  for (auto& e : es) {
    if (!reached && (train_fraction > 0.0)) {
      e.assignment = Assignment::train;
      cumulative += e.frames;
      reached = static_cast<double>(cumulative) >= target;
      if (train_fraction >= 1.0) reached = false;
    } else {
      e.assignment = Assignment::test;
    }
  }
  r.train_fraction = r.manifest.train_fraction();
  detail::add_empty_side_warnings(r);
  return r;
}

// ---------------------------------------------------------------------------
// Throughput

struct FpsReport {
  std::size_t frames = 0;
  double model_seconds = 0.0;
  double total_seconds = 0.0;

  double model_fps() const { return model_seconds > 0 ? frames / model_seconds : 0.0; }
  double end_to_end_fps() const { return total_seconds > 0 ? frames / total_seconds : 0.0; }
};

inline double fps(std::size_t frames, double seconds) {
  require(seconds > 0.0, "fps: elapsed time must be positive");
  return static_cast<double>(frames) / seconds;
}

/// `run` performs one full pass (I/O included) and returns the seconds spent
/// inside the model. One warm-up pass is discarded.
template <typename Run>
FpsReport measure_fps(Run&& run, std::size_t frames) {
  require(frames > 0, "measure_fps: no frames");
  (void)run();
  const auto t0 = std::chrono::steady_clock::now();
  const double model = run();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {frames, model, std::max(total, model)};
}

// ---------------------------------------------------------------------------
// Weight similarity

struct LayerSimilarity {
  std::string name;
  std::optional<double> cosine;  // nullopt when a vector is zero and the two differ
};

namespace detail {
template <typename T>
std::optional<double> cosine(std::span<const T> a, std::span<const T> b) {
  if (std::equal(a.begin(), a.end(), b.begin())) return 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += static_cast<double>(a[k]) * b[k];
    na += static_cast<double>(a[k]) * a[k];
    nb += static_cast<double>(b[k]) * b[k];
  }
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}
}  // namespace detail

/// Cosine of flattened trainable blocks; normalization running statistics are
/// skipped. The motion prompt pair is compared when both models carry it.
template <typename T>
std::vector<LayerSimilarity> weights_cosine_similarity(const ModelWeights<T>& a, const ModelWeights<T>& b) {
  std::vector<LayerSimilarity> out;
  for (const auto& ba : a.blocks) {
    if (!ba.trainable) continue;
    require(b.has(ba.name), "weights_cosine_similarity: second model lacks block '" + ba.name + "'");
    const auto& bb = b.block(ba.name);
    require(ba.dims == bb.dims, "weights_cosine_similarity: shape mismatch for '" + ba.name + "'");
    out.push_back({ba.name, detail::cosine<T>(ba.value, bb.value)});
  }
  for (const auto& bb : b.blocks)
    require(!bb.trainable || a.has(bb.name),
            "weights_cosine_similarity: first model lacks block '" + bb.name + "'");
  if (a.pn && b.pn) {
    const std::array<double, 2> pa{a.pn->slope, a.pn->shift}, pb{b.pn->slope, b.pn->shift};
    out.push_back({"motion_prompt.pn", detail::cosine<double>(pa, pb)});
  }
  return out;
}

}  // namespace motrack

// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` run configuration shared by every CLI command. Unknown
// keys are rejected; echo() writes the fully resolved set back out.
#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include "motrack/network_config.hpp"
#include "motrack/synthgen.hpp"
#include "motrack/track.hpp"
#include "motrack/train.hpp"

namespace motrack {

/// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

struct RunConfig {
  NetworkConfig net;
  SynthConfig synth;  // width/height follow net unless synth_width/synth_height are set
  int synth_width = 0;
  int synth_height = 0;
  int clips = 1;
  TrainHyper hyper;
  int train_stride = 1;
  double sigma_g = kDefaultHeatmapSigma;
  double threshold = kDefaultThreshold;
  double tolerance = kDefaultTolerance;
  OverlapPolicy overlap = OverlapPolicy::last_slot;
  std::uint64_t seed = 1;
  std::optional<double> pn_slope, pn_shift;  // visualization without a model

  /// Synth config with resolved size and seed.
  SynthConfig resolved_synth() const {
    SynthConfig s = synth;
    s.width = synth_width > 0 ? synth_width : net.input_width;
    s.height = synth_height > 0 ? synth_height : net.input_height;
    s.seed = seed;
    return s;
  }

  TrainHyper resolved_hyper() const {
    TrainHyper h = hyper;
    h.seed = seed;
    return h;
  }

  void validate() const {
    net.validate();
    resolved_synth().validate();
    require(clips >= 1, "clips must be >= 1");
    require(hyper.lr > 0.0 && hyper.lr_decay > 0.0, "lr and lr_decay must be positive");
    require(hyper.epochs >= 0 && hyper.batch >= 1, "epochs must be >= 0 and batch >= 1");
    require(train_stride >= 1, "train_stride must be >= 1");
    require(sigma_g > 0.0, "sigma_g must be positive");
    require(threshold > 0.0 && threshold < 1.0, "threshold must be in (0,1)");
    require(tolerance >= 0.0, "tolerance must be >= 0");
    require(!pn_slope || *pn_slope > 0.0, "pn_slope must be positive");
  }

  std::string echo() const {
    std::ostringstream os;
    os << net.echo() << "synth_width = " << synth_width << "\n"
       << "synth_height = " << synth_height << "\n"
       << "n_frames = " << synth.n_frames << "\n"
       << "ball_radius = " << shortest(synth.ball_radius) << "\n"
       << "speed_min = " << shortest(synth.speed_min) << "\n"
       << "speed_max = " << shortest(synth.speed_max) << "\n"
       << "contrast = " << shortest(synth.contrast) << "\n"
       << "occlusion_prob = " << shortest(synth.occlusion_prob) << "\n"
       << "occlusion_burst_mean = " << shortest(synth.occlusion_burst_mean) << "\n"
       << "noise_sigma = " << shortest(synth.noise_sigma) << "\n"
       << "background_mode = " << to_string(synth.background_mode) << "\n"
       << "clips = " << clips << "\n"
       << "optimizer = " << to_string(hyper.optimizer) << "\n"
       << "lr = " << shortest(hyper.lr) << "\n"
       << "lr_decay = " << shortest(hyper.lr_decay) << "\n"
       << "epochs = " << hyper.epochs << "\n"
       << "batch = " << hyper.batch << "\n"
       << "train_stride = " << train_stride << "\n"
       << "sigma_g = " << shortest(sigma_g) << "\n"
       << "threshold = " << shortest(threshold) << "\n"
       << "tolerance = " << shortest(tolerance) << "\n"
       << "overlap_policy = " << to_string(overlap) << "\n"
       << "seed = " << seed << "\n";
    if (pn_slope) os << "pn_slope = " << shortest(*pn_slope) << "\n";
    if (pn_shift) os << "pn_shift = " << shortest(*pn_shift) << "\n";
    return os.str();
  }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw DataError("invalid number for '" + key + "': '" + v + "'");
  return d;
}

inline long long to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != static_cast<double>(static_cast<long long>(d)))
    throw DataError("invalid integer for '" + key + "': '" + v + "'");
  return static_cast<long long>(d);
}

}  // namespace detail

inline void apply_run_key(RunConfig& c, const std::string& key, const std::string& v) {
  using detail::to_double;
  using detail::to_int;
  auto i = [&] { return static_cast<int>(to_int(key, v)); };
  auto d = [&] { return to_double(key, v); };
  if (key == "t_prime" || key == "input_width" || key == "input_height" || key == "base_channels" ||
      key == "levels") {
    apply_network_key(c.net, key, std::to_string(i()));
  } else if (key == "skip_connections" || key == "fusion_mode") {
    apply_network_key(c.net, key, v);
  } else if (key == "synth_width") c.synth_width = i();
  else if (key == "synth_height") c.synth_height = i();
  else if (key == "n_frames") c.synth.n_frames = i();
  else if (key == "ball_radius") c.synth.ball_radius = d();
  else if (key == "speed_min") c.synth.speed_min = d();
  else if (key == "speed_max") c.synth.speed_max = d();
  else if (key == "contrast") c.synth.contrast = d();
  else if (key == "occlusion_prob") c.synth.occlusion_prob = d();
  else if (key == "occlusion_burst_mean") c.synth.occlusion_burst_mean = d();
  else if (key == "noise_sigma") c.synth.noise_sigma = d();
  else if (key == "background_mode") c.synth.background_mode = parse_background_mode(v);
  else if (key == "clips") c.clips = i();
  else if (key == "optimizer") c.hyper.optimizer = parse_optimizer(v);
  else if (key == "lr") c.hyper.lr = d();
  else if (key == "lr_decay") c.hyper.lr_decay = d();
  else if (key == "epochs") c.hyper.epochs = i();
  else if (key == "batch") c.hyper.batch = i();
  else if (key == "train_stride") c.train_stride = i();
  else if (key == "sigma_g") c.sigma_g = d();
  else if (key == "threshold") c.threshold = d();
  else if (key == "tolerance") c.tolerance = d();
  else if (key == "overlap_policy") c.overlap = parse_overlap_policy(v);
  else if (key == "seed") {
    const long long s = to_int(key, v);
    require(s >= 0, "seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "pn_slope") c.pn_slope = d();
  else if (key == "pn_shift") c.pn_shift = d();
  else throw DataError("unknown config key '" + key + "'");
}

/// Applies `text` on top of `base`. Lines are `key = value`; `#` starts a comment line.
inline RunConfig parse_run_config(const std::string& text, RunConfig base = {}) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_run_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

}  // namespace motrack

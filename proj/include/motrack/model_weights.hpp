// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "motrack/motion_prompt.hpp"
#include "motrack/network_config.hpp"

namespace motrack {

inline constexpr const char* kModelVersion = "MTRK1";

/// Portable uniform double in [0,1) from a 64-bit engine.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Portable standard normal (Box-Muller).
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename T>
struct ParamBlock {
  std::string name;
  std::vector<int> dims;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  bool trainable = true;

  std::size_t numel() const { return value.size(); }
};

/// Named parameter blocks of the backbone plus the motion prompt parameters.
template <typename T>
struct ModelWeights {
  std::string version = kModelVersion;
  NetworkConfig config;
  std::vector<ParamBlock<T>> blocks;
  std::optional<PNParams> pn;  // present iff config.fusion_mode != off

  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("model has no parameter block '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  ParamBlock<T>& block(const std::string& name) { return blocks[index_of(name)]; }
  const ParamBlock<T>& block(const std::string& name) const { return blocks[index_of(name)]; }

  int add(std::string name, std::vector<int> dims, bool trainable, T fill = T(0)) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    ParamBlock<T> b;
    b.name = std::move(name);
    b.dims = std::move(dims);
    b.value.assign(n, fill);
    b.grad.assign(trainable ? n : 0, T(0));
    b.trainable = trainable;
    index_[b.name] = static_cast<int>(blocks.size());
    blocks.push_back(std::move(b));
    return static_cast<int>(blocks.size()) - 1;
  }

  void zero_grad() {
    for (auto& b : blocks) std::fill(b.grad.begin(), b.grad.end(), T(0));
  }

  void reindex() {
    index_.clear();
    for (std::size_t k = 0; k < blocks.size(); ++k) index_[blocks[k].name] = static_cast<int>(k);
  }

  template <typename U>
  ModelWeights<U> cast() const {
    ModelWeights<U> out;
    out.version = version;
    out.config = config;
    out.pn = pn;
    for (const auto& b : blocks) {
      const int k = out.add(b.name, b.dims, b.trainable);
      for (std::size_t i = 0; i < b.value.size(); ++i)
        out.blocks[k].value[i] = static_cast<U>(b.value[i]);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, int> index_;
};

/// Names of the 3x3 conv + batch-norm + ReLU units in execution order.
inline std::vector<std::string> conv_unit_names(const NetworkConfig& cfg) {
  std::vector<std::string> names;
  for (int l = 0; l < cfg.levels; ++l)
    for (int k = 1; k <= 2; ++k) names.push_back("enc" + std::to_string(l) + ".conv" + std::to_string(k));
  for (int k = 1; k <= 2; ++k) names.push_back("mid.conv" + std::to_string(k));
  for (int l = cfg.levels - 1; l >= 0; --l)
    for (int k = 1; k <= 2; ++k) names.push_back("dec" + std::to_string(l) + ".conv" + std::to_string(k));
  return names;
}

struct ConvUnitShape {
  std::string name;
  int cin;
  int cout;
};

inline std::vector<ConvUnitShape> conv_unit_shapes(const NetworkConfig& cfg) {
  std::vector<ConvUnitShape> out;
  int ch = cfg.input_channels();
  for (int l = 0; l < cfg.levels; ++l) {
    const int c = cfg.channels_at(l);
    out.push_back({"enc" + std::to_string(l) + ".conv1", ch, c});
    out.push_back({"enc" + std::to_string(l) + ".conv2", c, c});
    ch = c;
  }
  const int cm = cfg.channels_at(cfg.levels);
  out.push_back({"mid.conv1", ch, cm});
  out.push_back({"mid.conv2", cm, cm});
  ch = cm;
  for (int l = cfg.levels - 1; l >= 0; --l) {
    const int c = cfg.channels_at(l);
    const int cin = ch + (cfg.skip_connections ? c : 0);
    out.push_back({"dec" + std::to_string(l) + ".conv1", cin, c});
    out.push_back({"dec" + std::to_string(l) + ".conv2", c, c});
    ch = c;
  }
  return out;
}

/// Allocates every block with the shapes implied by cfg (values zeroed).
template <typename T>
ModelWeights<T> allocate_weights(const NetworkConfig& cfg) {
  cfg.validate();
  ModelWeights<T> w;
  w.config = cfg;
  for (const auto& u : conv_unit_shapes(cfg)) {
    w.add(u.name + ".weight", {u.cout, u.cin, 3, 3}, true);
    w.add(u.name + ".bn.gamma", {u.cout}, true, T(1));
    w.add(u.name + ".bn.beta", {u.cout}, true);
    w.add(u.name + ".bn.running_mean", {u.cout}, false);
    w.add(u.name + ".bn.running_var", {u.cout}, false, T(1));
  }
  w.add("head.weight", {cfg.t_prime, cfg.base_channels, 1, 1}, true);
  w.add("head.bias", {cfg.t_prime}, true);
  if (cfg.fusion_mode != FusionMode::off) w.pn = PNParams{};
  return w;
}

/// Initial sigmoid output of the head. The ball covers a tiny fraction of each
/// frame; starting from 0.5 lets training settle on suppressing every feature
/// at the ball instead of learning to fire there.
inline constexpr double kHeadPrior = 0.01;

/// Seeded fan-in-scaled uniform initialization (He uniform for the ReLU units).
template <typename T>
ModelWeights<T> init_weights(const NetworkConfig& cfg, std::uint64_t seed) {
  ModelWeights<T> w = allocate_weights<T>(cfg);
  for (auto& v : w.block("head.bias").value) v = static_cast<T>(std::log(kHeadPrior / (1.0 - kHeadPrior)));
  std::mt19937_64 rng(seed);
  for (auto& b : w.blocks) {
    const bool conv = b.name.size() > 7 && b.name.compare(b.name.size() - 7, 7, ".weight") == 0;
    if (!conv) continue;
    const int fan_in = b.dims[1] * b.dims[2] * b.dims[3];
    const bool head = b.name.rfind("head.", 0) == 0;
    const double bound = head ? std::sqrt(1.0 / fan_in) : std::sqrt(6.0 / fan_in);
    for (auto& v : b.value) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
  }
  return w;
}

/// Trainable parameter count, including the motion prompt pair.
template <typename T>
std::size_t trainable_parameter_count(const ModelWeights<T>& w) {
  std::size_t n = w.pn ? 2 : 0;
  for (const auto& b : w.blocks)
    if (b.trainable) n += b.numel();
  return n;
}

}  // namespace motrack

// SPDX-License-Identifier: Apache-2.0
//
// Model file layout (all integers unsigned 32-bit little-endian):
//
//   "MTRK1"                       5 bytes, no terminator
//   config_len, config_bytes      UTF-8 `key = value` network config echo
//   block_count
//   per block:
//     name_len, name_bytes
//     rank, dims[rank]
//     values[prod(dims)]          IEEE-754 binary32, little-endian
//
// Blocks appear in the order produced by allocate_weights(); the motion
// prompt pair is stored last as "motion_prompt.pn" = [slope, shift] when the
// config enables fusion.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "motrack/csv.hpp"
#include "motrack/model_weights.hpp"

namespace motrack {

inline constexpr const char* kPnBlockName = "motion_prompt.pn";

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError(source_ + ": truncated model file");
  }
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline bool is_running_stat(const std::string& name) {
  return name.ends_with(".running_mean") || name.ends_with(".running_var");
}

}  // namespace detail

template <typename T>
std::string serialize_weights(const ModelWeights<T>& w) {
  std::string out = kModelVersion;
  const std::string cfg = w.config.echo();
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  const bool with_pn = w.config.fusion_mode != FusionMode::off;
  require(!with_pn || w.pn.has_value(), "model with fusion enabled lacks motion prompt parameters");
  detail::put_u32(out, static_cast<std::uint32_t>(w.blocks.size() + (with_pn ? 1 : 0)));
  auto put_block = [&](const std::string& name, const std::vector<int>& dims, auto&& values) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (auto v : values) detail::put_f32(out, static_cast<float>(v));
  };
  for (const auto& b : w.blocks) put_block(b.name, b.dims, b.value);
  if (with_pn) put_block(kPnBlockName, {2}, std::vector<double>{w.pn->slope, w.pn->shift});
  return out;
}

inline ModelWeights<float> deserialize_weights(const std::string& bytes, const std::string& source = "model") {
  detail::Reader r(bytes, source);
  if (r.str(5) != kModelVersion) throw DataError(source + ": not a model file (bad magic)");
  const NetworkConfig cfg = parse_network_config(r.str(r.u32()));
  ModelWeights<float> w = allocate_weights<float>(cfg);
  const std::uint32_t count = r.u32();
  const std::size_t expected = w.blocks.size() + (cfg.fusion_mode != FusionMode::off ? 1 : 0);
  if (count != expected)
    throw DataError(source + ": expected " + std::to_string(expected) + " parameter blocks, found " +
                    std::to_string(count));
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str(r.u32());
    std::vector<int> dims(r.u32());
    for (auto& d : dims) d = static_cast<int>(r.u32());
    if (name == kPnBlockName) {
      if (dims != std::vector<int>{2} || !w.pn) throw DataError(source + ": malformed motion prompt block");
      w.pn->slope = r.f32();
      w.pn->shift = r.f32();
      if (!w.pn->valid()) throw DataError(source + ": invalid motion prompt parameters");
      continue;
    }
    if (!w.has(name)) throw DataError(source + ": unexpected parameter block '" + name + "'");
    auto& b = w.block(name);
    if (b.dims != dims) throw DataError(source + ": shape mismatch for block '" + name + "'");
    for (auto& v : b.value) {
      v = r.f32();
      if (!std::isfinite(v)) throw DataError(source + ": non-finite value in block '" + name + "'");
    }
    b.trainable = !detail::is_running_stat(name);
  }
  if (!r.done()) throw DataError(source + ": trailing bytes after last block");
  return w;
}

template <typename T>
void save_weights(const std::filesystem::path& path, const ModelWeights<T>& w) {
  write_file_atomic(path, serialize_weights(w));
}

inline ModelWeights<float> load_weights(const std::filesystem::path& path) {
  return deserialize_weights(read_file(path), path.string());
}

}  // namespace motrack

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>
#include <string>

#include "motrack/tensor.hpp"

namespace motrack {

enum class FusionMode { off, v1, v2 };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::off: return "off";
    case FusionMode::v1: return "v1";
    case FusionMode::v2: return "v2";
  }
  return "off";
}

inline FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "off") return FusionMode::off;
  if (s == "v1") return FusionMode::v1;
  if (s == "v2") return FusionMode::v2;
  throw DataError("unknown fusion_mode '" + s + "' (expected off, v1 or v2)");
}

struct NetworkConfig {
  int t_prime = 3;
  int input_width = 128;
  int input_height = 72;
  int base_channels = 16;
  int levels = 3;
  bool skip_connections = true;
  FusionMode fusion_mode = FusionMode::v1;

  int input_channels() const { return 3 * t_prime; }
  int channels_at(int level) const { return base_channels << level; }

  void validate() const {
    require(t_prime >= 2, "t_prime must be >= 2");
    require(base_channels >= 1, "base_channels must be >= 1");
    require(levels >= 0 && levels <= 6, "levels must be in [0,6]");
    const int div = 1 << levels;
    require(input_width > 0 && input_height > 0 && input_width % div == 0 &&
                input_height % div == 0,
            "input size " + std::to_string(input_width) + "x" + std::to_string(input_height) +
                " must be divisible by 2^levels = " + std::to_string(div));
  }

  /// `key = value` lines; parsed back by parse_network_config.
  std::string echo() const {
    std::ostringstream os;
    os << "t_prime = " << t_prime << "\n"
       << "input_width = " << input_width << "\n"
       << "input_height = " << input_height << "\n"
       << "base_channels = " << base_channels << "\n"
       << "levels = " << levels << "\n"
       << "skip_connections = " << (skip_connections ? "true" : "false") << "\n"
       << "fusion_mode = " << to_string(fusion_mode) << "\n";
    return os.str();
  }

  bool operator==(const NetworkConfig&) const = default;
};

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DataError("invalid boolean '" + v + "'");
}

/// Applies one key to a network config; returns false for keys it does not own.
inline bool apply_network_key(NetworkConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "t_prime") cfg.t_prime = std::stoi(value);
  else if (key == "input_width") cfg.input_width = std::stoi(value);
  else if (key == "input_height") cfg.input_height = std::stoi(value);
  else if (key == "base_channels") cfg.base_channels = std::stoi(value);
  else if (key == "levels") cfg.levels = std::stoi(value);
  else if (key == "skip_connections") cfg.skip_connections = parse_bool(value);
  else if (key == "fusion_mode") cfg.fusion_mode = parse_fusion_mode(value);
  else return false;
  return true;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline NetworkConfig parse_network_config(const std::string& text) {
  NetworkConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "malformed config line: " + line);
    const std::string key = trim(line.substr(0, eq));
    if (!apply_network_key(cfg, key, trim(line.substr(eq + 1))))
      throw DataError("unknown network config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

}  // namespace motrack

// SPDX-License-Identifier: Apache-2.0
//
// PNG frame I/O on top of the libpng simplified API. Frame directories hold
// files named <%06d>.png; indices start at 1.
#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <regex>
#include <string>
#include <vector>

#include "motrack/frames.hpp"

namespace motrack {

namespace fs = std::filesystem;

/// Reads any 8-bit-convertible PNG as RGB in [0,1].
inline Frame load_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw DataError("unreadable image file: " + path.string() + " (" + img.message + ")");
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw DataError("unreadable image file: " + path.string() + " (" + msg + ")");
  }
  Frame f(static_cast<int>(img.width), static_cast<int>(img.height), 3);
  for (std::size_t k = 0; k < buf.size(); ++k) f.data[k] = buf[k] / 255.0;
  return f;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Writes a 1- or 3-channel frame as 8-bit PNG (values rounded to n/255).
inline void save_png(const fs::path& path, const Frame& f) {
  require(f.channels == 1 || f.channels == 3, "save_png expects 1 or 3 channels");
  std::vector<std::uint8_t> buf(f.data.size());
  std::transform(f.data.begin(), f.data.end(), buf.begin(), to_byte);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(f.width);
  img.height = static_cast<png_uint_32>(f.height);
  img.format = f.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw DataError("cannot write image file: " + path.string() + " (" + img.message + ")");
}

inline std::string frame_filename(int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.png", index);
  return name;
}

/// Loads every <digits>.png in a directory sorted by numeric index.
inline FrameSequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("frame directory not found: " + dir.string());
  static const std::regex pattern(R"((\d+)\.png)");
  std::vector<std::pair<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace_back(std::stoi(m[1].str()), entry.path());
  }
  if (files.empty()) throw DataError("no frames found in " + dir.string());
  std::sort(files.begin(), files.end());
  FrameSequence seq;
  for (std::size_t k = 0; k < files.size(); ++k) {
    if (k > 0 && files[k].first == files[k - 1].first)
      throw DataError("duplicate frame index in " + files[k].second.filename().string());
    Frame f = load_png(files[k].second);
    if (!seq.frames.empty() && !f.same_geometry(seq.frames.front()))
      throw DataError("frame dimension mismatch: " + files[k].second.filename().string() + " is " +
                      std::to_string(f.width) + "x" + std::to_string(f.height) + ", expected " +
                      std::to_string(seq.frames.front().width) + "x" +
                      std::to_string(seq.frames.front().height));
    seq.frames.push_back(std::move(f));
    seq.frame_indices.push_back(files[k].first);
  }
  return seq;
}

inline void save_sequence(const fs::path& dir, const FrameSequence& seq) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < seq.size(); ++k)
    save_png(dir / frame_filename(seq.frame_indices[k]), seq.frames[k]);
}

}  // namespace motrack

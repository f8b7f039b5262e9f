// SPDX-License-Identifier: Apache-2.0
//
// Plain-text formats:
//   labels.csv       frame,visibility,x,y             (x,y empty when visibility=0)
//   predictions.csv  frame,visibility,x,y,confidence
//   manifest         game,clip,frames,assignment
// UTF-8, comma separated, LF line endings, header line first.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "motrack/eval.hpp"
#include "motrack/synthgen.hpp"

namespace motrack {

namespace fs = std::filesystem;

inline const char* const kLabelsHeader = "frame,visibility,x,y";
inline const char* const kPredictionsHeader = "frame,visibility,x,y,confidence";
inline const char* const kManifestHeader = "game,clip,frames,assignment";

/// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path() && !fs::exists(path.parent_path()))
    throw DataError("output directory does not exist: " + path.parent_path().string());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write file: " + path.string());
    os << content;
    if (!os) throw DataError("cannot write file: " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot write file: " + path.string() + " (" + ec.message() + ")");
}

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

namespace detail {
inline std::vector<std::vector<std::string>> read_rows(const fs::path& path, const std::string& header,
                                                       std::size_t fields) {
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line) || trim(line) != header)
    throw DataError(path.string() + ": expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_fields(line);
    if (f.size() != fields)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(fields) + " fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline double parse_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ": invalid number '" + s + "'");
  }
}

inline int parse_int(const std::string& s, const fs::path& path) {
  const double v = parse_double(s, path);
  if (v != static_cast<int>(v)) throw DataError(path.string() + ": invalid integer '" + s + "'");
  return static_cast<int>(v);
}
}  // namespace detail

inline std::string format_labels(const std::vector<BallLabel>& labels) {
  std::string out = std::string(kLabelsHeader) + "\n";
  for (const auto& l : labels) {
    out += std::to_string(l.frame_index) + "," + std::to_string(l.visibility) + ",";
    if (l.visible()) out += detail::fmt_coord(l.x) + "," + detail::fmt_coord(l.y);
    else out += ",";
    out += "\n";
  }
  return out;
}

inline std::vector<BallLabel> read_labels(const fs::path& path) {
  std::vector<BallLabel> out;
  for (const auto& f : detail::read_rows(path, kLabelsHeader, 4)) {
    BallLabel l;
    l.frame_index = detail::parse_int(f[0], path);
    l.visibility = detail::parse_int(f[1], path);
    if (l.visibility != 0 && l.visibility != 1)
      throw DataError(path.string() + ": visibility must be 0 or 1");
    if (l.visible()) {
      l.x = detail::parse_double(f[2], path);
      l.y = detail::parse_double(f[3], path);
    }
    out.push_back(l);
  }
  return out;
}

inline std::string format_predictions(const std::vector<Detection>& dets) {
  std::string out = std::string(kPredictionsHeader) + "\n";
  for (const auto& d : dets) {
    out += std::to_string(d.frame_index) + "," + (d.present ? "1," : "0,");
    if (d.present) {
      char conf[32];
      std::snprintf(conf, sizeof(conf), "%.6f", d.confidence);
      out += detail::fmt_coord(d.x) + "," + detail::fmt_coord(d.y) + "," + conf;
    } else {
      out += ",,";
    }
    out += "\n";
  }
  return out;
}

inline std::vector<Detection> read_predictions(const fs::path& path) {
  std::vector<Detection> out;
  for (const auto& f : detail::read_rows(path, kPredictionsHeader, 5)) {
    Detection d;
    d.frame_index = detail::parse_int(f[0], path);
    const int vis = detail::parse_int(f[1], path);
    if (vis != 0 && vis != 1) throw DataError(path.string() + ": visibility must be 0 or 1");
    d.present = vis == 1;
    if (d.present) {
      d.x = detail::parse_double(f[2], path);
      d.y = detail::parse_double(f[3], path);
      d.confidence = detail::parse_double(f[4], path);
    }
    out.push_back(d);
  }
  return out;
}

inline std::string format_manifest(const SplitManifest& m) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& e : m.entries)
    out += e.game + "," + e.clip + "," + std::to_string(e.frames) + "," + to_string(e.assignment) + "\n";
  return out;
}

inline SplitManifest read_manifest(const fs::path& path) {
  SplitManifest m;
  for (const auto& f : detail::read_rows(path, kManifestHeader, 4)) {
    ClipEntry e;
    e.game = f[0];
    e.clip = f[1];
    e.frames = detail::parse_int(f[2], path);
    if (f[3] == "train") e.assignment = Assignment::train;
    else if (f[3] == "test") e.assignment = Assignment::test;
    else if (f[3].empty()) e.assignment = Assignment::unassigned;
    else throw DataError(path.string() + ": unknown assignment '" + f[3] + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace motrack

// Copyright 2026 The eagrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "eagrs/error.hpp"
#include "eagrs/fcdata/subject.hpp"
#include "eagrs/matrix.hpp"

namespace eagrs::fcdata {

namespace fs = std::filesystem;

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& where) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
    throw Error(Errc::kParseError, where + ": not a number '" + std::string(text) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// R x R FC with a header row of ROI names.
inline void write_fc_csv(const fs::path& path, const Matrix& fc,
                         const std::vector<std::string>& roi_names = {}) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  for (std::size_t j = 0; j < fc.cols(); ++j) {
    if (j) out << ',';
    out << (roi_names.empty() ? "roi_" + std::to_string(j) : roi_names[j]);
  }
  out << '\n';
  for (std::size_t i = 0; i < fc.rows(); ++i) {
    for (std::size_t j = 0; j < fc.cols(); ++j) {
      if (j) out << ',';
      out << format_double(fc(i, j));
    }
    out << '\n';
  }
}

inline Matrix read_fc_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kMissingFile, path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::kParseError, path.string() + ":1:1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::size_t r = split_csv_line(line).size();
  Matrix fc(r, r);
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (row >= r) throw Error(Errc::kParseError, where + ":1: more than " + std::to_string(r) + " data rows");
    if (cells.size() != r) {
      throw Error(Errc::kParseError, where + ":1: expected " + std::to_string(r) + " columns, got " +
                                         std::to_string(cells.size()));
    }
    std::size_t col_offset = 1;
    for (std::size_t j = 0; j < r; ++j) {
      fc(row, j) = parse_double(cells[j], where + ":" + std::to_string(col_offset));
      if (!std::isfinite(fc(row, j))) throw Error(Errc::kParseError, where + ": non-finite value");
      col_offset += cells[j].size() + 1;
    }
    ++row;
  }
  if (row != r) {
    throw Error(Errc::kParseError, path.string() + ":" + std::to_string(line_no) + ":1: expected " +
                                       std::to_string(r) + " data rows, got " + std::to_string(row));
  }
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j)
      if (std::abs(fc(i, j) - fc(j, i)) > 1e-9) {
        throw Error(Errc::kAsymmetricBeyondTolerance, path.string() + " entry (" + std::to_string(i) +
                                                          "," + std::to_string(j) + ")");
      }
  return fc;
}

/// Writes `manifest` (JSON lines: id, label, site, fc_path) and one FC CSV per
/// subject under fc/ next to it.
inline void save_dataset(const std::vector<Subject>& subjects, const fs::path& manifest) {
  const fs::path root = manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
  fs::create_directories(root);
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + manifest.string());
  for (const auto& s : subjects) {
    const std::string rel = "fc/" + s.id + ".csv";
    write_fc_csv(root / rel, s.fc);
    nlohmann::json rec = {{"id", s.id}, {"label", s.label}, {"site", s.site}, {"fc_path", rel}};
    out << rec.dump() << '\n';
  }
}

inline std::vector<Subject> load_dataset(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(Errc::kMissingFile, manifest.string());
  const fs::path root = manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
  std::vector<Subject> subjects;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::kParseError, where + ":" + std::to_string(e.byte) + ": " + e.what());
    }
    Subject s;
    try {
      s.id = rec.at("id").get<std::string>();
      s.label = rec.at("label").get<int>();
      s.site = rec.value("site", std::string());
      const auto fc_path = root / rec.at("fc_path").get<std::string>();
      if (!fs::exists(fc_path)) throw Error(Errc::kMissingFile, fc_path.string() + " (" + where + ")");
      s.fc = read_fc_csv(fc_path);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kParseError, where + ":1: " + e.what());
    }
    if (s.label != kLabelASD && s.label != kLabelTD) {
      throw Error(Errc::kParseError, where + ":1: label must be 0 or 1");
    }
    if (!subjects.empty() && subjects.front().fc.rows() != s.fc.rows()) {
      throw Error(Errc::kDimensionMismatch, where + ": ROI count differs from first subject");
    }
    subjects.push_back(std::move(s));
  }
  return subjects;
}

}  // namespace eagrs::fcdata

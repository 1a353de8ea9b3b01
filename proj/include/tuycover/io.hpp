// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tuycover/common.hpp"
#include "tuycover/coverage.hpp"
#include "tuycover/esr.hpp"
#include "tuycover/exact.hpp"
#include "tuycover/geometry.hpp"
#include "tuycover/greedy.hpp"
#include "tuycover/metrics.hpp"
#include "tuycover/reduction.hpp"
#include "tuycover/scene.hpp"
#include "tuycover/validity.hpp"

namespace tuycover {

using json = nlohmann::json;

/// Shortest round-trip decimal form; keeps CSV output byte-stable.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw config_error("expected a 3-vector");
  return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const Roi& roi) {
  return json{{"center_mm", to_json(roi.center_mm)}, {"radius_mm", roi.radius_mm}};
}

inline Roi roi_from_json(const json& j) {
  Roi roi;
  roi.center_mm = vec3_from_json(j.at("center_mm"));
  roi.radius_mm = j.at("radius_mm").get<double>();
  return roi;
}

inline json to_json(const ValidityMask& mask) {
  json j;
  j["alpha"] = mask.alpha;
  j["eta"] = mask.eta;
  j["valid"] = std::vector<int>(mask.valid.begin(), mask.valid.end());
  j["geometric_ok"] = std::vector<int>(mask.geometric_ok.begin(), mask.geometric_ok.end());
  j["rho"] = mask.rho;
  return j;
}

inline ValidityMask mask_from_json(const json& j) {
  ValidityMask mask;
  mask.alpha = j.at("alpha").get<double>();
  mask.eta = j.at("eta").get<double>();
  for (int v : j.at("valid").get<std::vector<int>>()) mask.valid.push_back(v != 0);
  for (int v : j.at("geometric_ok").get<std::vector<int>>()) mask.geometric_ok.push_back(v != 0);
  mask.rho = j.at("rho").get<std::vector<double>>();
  return mask;
}

inline const char* to_string(MatrixFlavor f) {
  return f == MatrixFlavor::binary ? "binary" : "soft";
}

inline json to_json(const Selection& sel) {
  return json{{"chosen", sel.chosen},
              {"objective", sel.objective},
              {"per_step_gains", sel.per_step_gains},
              {"budget", sel.budget},
              {"flavor", to_string(sel.flavor)}};
}

inline json to_json(const ExactResult& r) {
  return json{{"chosen", r.chosen},
              {"objective", r.objective},
              {"upper_bound", r.upper_bound},
              {"gap", r.gap},
              {"status", to_string(r.status)},
              {"node_count", r.node_count},
              {"warm_start_used", r.warm_start_used},
              {"per_cluster_objective", r.per_cluster_objective}};
}

inline json to_json(const WorstCaseResult& r) {
  return json{{"chosen", r.chosen},
              {"t_value", r.t_value},
              {"excluded_columns", r.excluded_columns},
              {"tiebreak_mean", r.tiebreak_mean},
              {"status", to_string(r.status)},
              {"node_count", r.node_count}};
}

inline json to_json(const CoverageReadout& r) {
  return json{{"binary_tuy", r.binary_tuy},
              {"soft_tuy", r.soft_tuy},
              {"saturated", r.saturated},
              {"z", r.z},
              {"selection_flavor", to_string(r.selection_flavor)},
              {"binary_source", r.binary_source}};
}

inline json to_json(const EsrReport& r, const DirectionGrid* grid = nullptr) {
  json j{{"mean_gap_rad", r.mean_gap_rad},
         {"quantile_gap_rad", r.quantile_gap_rad},
         {"quantile_p", r.quantile_p},
         {"esr_mean_mm", r.esr_mean_mm},
         {"esr_quantile_mm", r.esr_quantile_mm},
         {"voxel_mean_mm", r.voxel_mean_mm},
         {"voxel_quantile_mm", r.voxel_quantile_mm},
         {"unsupported", r.unsupported},
         {"per_direction_gap_rad", r.per_direction_gap_rad}};
  json pts = json::array();
  for (const Vec3& p : r.evaluation_points) pts.push_back(to_json(p));
  j["evaluation_points"] = pts;
  j["per_point_esr_mm"] = r.per_point_esr_mm;
  if (grid) {
    json dirs = json::array();
    for (const Direction& d : grid->directions) dirs.push_back(to_json(d.unit));
    j["directions"] = dirs;
    j["tolerance_rad"] = grid->tolerance_rad;
  }
  return j;
}

inline json to_json(const SetCoverInstance& sc) {
  return json{{"universe_size", sc.universe_size}, {"subsets", sc.subsets}, {"budget", sc.budget}};
}

inline SetCoverInstance setcover_from_json(const json& j) {
  SetCoverInstance sc;
  try {
    sc.universe_size = j.at("universe_size").get<int>();
    sc.subsets = j.at("subsets").get<std::vector<std::vector<int>>>();
    sc.budget = j.at("budget").get<int>();
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed set-cover instance: ") + e.what());
  }
  for (const auto& subset : sc.subsets)
    for (int el : subset)
      if (el < 0 || el >= sc.universe_size)
        throw config_error("set-cover subset element out of range");
  return sc;
}

// -- volume: raw little-endian float32 array plus a JSON header ------------

inline void write_volume(const VoxelVolume& vol, const std::string& base_path) {
  json header{{"dims", vol.dims},
              {"spacing_mm", vol.spacing_mm},
              {"origin_mm", to_json(vol.origin_mm)},
              {"dtype", "float32"},
              {"byte_order", "little"},
              {"raw_file", std::filesystem::path(base_path + ".raw").filename().string()}};
  std::ofstream hdr(base_path + ".json");
  if (!hdr) throw error("cannot write volume header: " + base_path + ".json");
  hdr << header.dump(2) << "\n";

  std::ofstream raw(base_path + ".raw", std::ios::binary);
  if (!raw) throw error("cannot write volume data: " + base_path + ".raw");
  raw.write(reinterpret_cast<const char*>(vol.mu.data()),
            static_cast<std::streamsize>(vol.mu.size() * sizeof(float)));
}

inline VoxelVolume read_volume(const std::string& base_path) {
  std::ifstream hdr(base_path + ".json");
  if (!hdr) throw error("cannot read volume header: " + base_path + ".json");
  json header = json::parse(hdr);
  VoxelVolume vol;
  const auto dims = header.at("dims").get<std::vector<int>>();
  if (dims.size() != 3) throw config_error("volume header dims must have 3 entries");
  vol.dims = {dims[0], dims[1], dims[2]};
  vol.spacing_mm = header.at("spacing_mm").get<double>();
  vol.origin_mm = vec3_from_json(header.at("origin_mm"));
  vol.mu.resize(vol.voxel_count());
  std::ifstream raw(base_path + ".raw", std::ios::binary);
  if (!raw) throw error("cannot read volume data: " + base_path + ".raw");
  raw.read(reinterpret_cast<char*>(vol.mu.data()),
           static_cast<std::streamsize>(vol.mu.size() * sizeof(float)));
  if (static_cast<std::size_t>(raw.gcount()) != vol.mu.size() * sizeof(float))
    throw error("volume raw file is shorter than the header promises");
  return vol;
}

// -- matrix: (source, direction, value) triple list ------------------------

inline std::string matrix_to_csv(const CoverageMatrix& matrix) {
  std::ostringstream out;
  out << "source,direction,value\n";
  for (int i = 0; i < matrix.m; ++i)
    for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)])
      out << i << ',' << e.col << ',' << format_double(e.value) << '\n';
  return out.str();
}

inline CoverageMatrix matrix_from_csv(const std::string& csv, MatrixFlavor flavor, int m, int z) {
  CoverageMatrix matrix;
  matrix.flavor = flavor;
  matrix.m = m;
  matrix.z = z;
  matrix.rows.resize(static_cast<std::size_t>(m));
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw config_error("matrix csv is empty");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int i = 0, j = 0;
    double v = 0.0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf", &i, &j, &v) != 3)
      throw config_error("malformed matrix csv line: " + line);
    if (i < 0 || i >= m || j < 0 || j >= z) throw config_error("matrix csv index out of range");
    matrix.rows[static_cast<std::size_t>(i)].push_back({j, v});
  }
  return matrix;
}

inline json matrix_to_json(const CoverageMatrix& matrix) {
  json entries = json::array();
  for (int i = 0; i < matrix.m; ++i)
    for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)])
      entries.push_back(json::array({i, e.col, e.value}));
  return json{{"flavor", to_string(matrix.flavor)},
              {"m", matrix.m},
              {"z", matrix.z},
              {"dot_tolerance", matrix.dot_tolerance},
              {"entries", entries}};
}

/// Per-direction gap table keyed by direction index and unit vector.
inline std::string esr_gaps_csv(const std::vector<Vec3>& directions,
                                const std::vector<double>& gaps_rad) {
  if (directions.size() != gaps_rad.size())
    throw invalid_parameter("direction and gap counts differ");
  std::ostringstream out;
  out << "index,dir_x,dir_y,dir_z,gap_rad\n";
  for (std::size_t j = 0; j < directions.size(); ++j)
    out << j << ',' << format_double(directions[j].x) << ',' << format_double(directions[j].y)
        << ',' << format_double(directions[j].z) << ',' << format_double(gaps_rad[j]) << '\n';
  return out.str();
}

// -- sphere map export ------------------------------------------------------

/// One row per direction: unit vector, Mollweide-ready lon/lat, gap in
/// degrees. The Nyquist threshold rides along as a header field.
inline std::string sphere_map_csv(const std::vector<Vec3>& directions,
                                  const std::vector<double>& gaps_rad, double theta_max_rad) {
  if (directions.size() != gaps_rad.size())
    throw invalid_parameter("direction and gap counts differ");
  constexpr double deg = 180.0 / std::numbers::pi;
  std::ostringstream out;
  out << "# theta_max_deg=" << format_double(theta_max_rad * deg) << '\n';
  out << "dir_x,dir_y,dir_z,lon_deg,lat_deg,gap_deg\n";
  for (std::size_t j = 0; j < directions.size(); ++j) {
    const Vec3& d = directions[j];
    const double lon = std::atan2(d.y, d.x) * deg;
    const double lat = std::asin(std::clamp(d.z, -1.0, 1.0)) * deg;
    out << format_double(d.x) << ',' << format_double(d.y) << ',' << format_double(d.z) << ','
        << format_double(lon) << ',' << format_double(lat) << ','
        << format_double(gaps_rad[j] * deg) << '\n';
  }
  return out.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw error("cannot write file: " + path);
  out << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tuycover

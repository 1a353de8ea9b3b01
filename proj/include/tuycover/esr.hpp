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

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/geometry.hpp"
#include "tuycover/greedy.hpp"
#include "tuycover/scene.hpp"
#include "tuycover/validity.hpp"

namespace tuycover {

/// Effective Spatial Resolution diagnostic. Estimated resolvable feature
/// size is 2r times the mean (or quantile) per-direction angular gap;
/// evaluated after selection, never part of an objective.
struct EsrReport {
  std::vector<double> per_direction_gap_rad;
  double mean_gap_rad = 0.0;
  double quantile_gap_rad = 0.0;
  double quantile_p = 0.95;
  double esr_mean_mm = 0.0;
  double esr_quantile_mm = 0.0;
  std::vector<Vec3> evaluation_points;
  std::vector<double> per_point_esr_mm;
  double voxel_mean_mm = 0.0;
  double voxel_quantile_mm = 0.0;
  bool unsupported = false;  // no selected source was valid
};

/// Smallest unoriented angular miss arcsin|d . mu| over the given sources;
/// pi/2 when the list is empty (completely unsupported direction).
inline double directional_gap(const Vec3& point, const Direction& mu,
                              std::span<const Vec3> selected_valid_sources) {
  if (selected_valid_sources.empty()) return std::numbers::pi / 2.0;
  double best = std::numbers::pi / 2.0;
  for (const Vec3& s : selected_valid_sources) {
    if (s == point) throw geometry_error("source coincides with the evaluation point");
    const Vec3 d = normalized(s - point);
    const double a = std::min(1.0, std::abs(dot(d, mu.unit)));
    best = std::min(best, std::asin(a));
  }
  return best;
}

/// Nearest-rank p-quantile of a gap list.
inline double gap_quantile(const std::vector<double>& gaps, double p) {
  return nearest_rank_quantile(gaps, p);
}

namespace detail {

// Deterministic low-discrepancy lattice inside the ROI sphere: Fibonacci
// directions with cube-root radial spacing.
inline std::vector<Vec3> roi_lattice(const Roi& roi, int n) {
  if (n <= 1) return {roi.center_mm};
  const std::vector<Direction> dirs = fibonacci_sphere(n);
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double frac = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double radius = roi.radius_mm * 0.95 * std::cbrt(frac);
    points.push_back(roi.center_mm + dirs[static_cast<std::size_t>(i)].unit * radius);
  }
  return points;
}

}  // namespace detail

/// Full ESR diagnostic for a selection: per-direction gaps against the
/// selected-and-valid sources (validity taken from the ROI-level mask),
/// mean/quantile statistics in millimetres, and an optional voxel lattice
/// aggregation with voxel_samples > 1.
inline EsrReport esr_report(std::span<const int> chosen, const SourceSet& sources, const Roi& roi,
                            const DirectionGrid& grid, const ValidityMask& mask, double p = 0.95,
                            int voxel_samples = 1) {
  if (!(p > 0.0 && p < 1.0)) throw invalid_parameter("quantile p must lie in (0,1)");
  if (voxel_samples < 1) throw invalid_parameter("voxel_samples must be >= 1");
  if (mask.size() != sources.size())
    throw invalid_parameter("validity mask does not match the source set");

  std::vector<Vec3> usable;
  for (int i : chosen)
    if (i >= 0 && i < mask.size() && mask.valid[static_cast<std::size_t>(i)])
      usable.push_back(sources.positions[static_cast<std::size_t>(i)]);

  EsrReport report;
  report.quantile_p = p;
  report.unsupported = usable.empty();

  const int z = grid.size();
  report.per_direction_gap_rad.resize(static_cast<std::size_t>(z));
  parallel_for(static_cast<std::size_t>(z), [&](std::size_t j) {
    report.per_direction_gap_rad[j] = directional_gap(roi.center_mm, grid.directions[j], usable);
  });

  double mean = 0.0;
  for (double g : report.per_direction_gap_rad) mean += g;
  report.mean_gap_rad = z > 0 ? mean / z : 0.0;
  report.quantile_gap_rad = gap_quantile(report.per_direction_gap_rad, p);
  report.esr_mean_mm = 2.0 * roi.radius_mm * report.mean_gap_rad;
  report.esr_quantile_mm = 2.0 * roi.radius_mm * report.quantile_gap_rad;

  report.evaluation_points = detail::roi_lattice(roi, voxel_samples);
  report.per_point_esr_mm.resize(report.evaluation_points.size());
  if (voxel_samples == 1) {
    report.per_point_esr_mm[0] = report.esr_mean_mm;
  } else {
    parallel_for(report.evaluation_points.size(), [&](std::size_t pt) {
      double acc = 0.0;
      for (int j = 0; j < z; ++j)
        acc += directional_gap(report.evaluation_points[pt],
                               grid.directions[static_cast<std::size_t>(j)], usable);
      report.per_point_esr_mm[pt] = 2.0 * roi.radius_mm * (z > 0 ? acc / z : 0.0);
    });
  }
  report.voxel_mean_mm = 0.0;
  for (double v : report.per_point_esr_mm) report.voxel_mean_mm += v;
  report.voxel_mean_mm /= static_cast<double>(report.per_point_esr_mm.size());
  report.voxel_quantile_mm = nearest_rank_quantile(report.per_point_esr_mm, p);
  return report;
}

}  // namespace tuycover

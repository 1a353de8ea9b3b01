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
#include <memory>
#include <span>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/geometry.hpp"
#include "tuycover/validity.hpp"

namespace tuycover {

enum class MatrixFlavor { binary, soft };

struct MatrixEntry {
  int col = 0;
  double value = 0.0;
};

/// Sparse row-major coverage matrix over (source, direction) pairs.
/// Invalid sources hold empty rows. Binary rows store 1.0; soft rows store
/// the linear near-orthogonality score in (0, 1].
struct CoverageMatrix {
  MatrixFlavor flavor = MatrixFlavor::soft;
  int m = 0;
  int z = 0;
  double dot_tolerance = 0.0;
  std::vector<std::vector<MatrixEntry>> rows;
  // Null for synthetic instances (reductions, tests).
  std::shared_ptr<const DirectionGrid> grid;
  std::shared_ptr<const ValidityMask> mask;

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& row : rows) n += row.size();
    return n;
  }
};

/// Unit ray direction from the ROI center toward a source.
inline Direction ray_direction(const Vec3& source, const Vec3& roi_center) {
  if (source == roi_center) throw geometry_error("source coincides with the ROI center");
  return Direction{normalized(source - roi_center)};
}

/// Hard Tuy check: 1 iff |mu . d| <= tau. The boundary |mu . d| = tau counts
/// as covered; comparisons are exact on the computed doubles.
inline int binary_entry(const Direction& mu, const Direction& d, double dot_tolerance) {
  return std::abs(dot(mu.unit, d.unit)) <= dot_tolerance ? 1 : 0;
}

/// Graded near-orthogonality: decays linearly from 1 at a perfect hit to 0
/// at the binary boundary, zero beyond.
inline double soft_entry(const Direction& mu, const Direction& d, double dot_tolerance) {
  const double a = std::abs(dot(mu.unit, d.unit));
  return std::max(0.0, (dot_tolerance - a) / dot_tolerance);
}

inline CoverageMatrix build_matrix(MatrixFlavor flavor, const SourceSet& sources, const Roi& roi,
                                   std::shared_ptr<const DirectionGrid> grid,
                                   std::shared_ptr<const ValidityMask> mask) {
  if (!grid) throw invalid_parameter("build_matrix requires a direction grid");
  if (mask && mask->size() != sources.size())
    throw invalid_parameter("validity mask size does not match the source count");

  CoverageMatrix matrix;
  matrix.flavor = flavor;
  matrix.m = sources.size();
  matrix.z = grid->size();
  matrix.dot_tolerance = grid->dot_tolerance;
  matrix.grid = grid;
  matrix.mask = mask;
  matrix.rows.resize(sources.positions.size());

  const double tau = grid->dot_tolerance;
  parallel_for(sources.positions.size(), [&](std::size_t i) {
    if (mask && !mask->valid[i]) return;
    const Direction d = ray_direction(sources.positions[i], roi.center_mm);
    std::vector<MatrixEntry>& row = matrix.rows[i];
    for (int j = 0; j < matrix.z; ++j) {
      const double a = std::abs(dot(grid->directions[static_cast<std::size_t>(j)].unit, d.unit));
      if (flavor == MatrixFlavor::binary) {
        if (a <= tau) row.push_back({j, 1.0});
      } else if (a < tau) {
        row.push_back({j, (tau - a) / tau});
      }
    }
  });
  return matrix;
}

/// Direction indices no valid source can reach.
inline std::vector<int> uncoverable_columns(const CoverageMatrix& matrix) {
  std::vector<bool> covered(static_cast<std::size_t>(matrix.z), false);
  for (const auto& row : matrix.rows)
    for (const MatrixEntry& e : row)
      if (e.value > 0.0) covered[static_cast<std::size_t>(e.col)] = true;
  std::vector<int> out;
  for (int j = 0; j < matrix.z; ++j)
    if (!covered[static_cast<std::size_t>(j)]) out.push_back(j);
  return out;
}

}  // namespace tuycover

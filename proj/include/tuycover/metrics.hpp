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

#include <span>
#include <string>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/coverage.hpp"
#include "tuycover/greedy.hpp"

namespace tuycover {

/// The three per-direction aggregates on a common [0,1] scale:
///   binary_tuy  fraction of directions hit by any selected view,
///   soft_tuy    mean best single-view score,
///   saturated   mean clamped sum of scores (the optimization objective).
struct CoverageReadout {
  double binary_tuy = 0.0;
  double soft_tuy = 0.0;
  double saturated = 0.0;
  int z = 0;
  MatrixFlavor selection_flavor = MatrixFlavor::soft;
  std::string binary_source;  // "matrix_b" or "support_a"
};

/// Computes all three readouts of a selection on the soft matrix A. When a
/// binary matrix is supplied, Binary Tuy uses its support (which includes
/// boundary hits that A scores as zero); otherwise the support of A stands
/// in and the readout records which source was used.
inline CoverageReadout readout(std::span<const int> chosen, const CoverageMatrix& soft_matrix,
                               const CoverageMatrix* binary_matrix = nullptr) {
  if (soft_matrix.flavor != MatrixFlavor::soft)
    throw invalid_parameter("readout expects a soft matrix");
  if (binary_matrix && (binary_matrix->flavor != MatrixFlavor::binary ||
                        binary_matrix->z != soft_matrix.z || binary_matrix->m != soft_matrix.m))
    throw invalid_parameter("binary matrix does not match the soft matrix");

  const int z = soft_matrix.z;
  CoverageReadout out;
  out.z = z;
  out.binary_source = binary_matrix ? "matrix_b" : "support_a";
  if (z == 0) return out;

  std::vector<double> best(static_cast<std::size_t>(z), 0.0);
  std::vector<double> sum(static_cast<std::size_t>(z), 0.0);
  std::vector<bool> hit(static_cast<std::size_t>(z), false);

  std::vector<int> sorted(chosen.begin(), chosen.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i : sorted) {
    if (i < 0 || i >= soft_matrix.m) throw invalid_parameter("selection index out of range");
    for (const MatrixEntry& e : soft_matrix.rows[static_cast<std::size_t>(i)]) {
      const auto j = static_cast<std::size_t>(e.col);
      best[j] = std::max(best[j], e.value);
      sum[j] = std::min(1.0, sum[j] + e.value);
      if (e.value > 0.0) hit[j] = true;
    }
    if (binary_matrix)
      for (const MatrixEntry& e : binary_matrix->rows[static_cast<std::size_t>(i)])
        if (e.value > 0.0) hit[static_cast<std::size_t>(e.col)] = true;
  }

  double n_hit = 0.0, soft_total = 0.0, sat_total = 0.0;
  for (int j = 0; j < z; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (hit[ju]) n_hit += 1.0;
    soft_total += best[ju];
    sat_total += sum[ju];
  }
  out.binary_tuy = n_hit / z;
  out.soft_tuy = soft_total / z;
  out.saturated = sat_total / z;
  return out;
}

/// Readout for a selection that was optimized on the binary matrix,
/// evaluated on the soft scale; keeps the provenance flavor on the record.
inline CoverageReadout cross_evaluate(const Selection& binary_selection,
                                      const CoverageMatrix& soft_matrix,
                                      const CoverageMatrix* binary_matrix = nullptr) {
  CoverageReadout out = readout(binary_selection.chosen, soft_matrix, binary_matrix);
  out.selection_flavor = binary_selection.flavor;
  return out;
}

}  // namespace tuycover

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

#include <queue>
#include <span>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/coverage.hpp"

namespace tuycover {

/// Accumulated per-direction coverage, clamped at 1.
struct CoverageState {
  std::vector<double> gamma;

  explicit CoverageState(int z = 0) : gamma(static_cast<std::size_t>(z), 0.0) {}
};

/// Delta_i = 1^T (min(1, gamma + row) - gamma). The clamp realizes
/// directional saturation: fully covered directions contribute nothing.
inline double marginal_gain(const CoverageState& state, std::span<const MatrixEntry> row) {
  double gain = 0.0;
  for (const MatrixEntry& e : row) {
    const double g = state.gamma[static_cast<std::size_t>(e.col)];
    gain += std::min(1.0, g + e.value) - g;
  }
  return gain;
}

inline void apply_row(CoverageState& state, std::span<const MatrixEntry> row) {
  for (const MatrixEntry& e : row) {
    double& g = state.gamma[static_cast<std::size_t>(e.col)];
    g = std::min(1.0, g + e.value);
  }
}

/// Saturated coverage of a chosen set, recomputed from scratch. Rows are
/// applied in ascending index order, which makes the value reproducible and
/// identical to min(1, sum) per direction.
inline double evaluate_objective(const CoverageMatrix& matrix, std::span<const int> chosen) {
  CoverageState state(matrix.z);
  std::vector<int> sorted(chosen.begin(), chosen.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i : sorted) apply_row(state, matrix.rows[static_cast<std::size_t>(i)]);
  double total = 0.0;
  for (double g : state.gamma) total += g;
  return total;
}

struct Selection {
  std::vector<int> chosen;  // in pick order
  double objective = 0.0;
  std::vector<double> per_step_gains;
  int budget = 0;
  MatrixFlavor flavor = MatrixFlavor::soft;
};

/// Marginal-gain greedy under a cardinality budget. Stops early once no
/// remaining candidate has positive gain; ties break toward the lowest
/// source index.
inline Selection greedy_select(const CoverageMatrix& matrix, int k) {
  if (k < 1) throw invalid_parameter("greedy budget must be >= 1");
  Selection sel;
  sel.budget = k;
  sel.flavor = matrix.flavor;

  CoverageState state(matrix.z);
  std::vector<bool> taken(static_cast<std::size_t>(matrix.m), false);
  const int steps = std::min(k, matrix.m);
  for (int step = 0; step < steps; ++step) {
    int best = -1;
    double best_gain = 0.0;
    for (int i = 0; i < matrix.m; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double gain = marginal_gain(state, matrix.rows[static_cast<std::size_t>(i)]);
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best < 0) break;  // zero best gain: unused budget is reported, not padded
    taken[static_cast<std::size_t>(best)] = true;
    sel.chosen.push_back(best);
    sel.per_step_gains.push_back(best_gain);
    apply_row(state, matrix.rows[static_cast<std::size_t>(best)]);
  }
  sel.objective = evaluate_objective(matrix, sel.chosen);
  return sel;
}

/// Same marginal-gain rule on the binary matrix; the objective is then the
/// count of covered directions.
inline Selection binary_greedy_select(const CoverageMatrix& binary_matrix, int k) {
  if (binary_matrix.flavor != MatrixFlavor::binary)
    throw invalid_parameter("binary_greedy_select needs a binary matrix");
  return greedy_select(binary_matrix, k);
}

/// Lazy evaluation of the same rule: cached gains are upper bounds once the
/// state grows, so a heap entry that is still fresh after re-evaluation is
/// the true argmax. Ordering the heap by (gain, then lowest index) makes the
/// selected set bit-identical to the naive scan.
inline Selection lazy_greedy_select(const CoverageMatrix& matrix, int k) {
  if (k < 1) throw invalid_parameter("greedy budget must be >= 1");
  Selection sel;
  sel.budget = k;
  sel.flavor = matrix.flavor;

  struct HeapEntry {
    double gain;
    int index;
    int evaluated_at;  // step at which the gain was computed
  };
  struct HeapOrder {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
      return a.gain < b.gain || (a.gain == b.gain && a.index > b.index);
    }
  };

  CoverageState state(matrix.z);
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapOrder> heap;
  for (int i = 0; i < matrix.m; ++i)
    heap.push({marginal_gain(state, matrix.rows[static_cast<std::size_t>(i)]), i, 0});

  const int steps = std::min(k, matrix.m);
  for (int step = 0; step < steps && !heap.empty();) {
    HeapEntry top = heap.top();
    heap.pop();
    if (top.evaluated_at != step) {
      top.gain = marginal_gain(state, matrix.rows[static_cast<std::size_t>(top.index)]);
      top.evaluated_at = step;
      heap.push(top);
      continue;
    }
    if (top.gain <= 0.0) break;
    sel.chosen.push_back(top.index);
    sel.per_step_gains.push_back(top.gain);
    apply_row(state, matrix.rows[static_cast<std::size_t>(top.index)]);
    ++step;
  }
  sel.objective = evaluate_objective(matrix, sel.chosen);
  return sel;
}

}  // namespace tuycover

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

#include <cstdint>
#include <random>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/coverage.hpp"

namespace tuycover {

struct SetCoverInstance {
  int universe_size = 0;                 // n
  std::vector<std::vector<int>> subsets; // each subset of {0..n-1}
  int budget = 0;                        // k
};

/// Voxel-coverage decision instance: choose <= budget projections covering
/// at least `threshold` ROI voxels.
struct RoiCttopInstance {
  int num_voxels = 0;
  std::vector<std::vector<int>> projections;  // R_i
  std::vector<int> roi;                       // T
  int budget = 0;
  int threshold = 0;                          // L
};

struct DirectionalInstance {
  CoverageMatrix matrix;  // binary flavor, z = universe size
  int budget = 0;
  int threshold = 0;      // L = z
};

/// Set Cover -> ROI-CTTOP: V = T = U, R_i = S_i, same budget, L = n.
inline RoiCttopInstance reduce_setcover_to_cttop(const SetCoverInstance& sc) {
  if (sc.universe_size < 1) throw invalid_parameter("universe must be non-empty");
  if (sc.subsets.empty()) throw invalid_parameter("need at least one subset");
  RoiCttopInstance out;
  out.num_voxels = sc.universe_size;
  out.projections = sc.subsets;
  out.roi.resize(static_cast<std::size_t>(sc.universe_size));
  for (int v = 0; v < sc.universe_size; ++v) out.roi[static_cast<std::size_t>(v)] = v;
  out.budget = sc.budget;
  out.threshold = sc.universe_size;
  return out;
}

/// Set Cover -> binary directional coverage: z = n, B_ij = [j in S_i],
/// same budget, L = z.
inline DirectionalInstance reduce_setcover_to_directional(const SetCoverInstance& sc) {
  if (sc.universe_size < 1) throw invalid_parameter("universe must be non-empty");
  if (sc.subsets.empty()) throw invalid_parameter("need at least one subset");
  DirectionalInstance out;
  out.matrix.flavor = MatrixFlavor::binary;
  out.matrix.m = static_cast<int>(sc.subsets.size());
  out.matrix.z = sc.universe_size;
  out.matrix.dot_tolerance = 0.0;
  out.matrix.rows.resize(sc.subsets.size());
  for (std::size_t i = 0; i < sc.subsets.size(); ++i) {
    std::vector<int> sorted = sc.subsets[i];
    std::sort(sorted.begin(), sorted.end());
    for (int j : sorted) {
      if (j < 0 || j >= sc.universe_size) throw invalid_parameter("subset element out of range");
      out.matrix.rows[i].push_back({j, 1.0});
    }
  }
  out.budget = sc.budget;
  out.threshold = sc.universe_size;
  return out;
}

namespace detail {

template <class Visit>
inline void for_each_subset(int m, int k, const Visit& visit) {
  std::vector<int> stack;
  const std::function<bool(int)> descend = [&](int next) {
    if (!visit(stack)) return false;
    if (static_cast<int>(stack.size()) == k) return true;
    for (int i = next; i < m; ++i) {
      stack.push_back(i);
      const bool keep_going = descend(i + 1);
      stack.pop_back();
      if (!keep_going) return false;
    }
    return true;
  };
  descend(0);
}

inline void check_enumerable(int m, int k) {
  if (subset_budget(static_cast<std::size_t>(m), std::min(k, m), 10'000'000) > 10'000'000)
    throw instance_too_large("brute force oracle limited to C(m,k) <= 1e7");
}

}  // namespace detail

/// Exhaustive decision for Set Cover itself (the reference answer).
inline bool brute_force_decide_setcover(const SetCoverInstance& sc) {
  const int m = static_cast<int>(sc.subsets.size());
  detail::check_enumerable(m, sc.budget);
  bool yes = false;
  detail::for_each_subset(m, std::min(sc.budget, m), [&](const std::vector<int>& pick) {
    std::vector<bool> covered(static_cast<std::size_t>(sc.universe_size), false);
    int count = 0;
    for (int i : pick)
      for (int e : sc.subsets[static_cast<std::size_t>(i)])
        if (!covered[static_cast<std::size_t>(e)]) {
          covered[static_cast<std::size_t>(e)] = true;
          ++count;
        }
    if (count == sc.universe_size) {
      yes = true;
      return false;  // stop enumerating
    }
    return true;
  });
  return yes;
}

/// Exhaustive decision for ROI-CTTOP: can <= budget projections cover at
/// least `threshold` voxels of the ROI?
inline bool brute_force_decide_cttop(const RoiCttopInstance& inst) {
  const int m = static_cast<int>(inst.projections.size());
  detail::check_enumerable(m, inst.budget);
  std::vector<bool> in_roi(static_cast<std::size_t>(inst.num_voxels), false);
  for (int v : inst.roi) in_roi[static_cast<std::size_t>(v)] = true;
  bool yes = inst.threshold <= 0;
  detail::for_each_subset(m, std::min(inst.budget, m), [&](const std::vector<int>& pick) {
    std::vector<bool> covered(static_cast<std::size_t>(inst.num_voxels), false);
    int count = 0;
    for (int i : pick)
      for (int v : inst.projections[static_cast<std::size_t>(i)])
        if (in_roi[static_cast<std::size_t>(v)] && !covered[static_cast<std::size_t>(v)]) {
          covered[static_cast<std::size_t>(v)] = true;
          ++count;
        }
    if (count >= inst.threshold) {
      yes = true;
      return false;
    }
    return true;
  });
  return yes;
}

/// Exhaustive decision for binary directional coverage: >= L covered
/// columns with <= k rows.
inline bool brute_force_decide_binary(const CoverageMatrix& matrix, int k, int threshold) {
  detail::check_enumerable(matrix.m, k);
  bool yes = threshold <= 0;
  detail::for_each_subset(matrix.m, std::min(k, matrix.m), [&](const std::vector<int>& pick) {
    std::vector<bool> covered(static_cast<std::size_t>(matrix.z), false);
    int count = 0;
    for (int i : pick)
      for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)])
        if (e.value > 0.0 && !covered[static_cast<std::size_t>(e.col)]) {
          covered[static_cast<std::size_t>(e.col)] = true;
          ++count;
        }
    if (count >= threshold) {
      yes = true;
      return false;
    }
    return true;
  });
  return yes;
}

/// Exhaustive decision for soft directional coverage:
/// sum_j min(1, sum_i A_ij x_i) >= theta with <= k rows.
inline bool brute_force_decide_soft(const CoverageMatrix& matrix, int k, double theta) {
  detail::check_enumerable(matrix.m, k);
  bool yes = theta <= 0.0;
  detail::for_each_subset(matrix.m, std::min(k, matrix.m), [&](const std::vector<int>& pick) {
    std::vector<double> gamma(static_cast<std::size_t>(matrix.z), 0.0);
    for (int i : pick)
      for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)]) {
        double& g = gamma[static_cast<std::size_t>(e.col)];
        g = std::min(1.0, g + e.value);
      }
    double total = 0.0;
    for (double g : gamma) total += g;
    if (total >= theta) {
      yes = true;
      return false;
    }
    return true;
  });
  return yes;
}

struct RandomSetCoverParams {
  int n_max = 10;
  int m_max = 10;
  int k_max = 4;
  double density = 0.35;  // element membership probability
  std::uint64_t seed = 0;
};

inline SetCoverInstance random_setcover(const RandomSetCoverParams& params) {
  if (params.n_max < 1 || params.m_max < 1 || params.k_max < 1)
    throw invalid_parameter("random_setcover bounds must be >= 1");
  std::mt19937_64 rng(params.seed ^ 0xd1b54a32d192ed03ULL);
  SetCoverInstance sc;
  sc.universe_size = static_cast<int>(uniform_int(rng, 1, params.n_max));
  const long m = uniform_int(rng, 1, params.m_max);
  sc.budget = static_cast<int>(uniform_int(rng, 1, params.k_max));
  sc.subsets.resize(static_cast<std::size_t>(m));
  for (auto& subset : sc.subsets)
    for (int e = 0; e < sc.universe_size; ++e)
      if (uniform_unit(rng) < params.density) subset.push_back(e);
  return sc;
}

/// One reduction-equivalence check: both reduced decisions and the soft
/// restriction must match the Set Cover answer.
struct EquivalenceOutcome {
  bool setcover = false;
  bool cttop = false;
  bool binary_directional = false;
  bool soft_directional = false;

  bool all_agree() const {
    return setcover == cttop && setcover == binary_directional && setcover == soft_directional;
  }
};

inline EquivalenceOutcome check_reduction_equivalence(const SetCoverInstance& sc) {
  EquivalenceOutcome out;
  out.setcover = brute_force_decide_setcover(sc);
  out.cttop = brute_force_decide_cttop(reduce_setcover_to_cttop(sc));
  const DirectionalInstance dir = reduce_setcover_to_directional(sc);
  out.binary_directional = brute_force_decide_binary(dir.matrix, dir.budget, dir.threshold);
  out.soft_directional =
      brute_force_decide_soft(dir.matrix, dir.budget, static_cast<double>(dir.threshold));
  return out;
}

/// Batch equivalence driver for regression corpora.

struct ReduceReport {
  int total = 0;
  int agree = 0;
  std::vector<std::uint64_t> disagreeing_seeds;

  bool all_agree() const { return agree == total; }
};

inline ReduceReport run_reduce_batch(const RandomSetCoverParams& params, int count) {
  if (count < 1) throw invalid_parameter("need at least one instance");
  ReduceReport report;
  report.total = count;
  std::vector<int> outcomes(static_cast<std::size_t>(count), 0);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    RandomSetCoverParams p = params;
    p.seed = params.seed + i;
    outcomes[i] = check_reduction_equivalence(random_setcover(p)).all_agree() ? 1 : 0;
  });
  for (int i = 0; i < count; ++i) {
    if (outcomes[static_cast<std::size_t>(i)])
      ++report.agree;
    else
      report.disagreeing_seeds.push_back(params.seed + static_cast<std::uint64_t>(i));
  }
  return report;
}


}  // namespace tuycover

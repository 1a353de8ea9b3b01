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

#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/coverage.hpp"
#include "tuycover/exact.hpp"
#include "tuycover/greedy.hpp"

namespace tuycover {

/// Group of nearby ROIs represented by their centroid and an inflated
/// radius that conservatively contains every member sphere.
struct Cluster {
  std::vector<int> members;  // ROI indices, ascending
  Vec3 centroid_mm;
  double effective_radius_mm = 0.0;
  double weight = 1.0;
  std::shared_ptr<const CoverageMatrix> matrix;  // unbuilt until attached
};

enum class FusionWeighting { distance_weighted, uniform, none };

/// Single-linkage grouping of ROI centers under pairwise distance <=
/// d_fuse. d_fuse = 0 disables fusion (every ROI its own cluster). The
/// inflated radius uses the largest member radius, so heterogeneous ROI
/// sizes stay conservatively covered.
inline std::vector<Cluster> fuse_rois(const std::vector<Roi>& rois, double d_fuse) {
  if (rois.empty()) throw invalid_parameter("fuse_rois needs at least one ROI");
  if (d_fuse < 0.0) throw invalid_parameter("d_fuse must be non-negative");
  const int q = static_cast<int>(rois.size());

  std::vector<int> parent(static_cast<std::size_t>(q));
  std::iota(parent.begin(), parent.end(), 0);
  const std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };
  if (d_fuse > 0.0) {
    for (int a = 0; a < q; ++a)
      for (int b = a + 1; b < q; ++b)
        if (norm(rois[static_cast<std::size_t>(a)].center_mm -
                 rois[static_cast<std::size_t>(b)].center_mm) <= d_fuse) {
          const int ra = find(a), rb = find(b);
          if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
        }
  }

  std::vector<Cluster> clusters;
  std::vector<int> root_to_cluster(static_cast<std::size_t>(q), -1);
  for (int a = 0; a < q; ++a) {
    const int r = find(a);
    if (root_to_cluster[static_cast<std::size_t>(r)] < 0) {
      root_to_cluster[static_cast<std::size_t>(r)] = static_cast<int>(clusters.size());
      clusters.push_back({});
    }
    clusters[static_cast<std::size_t>(root_to_cluster[static_cast<std::size_t>(r)])]
        .members.push_back(a);
  }

  for (Cluster& c : clusters) {
    Vec3 centroid;
    for (int idx : c.members) centroid += rois[static_cast<std::size_t>(idx)].center_mm;
    c.centroid_mm = centroid / static_cast<double>(c.members.size());
    double max_dist = 0.0, max_radius = 0.0;
    for (int idx : c.members) {
      max_dist =
          std::max(max_dist, norm(rois[static_cast<std::size_t>(idx)].center_mm - c.centroid_mm));
      max_radius = std::max(max_radius, rois[static_cast<std::size_t>(idx)].radius_mm);
    }
    c.effective_radius_mm = max_radius + max_dist;
    c.weight = 1.0;
  }
  return clusters;
}

/// Clusters plus a shared budget and weighting strategy;
/// distance_weighted sets w_c = |members|, uniform merges everything into
/// one cluster, none keeps singleton clusters at unit weight.
struct JointInstance {
  std::vector<Cluster> clusters;
  int k = 1;
  FusionWeighting weighting = FusionWeighting::distance_weighted;
};

/// Groups ROIs per the weighting strategy and attaches per-cluster
/// matrices. Each cluster derives its own grid (tolerance and z from the
/// inflated radius) and its mask is the conjunction of member masks
/// supplied by `member_mask`.
inline JointInstance build_joint_instance(
    const std::vector<Roi>& rois, double d_fuse, FusionWeighting weighting, int k,
    const SourceSet& sources, double f_min_mm, std::optional<int> z_override,
    const std::function<ValidityMask(const Roi&)>& member_mask) {
  JointInstance instance;
  instance.k = k;
  instance.weighting = weighting;

  switch (weighting) {
    case FusionWeighting::none:
      instance.clusters = fuse_rois(rois, 0.0);
      break;
    case FusionWeighting::uniform: {
      instance.clusters = fuse_rois(rois, 0.0);
      if (instance.clusters.size() > 1) {
        // Merge everything into one cluster regardless of spread.
        Cluster merged;
        for (int i = 0; i < static_cast<int>(rois.size()); ++i) merged.members.push_back(i);
        Vec3 centroid;
        for (const Roi& roi : rois) centroid += roi.center_mm;
        merged.centroid_mm = centroid / static_cast<double>(rois.size());
        double max_dist = 0.0, max_radius = 0.0;
        for (const Roi& roi : rois) {
          max_dist = std::max(max_dist, norm(roi.center_mm - merged.centroid_mm));
          max_radius = std::max(max_radius, roi.radius_mm);
        }
        merged.effective_radius_mm = max_radius + max_dist;
        instance.clusters = {merged};
      }
      instance.clusters.front().weight = 1.0;
      break;
    }
    case FusionWeighting::distance_weighted:
      instance.clusters = fuse_rois(rois, d_fuse);
      for (Cluster& c : instance.clusters) c.weight = static_cast<double>(c.members.size());
      break;
  }

  for (Cluster& c : instance.clusters) {
    std::vector<ValidityMask> member_masks;
    for (int idx : c.members) member_masks.push_back(member_mask(rois[static_cast<std::size_t>(idx)]));
    auto mask = std::make_shared<ValidityMask>(combine_masks(member_masks));
    auto grid = std::make_shared<DirectionGrid>(
        make_direction_grid(f_min_mm, c.effective_radius_mm, z_override));
    const Roi cluster_roi{c.centroid_mm, c.effective_radius_mm};
    c.matrix = std::make_shared<CoverageMatrix>(
        build_matrix(MatrixFlavor::soft, sources, cluster_roi, grid, mask));
  }
  return instance;
}

inline void require_built(const JointInstance& instance) {
  if (instance.clusters.empty()) throw invalid_parameter("joint instance has no clusters");
  int m = -1;
  for (const Cluster& c : instance.clusters) {
    if (!c.matrix) throw invalid_parameter("cluster matrix not built");
    if (m < 0) m = c.matrix->m;
    if (c.matrix->m != m) throw invalid_parameter("cluster matrices disagree on candidate count");
  }
}

/// Weighted joint objective sum_c w_c * f_sat^c at a chosen set.
inline double evaluate_joint_objective(const JointInstance& instance, std::span<const int> chosen,
                                       std::vector<double>* per_cluster = nullptr) {
  require_built(instance);
  std::vector<const CoverageMatrix*> mats;
  std::vector<double> weights;
  for (const Cluster& c : instance.clusters) {
    mats.push_back(c.matrix.get());
    weights.push_back(c.weight);
  }
  return detail::flat_evaluate(detail::flatten(mats, weights), chosen, per_cluster);
}

/// Greedy on the weighted joint gain; submodularity carries over since the
/// objective is a non-negative weighted sum of saturated coverages.
inline Selection joint_greedy_select(const JointInstance& instance, int k) {
  require_built(instance);
  if (k < 1) throw invalid_parameter("greedy budget must be >= 1");
  std::vector<const CoverageMatrix*> mats;
  std::vector<double> weights;
  for (const Cluster& c : instance.clusters) {
    mats.push_back(c.matrix.get());
    weights.push_back(c.weight);
  }
  const detail::FlatInstance flat = detail::flatten(mats, weights);

  Selection sel;
  sel.budget = k;
  sel.flavor = MatrixFlavor::soft;
  std::vector<double> gamma(static_cast<std::size_t>(flat.total_cols), 0.0);
  std::vector<bool> taken(static_cast<std::size_t>(flat.m), false);
  const int steps = std::min(k, flat.m);
  for (int step = 0; step < steps; ++step) {
    int best = -1;
    double best_gain = 0.0;
    for (int i = 0; i < flat.m; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double gain = detail::flat_gain(flat, gamma, i);
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best < 0) break;
    taken[static_cast<std::size_t>(best)] = true;
    sel.chosen.push_back(best);
    sel.per_step_gains.push_back(best_gain);
    detail::flat_apply(flat, gamma, best);
  }
  sel.objective = detail::flat_evaluate(flat, sel.chosen);
  return sel;
}

/// Certified joint solve with selection variables shared across clusters.
inline ExactResult joint_exact_select(const JointInstance& instance, const SolveOptions& opts = {},
                                      const Selection* warm_start = nullptr) {
  require_built(instance);
  std::vector<const CoverageMatrix*> mats;
  std::vector<double> weights;
  for (const Cluster& c : instance.clusters) {
    mats.push_back(c.matrix.get());
    weights.push_back(c.weight);
  }
  std::span<const int> warm;
  if (warm_start) warm = warm_start->chosen;
  return detail::solve_max_saturated(detail::flatten(mats, weights), instance.k, opts, warm);
}

}  // namespace tuycover

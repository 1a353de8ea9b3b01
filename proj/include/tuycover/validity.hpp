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

#include <cstddef>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/geometry.hpp"
#include "tuycover/scene.hpp"

namespace tuycover {

/// Per-source admissibility for one ROI: a source is valid iff the projected
/// ROI disk fits on the panel and fewer than a fraction eta of its patch
/// pixels absorb above alpha (strict rho < eta).
struct ValidityMask {
  std::vector<bool> valid;
  std::vector<double> rho;          // 1.0 when the geometric check failed
  std::vector<bool> geometric_ok;
  double alpha = 1.0;
  double eta = 0.25;

  int size() const { return static_cast<int>(valid.size()); }

  int count_valid() const {
    int n = 0;
    for (bool v : valid) n += v ? 1 : 0;
    return n;
  }

  double mean_validity() const {
    return valid.empty() ? 0.0 : static_cast<double>(count_valid()) / valid.size();
  }
};

/// Conservative containment test: the projected ROI bounding disk (pinhole
/// center, radius r * sdd / axial distance) must lie entirely inside the
/// panel rectangle.
inline bool geometric_check(const Detector& det, const Vec3& source, const Vec3& isocenter,
                            const Roi& roi) {
  if (source == roi.center_mm) throw geometry_error("source coincides with the ROI center");
  const DetectorFrame frame = detector_frame(source, isocenter, det.sdd_mm);
  const double depth = dot(roi.center_mm - source, frame.w);
  if (depth <= roi.radius_mm)
    throw geometry_error("source is inside or behind the ROI sphere");
  const auto [cu, cv] = project_to_panel(frame, source, det.sdd_mm, roi.center_mm);
  const double proj_radius = roi.radius_mm * det.sdd_mm / depth;
  return cu - proj_radius >= -det.half_width_u() && cu + proj_radius <= det.half_width_u() &&
         cv - proj_radius >= -det.half_width_v() && cv + proj_radius <= det.half_width_v();
}

struct AttenuationCheck {
  double rho = 1.0;
  bool valid = false;
};

inline AttenuationCheck attenuation_check(const RoiPatch& patch, double alpha, double eta) {
  if (patch.empty()) throw invalid_parameter("attenuation_check on an empty patch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw invalid_parameter("alpha must lie in [0,1]");
  if (!(eta > 0.0 && eta <= 1.0)) throw invalid_parameter("eta must lie in (0,1]");
  std::size_t over = 0;
  for (double a : patch.absorption)
    if (a > alpha) ++over;
  AttenuationCheck out;
  out.rho = static_cast<double>(over) / static_cast<double>(patch.size());
  out.valid = out.rho < eta;
  return out;
}

/// Patches for all (source, roi) pairs. Entries stay empty when the
/// geometric check fails or the projection hits no pixel.
inline std::vector<RoiPatch> project_all_patches(const VoxelVolume& vol, const Detector& det,
                                                 const Vec3& isocenter, const SourceSet& sources,
                                                 const Roi& roi) {
  std::vector<RoiPatch> patches(sources.positions.size());
  parallel_for(sources.positions.size(), [&](std::size_t i) {
    const Vec3& s = sources.positions[i];
    if (!geometric_check(det, s, isocenter, roi)) return;
    patches[i] = project_roi_patch(vol, det, s, isocenter, roi);
  });
  return patches;
}

/// Nearest-rank percentile of pooled ROI-pixel absorption over all
/// geometry-valid (source, ROI) pairs of the unoccluded baseline.
inline double calibrate_alpha(const VoxelVolume& baseline, const Detector& det,
                              const Vec3& isocenter, const SourceSet& sources,
                              const std::vector<Roi>& rois, double percentile) {
  if (!(percentile > 0.0 && percentile < 1.0))
    throw invalid_parameter("calibration percentile must lie in (0,1)");
  std::vector<double> pooled;
  for (const Roi& roi : rois) {
    const std::vector<RoiPatch> patches = project_all_patches(baseline, det, isocenter, sources, roi);
    for (const RoiPatch& patch : patches)
      pooled.insert(pooled.end(), patch.absorption.begin(), patch.absorption.end());
  }
  if (pooled.empty())
    throw calibration_error("no geometry-valid (source, ROI) pairs to calibrate on");
  return nearest_rank_quantile(std::move(pooled), percentile);
}

/// Per-ROI variant of the calibration, same quantile rule.
inline std::vector<double> calibrate_alpha_per_roi(const VoxelVolume& baseline,
                                                   const Detector& det, const Vec3& isocenter,
                                                   const SourceSet& sources,
                                                   const std::vector<Roi>& rois,
                                                   double percentile) {
  std::vector<double> alphas;
  for (const Roi& roi : rois)
    alphas.push_back(calibrate_alpha(baseline, det, isocenter, sources, {roi}, percentile));
  return alphas;
}

inline ValidityMask mask_from_patches(const std::vector<RoiPatch>& patches, double alpha,
                                      double eta) {
  ValidityMask mask;
  mask.alpha = alpha;
  mask.eta = eta;
  mask.valid.resize(patches.size());
  mask.rho.resize(patches.size());
  mask.geometric_ok.resize(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].empty()) {
      mask.geometric_ok[i] = false;
      mask.rho[i] = 1.0;
      mask.valid[i] = false;
      continue;
    }
    const AttenuationCheck check = attenuation_check(patches[i], alpha, eta);
    mask.geometric_ok[i] = true;
    mask.rho[i] = check.rho;
    mask.valid[i] = check.valid;
  }
  return mask;
}

inline ValidityMask build_validity_mask(const VoxelVolume& vol, const Detector& det,
                                        const Vec3& isocenter, const SourceSet& sources,
                                        const Roi& roi, double alpha, double eta) {
  return mask_from_patches(project_all_patches(vol, det, isocenter, sources, roi), alpha, eta);
}

/// Conjunction mask: valid for all members simultaneously. rho keeps the
/// worst member value per source.
inline ValidityMask combine_masks(const std::vector<ValidityMask>& members) {
  if (members.empty()) throw invalid_parameter("combine_masks needs at least one mask");
  ValidityMask out = members.front();
  for (std::size_t q = 1; q < members.size(); ++q) {
    const ValidityMask& m = members[q];
    if (m.size() != out.size()) throw invalid_parameter("mask sizes differ");
    for (int i = 0; i < out.size(); ++i) {
      out.valid[i] = out.valid[i] && m.valid[i];
      out.geometric_ok[i] = out.geometric_ok[i] && m.geometric_ok[i];
      out.rho[i] = std::max(out.rho[i], m.rho[i]);
    }
  }
  return out;
}

}  // namespace tuycover

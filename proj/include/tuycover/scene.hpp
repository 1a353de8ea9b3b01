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

#include <array>
#include <limits>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/geometry.hpp"

namespace tuycover {

constexpr double kAluminumMu = 0.416;  // mm^-1, ~36 keV
constexpr double kOccluderMu = 2.5;    // mm^-1, ~6x aluminum
constexpr double kOccluderThicknessMm = 14.0;

/// Isotropic voxel grid of linear attenuation coefficients (mm^-1).
struct VoxelVolume {
  std::array<int, 3> dims{0, 0, 0};
  double spacing_mm = 1.0;
  Vec3 origin_mm;  // position of the (0,0,0) voxel's low corner
  std::vector<float> mu;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(iy)) *
               static_cast<std::size_t>(dims[0]) +
           static_cast<std::size_t>(ix);
  }

  float& at(int ix, int iy, int iz) { return mu[index(ix, iy, iz)]; }
  float at(int ix, int iy, int iz) const { return mu[index(ix, iy, iz)]; }

  Vec3 min_corner() const { return origin_mm; }
  Vec3 max_corner() const {
    return origin_mm + Vec3{dims[0] * spacing_mm, dims[1] * spacing_mm, dims[2] * spacing_mm};
  }

  Vec3 voxel_center(int ix, int iy, int iz) const {
    return origin_mm +
           Vec3{(ix + 0.5) * spacing_mm, (iy + 0.5) * spacing_mm, (iz + 0.5) * spacing_mm};
  }

  bool contains(const Vec3& p) const {
    const Vec3 lo = min_corner(), hi = max_corner();
    return p.x >= lo.x && p.x < hi.x && p.y >= lo.y && p.y < hi.y && p.z >= lo.z && p.z < hi.z;
  }

  /// Nearest-neighbor lookup; zero outside the grid.
  double sample(const Vec3& p) const {
    const Vec3 rel = (p - origin_mm) / spacing_mm;
    const int ix = static_cast<int>(std::floor(rel.x));
    const int iy = static_cast<int>(std::floor(rel.y));
    const int iz = static_cast<int>(std::floor(rel.z));
    if (ix < 0 || iy < 0 || iz < 0 || ix >= dims[0] || iy >= dims[1] || iz >= dims[2]) return 0.0;
    return static_cast<double>(mu[index(ix, iy, iz)]);
  }
};

/// Flat panel, mounted perpendicular to the source->isocenter axis at
/// distance sdd_mm from the source.
struct Detector {
  int n_u = 256;
  int n_v = 256;
  double pitch_mm = 0.9;
  double sdd_mm = 4000.0;

  double half_width_u() const { return 0.5 * n_u * pitch_mm; }
  double half_width_v() const { return 0.5 * n_v * pitch_mm; }
};

/// Spherical region of interest.
struct Roi {
  Vec3 center_mm;
  double radius_mm = 1.0;
};

struct OccluderPlate {
  int axis = 0;  // 0=x, 1=y, 2=z
  Vec3 center_mm;
  Vec3 half_extents_mm;
  double mu_mm = kOccluderMu;
};

enum class PhantomPreset { block_with_voids, custom };
enum class OcclusionLevel { none = 0, mild = 1, moderate = 2, severe = 3 };

inline int occluder_count(OcclusionLevel level) {
  switch (level) {
    case OcclusionLevel::none: return 0;
    case OcclusionLevel::mild: return 2;
    case OcclusionLevel::moderate: return 4;
    case OcclusionLevel::severe: return 8;
  }
  throw invalid_parameter("unknown occlusion level");
}

namespace detail {

inline void fill_box(VoxelVolume& vol, const Vec3& lo, const Vec3& hi, float value) {
  for (int iz = 0; iz < vol.dims[2]; ++iz)
    for (int iy = 0; iy < vol.dims[1]; ++iy)
      for (int ix = 0; ix < vol.dims[0]; ++ix) {
        const Vec3 p = vol.voxel_center(ix, iy, iz);
        if (p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
            p.z <= hi.z)
          vol.at(ix, iy, iz) = value;
      }
}

inline void carve_sphere(VoxelVolume& vol, const Vec3& c, double r) {
  for (int iz = 0; iz < vol.dims[2]; ++iz)
    for (int iy = 0; iy < vol.dims[1]; ++iy)
      for (int ix = 0; ix < vol.dims[0]; ++ix) {
        const Vec3 d = vol.voxel_center(ix, iy, iz) - c;
        if (dot(d, d) <= r * r) vol.at(ix, iy, iz) = 0.0f;
      }
}

// Axis-aligned through-bore of radius r around (a,b) in the plane
// perpendicular to `axis`.
inline void carve_cylinder(VoxelVolume& vol, int axis, double a, double b, double r) {
  for (int iz = 0; iz < vol.dims[2]; ++iz)
    for (int iy = 0; iy < vol.dims[1]; ++iy)
      for (int ix = 0; ix < vol.dims[0]; ++ix) {
        const Vec3 p = vol.voxel_center(ix, iy, iz);
        double da = 0.0, db = 0.0;
        if (axis == 0) {
          da = p.y - a;
          db = p.z - b;
        } else if (axis == 1) {
          da = p.x - a;
          db = p.z - b;
        } else {
          da = p.x - a;
          db = p.y - b;
        }
        if (da * da + db * db <= r * r) vol.at(ix, iy, iz) = 0.0f;
      }
}

}  // namespace detail

/// Deterministic aluminum block with carved spherical and cylindrical voids,
/// centered on the isocenter. Block extents are kept small enough that no
/// through-metal path saturates the absorption map in double precision.
inline VoxelVolume generate_phantom(std::uint64_t seed,
                                    PhantomPreset preset = PhantomPreset::block_with_voids,
                                    std::array<int, 3> dims = {64, 64, 64},
                                    double spacing_mm = 2.0) {
  if (preset != PhantomPreset::block_with_voids)
    throw invalid_parameter("unknown phantom preset");
  for (int d : dims)
    if (d < 8) throw invalid_parameter("phantom volume is too small");
  if (!(spacing_mm > 0.0)) throw invalid_parameter("voxel spacing must be positive");

  VoxelVolume vol;
  vol.dims = dims;
  vol.spacing_mm = spacing_mm;
  vol.origin_mm = Vec3{-0.5 * dims[0] * spacing_mm, -0.5 * dims[1] * spacing_mm,
                       -0.5 * dims[2] * spacing_mm};
  vol.mu.assign(vol.voxel_count(), 0.0f);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Vec3 block_half{uniform_real(rng, 17.0, 23.0), uniform_real(rng, 17.0, 23.0),
                        uniform_real(rng, 15.0, 21.0)};
  detail::fill_box(vol, Vec3{} - block_half, block_half, static_cast<float>(kAluminumMu));

  // Central cavity.
  detail::carve_sphere(vol, Vec3{uniform_real(rng, -3.0, 3.0), uniform_real(rng, -3.0, 3.0),
                                 uniform_real(rng, -3.0, 3.0)},
                       uniform_real(rng, 6.0, 9.0));

  const long n_bores = uniform_int(rng, 2, 3);
  for (long i = 0; i < n_bores; ++i) {
    const int axis = static_cast<int>(uniform_int(rng, 0, 2));
    detail::carve_cylinder(vol, axis, uniform_real(rng, -10.0, 10.0),
                           uniform_real(rng, -10.0, 10.0), uniform_real(rng, 3.0, 5.0));
  }

  const long n_voids = uniform_int(rng, 3, 5);
  for (long i = 0; i < n_voids; ++i) {
    const Vec3 c{uniform_real(rng, -block_half.x * 0.7, block_half.x * 0.7),
                 uniform_real(rng, -block_half.y * 0.7, block_half.y * 0.7),
                 uniform_real(rng, -block_half.z * 0.7, block_half.z * 0.7)};
    detail::carve_sphere(vol, c, uniform_real(rng, 3.0, 6.0));
  }
  return vol;
}

/// Axis-aligned bounding box of all voxels with positive attenuation.
inline std::pair<Vec3, Vec3> object_bounding_box(const VoxelVolume& vol) {
  Vec3 lo = vol.max_corner(), hi = vol.min_corner();
  bool any = false;
  for (int iz = 0; iz < vol.dims[2]; ++iz)
    for (int iy = 0; iy < vol.dims[1]; ++iy)
      for (int ix = 0; ix < vol.dims[0]; ++ix)
        if (vol.at(ix, iy, iz) > 0.0f) {
          const Vec3 c = vol.voxel_center(ix, iy, iz);
          const double h = 0.5 * vol.spacing_mm;
          lo = Vec3{std::min(lo.x, c.x - h), std::min(lo.y, c.y - h), std::min(lo.z, c.z - h)};
          hi = Vec3{std::max(hi.x, c.x + h), std::max(hi.y, c.y + h), std::max(hi.z, c.z + h)};
          any = true;
        }
  if (!any) return {Vec3{}, Vec3{}};
  return {lo, hi};
}

/// Plate list for a level. Levels are cumulative (the mild plates are a
/// prefix of the severe ones), so tightening the level can only add
/// attenuation along any ray.
inline std::vector<OccluderPlate> occluder_plates(const VoxelVolume& vol, OcclusionLevel level,
                                                  std::uint64_t seed) {
  const int count = occluder_count(level);
  if (count == 0) return {};

  const auto [obj_lo, obj_hi] = object_bounding_box(vol);
  const Vec3 vol_lo = vol.min_corner(), vol_hi = vol.max_corner();
  const double gap = 2.0 * vol.spacing_mm;
  const double thick = kOccluderThicknessMm;

  std::mt19937_64 rng(seed ^ 0x7f4a7c159e3779b9ULL);
  const double jitter = uniform_real(rng, -1.5, 1.5);

  struct FaceSpec {
    int axis;
    int sign;
    double a_lo, a_hi;  // window along the first lateral axis, mm
    double b_lo, b_hi;  // window along the second lateral axis, mm
  };
  // Face order and lateral windows picked so each pair of added plates
  // shadows a fresh band of candidate directions without emptying the
  // valid set.
  const std::array<FaceSpec, 8> faces{{{0, +1, -18.0, 0.0, -16.0, 16.0},
                                       {0, -1, 0.0, 18.0, -16.0, 16.0},
                                       {1, +1, -18.0, 0.0, -16.0, 16.0},
                                       {1, -1, 0.0, 18.0, -16.0, 16.0},
                                       {2, +1, -18.0, 0.0, -16.0, 16.0},
                                       {2, -1, 0.0, 18.0, -16.0, 16.0},
                                       {0, +1, 0.0, 18.0, -16.0, 16.0},
                                       {1, -1, -18.0, 0.0, -16.0, 16.0}}};

  std::vector<OccluderPlate> plates;
  for (int p = 0; p < count; ++p) {
    const FaceSpec& f = faces[static_cast<std::size_t>(p)];
    const double face_pos = f.sign > 0 ? obj_hi[f.axis] : obj_lo[f.axis];
    const double limit = f.sign > 0 ? vol_hi[f.axis] : vol_lo[f.axis];
    // push each plate as far from the object as the margin allows (up to
    // 14 mm beyond the mandatory gap) so its angular shadow stays narrow
    const double slack =
        std::max(0.0, std::abs(limit - face_pos) - gap - thick - (p >= 6 ? thick + gap : 0.0));
    const double near_edge = face_pos + f.sign * (gap + std::min(14.0, slack)) +
                             (p >= 6 ? f.sign * (thick + gap) : 0.0);
    const double far_edge = near_edge + f.sign * thick;
    if ((f.sign > 0 && far_edge > limit) || (f.sign < 0 && far_edge < limit))
      throw scene_error("occluder plate does not fit inside the volume");

    const int lat_a = (f.axis + 1) % 3;
    const int lat_b = (f.axis + 2) % 3;

    OccluderPlate plate;
    plate.axis = f.axis;
    plate.mu_mm = kOccluderMu;
    plate.center_mm[f.axis] = 0.5 * (near_edge + far_edge);
    plate.half_extents_mm[f.axis] = 0.5 * thick;
    plate.center_mm[lat_a] = 0.5 * (f.a_lo + f.a_hi) + jitter;
    plate.half_extents_mm[lat_a] = 0.5 * (f.a_hi - f.a_lo);
    plate.center_mm[lat_b] = 0.5 * (f.b_lo + f.b_hi);
    plate.half_extents_mm[lat_b] = 0.5 * (f.b_hi - f.b_lo);
    if (plate.center_mm[lat_a] - plate.half_extents_mm[lat_a] < vol_lo[lat_a] ||
        plate.center_mm[lat_a] + plate.half_extents_mm[lat_a] > vol_hi[lat_a] ||
        plate.center_mm[lat_b] - plate.half_extents_mm[lat_b] < vol_lo[lat_b] ||
        plate.center_mm[lat_b] + plate.half_extents_mm[lat_b] > vol_hi[lat_b])
      throw scene_error("occluder plate does not fit inside the volume");
    plates.push_back(plate);
  }
  return plates;
}

/// Copy of `vol` with the level's occluder plates stamped in at
/// mu = 2.5 mm^-1. Object voxels are untouched.
inline VoxelVolume apply_occlusion(const VoxelVolume& vol, OcclusionLevel level,
                                   std::uint64_t seed) {
  VoxelVolume out = vol;
  for (const OccluderPlate& plate : occluder_plates(vol, level, seed)) {
    const Vec3 lo = plate.center_mm - plate.half_extents_mm;
    const Vec3 hi = plate.center_mm + plate.half_extents_mm;
    for (int iz = 0; iz < out.dims[2]; ++iz)
      for (int iy = 0; iy < out.dims[1]; ++iy)
        for (int ix = 0; ix < out.dims[0]; ++ix) {
          const Vec3 p = out.voxel_center(ix, iy, iz);
          if (p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
              p.z <= hi.z && out.at(ix, iy, iz) == 0.0f)
            out.at(ix, iy, iz) = static_cast<float>(plate.mu_mm);
        }
  }
  return out;
}

/// Orthonormal panel frame for one source: w is the principal axis
/// (source -> isocenter), u/v span the panel.
struct DetectorFrame {
  Vec3 u, v, w;
  Vec3 center;  // panel center in world coordinates
};

inline DetectorFrame detector_frame(const Vec3& source, const Vec3& isocenter, double sdd_mm) {
  const Vec3 axis = isocenter - source;
  if (norm(axis) == 0.0) throw geometry_error("source coincides with the isocenter");
  DetectorFrame f;
  f.w = normalized(axis);
  Vec3 up = cross(Vec3{0.0, 0.0, 1.0}, f.w);
  if (norm(up) < 1e-9) up = cross(Vec3{1.0, 0.0, 0.0}, f.w);
  f.u = normalized(up);
  f.v = cross(f.w, f.u);
  f.center = source + f.w * sdd_mm;
  return f;
}

/// Pinhole projection of a world point onto panel coordinates (u, v).
inline std::pair<double, double> project_to_panel(const DetectorFrame& f, const Vec3& source,
                                                  double sdd_mm, const Vec3& p) {
  const double depth = dot(p - source, f.w);
  if (depth <= 0.0) throw geometry_error("point does not project onto the panel");
  const Vec3 hit = source + (p - source) * (sdd_mm / depth);
  return {dot(hit - f.center, f.u), dot(hit - f.center, f.v)};
}

namespace detail {

// Ray/AABB clip; returns false when the ray misses the box.
inline bool clip_to_box(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi,
                        double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - origin[a]) / dir[a];
    double tb = (hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 < t1;
}

}  // namespace detail

/// Attenuation line integral along source + t*dir, marched at half-voxel
/// steps with nearest-neighbor lookups.
inline double line_integral(const VoxelVolume& vol, const Vec3& source, const Vec3& dir_unit) {
  double t0 = 0.0, t1 = 0.0;
  if (!detail::clip_to_box(source, dir_unit, vol.min_corner(), vol.max_corner(), t0, t1))
    return 0.0;
  const double step = 0.5 * vol.spacing_mm;
  const int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step)));
  const double h = (t1 - t0) / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = source + dir_unit * (t0 + (i + 0.5) * h);
    acc += vol.sample(p) * h;
  }
  return acc;
}

/// Absorption values 1 - exp(-integral mu dl) for every detector pixel whose
/// ray intersects the ROI sphere. Pixels outside the projected ROI are
/// excluded; an empty patch signals geometric invalidity to the caller.
struct RoiPatch {
  std::vector<double> absorption;

  bool empty() const { return absorption.empty(); }
  std::size_t size() const { return absorption.size(); }
};

inline RoiPatch project_roi_patch(const VoxelVolume& vol, const Detector& det, const Vec3& source,
                                  const Vec3& isocenter, const Roi& roi) {
  if (vol.contains(source)) throw geometry_error("source lies inside the volume");
  const DetectorFrame frame = detector_frame(source, isocenter, det.sdd_mm);
  const double depth = dot(roi.center_mm - source, frame.w);
  if (depth <= roi.radius_mm)
    throw geometry_error("source is inside or behind the ROI sphere");

  const auto [cu, cv] = project_to_panel(frame, source, det.sdd_mm, roi.center_mm);
  const double proj_radius = roi.radius_mm * det.sdd_mm / depth;

  const auto pixel_range = [&](double c, int n) {
    const int lo = static_cast<int>(std::floor((c - proj_radius) / det.pitch_mm + 0.5 * n)) - 1;
    const int hi = static_cast<int>(std::ceil((c + proj_radius) / det.pitch_mm + 0.5 * n)) + 1;
    return std::pair<int, int>{std::max(0, lo), std::min(n, hi)};
  };
  const auto [iu_lo, iu_hi] = pixel_range(cu, det.n_u);
  const auto [iv_lo, iv_hi] = pixel_range(cv, det.n_v);

  const Vec3 roi_offset = roi.center_mm - source;
  const double roi_dist2 = dot(roi_offset, roi_offset);

  RoiPatch patch;
  for (int iv = iv_lo; iv < iv_hi; ++iv) {
    const double coord_v = (iv + 0.5 - 0.5 * det.n_v) * det.pitch_mm;
    for (int iu = iu_lo; iu < iu_hi; ++iu) {
      const double coord_u = (iu + 0.5 - 0.5 * det.n_u) * det.pitch_mm;
      const Vec3 pixel = frame.center + frame.u * coord_u + frame.v * coord_v;
      const Vec3 dir = normalized(pixel - source);
      const double along = dot(roi_offset, dir);
      if (along <= 0.0) continue;
      const double miss2 = roi_dist2 - along * along;
      if (miss2 > roi.radius_mm * roi.radius_mm) continue;
      patch.absorption.push_back(1.0 - std::exp(-line_integral(vol, source, dir)));
    }
  }
  return patch;
}

/// The physical world of one run: volume, panel, and targets.
struct Scene {
  VoxelVolume volume;
  Detector detector;
  Vec3 isocenter;
  std::vector<Roi> rois;
};

inline void validate_rois(const Scene& scene) {
  const Vec3 lo = scene.volume.min_corner(), hi = scene.volume.max_corner();
  for (const Roi& roi : scene.rois) {
    if (!(roi.radius_mm > 0.0)) throw scene_error("ROI radius must be positive");
    if (roi.center_mm.x - roi.radius_mm < lo.x || roi.center_mm.x + roi.radius_mm > hi.x ||
        roi.center_mm.y - roi.radius_mm < lo.y || roi.center_mm.y + roi.radius_mm > hi.y ||
        roi.center_mm.z - roi.radius_mm < lo.z || roi.center_mm.z + roi.radius_mm > hi.z)
      throw scene_error("ROI sphere extends outside the volume bounds");
  }
}

}  // namespace tuycover

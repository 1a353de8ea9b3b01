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
#include <optional>
#include <vector>

#include "tuycover/common.hpp"

namespace tuycover {

/// Unit vector on the sphere of Radon plane normals. Sign-ambiguous
/// downstream (mu and -mu name the same plane).
struct Direction {
  Vec3 unit;

  static Direction from_unit(const Vec3& v) {
    const double n = norm(v);
    if (std::abs(n - 1.0) > 1e-12)
      throw invalid_parameter("direction vector is not unit length");
    return Direction{v};
  }

  static Direction of(const Vec3& v) { return Direction{normalized(v)}; }
};

/// Maximum admissible angular miss for resolving features of size f_min
/// inside a sphere of radius r: f_min / (2 r). Values >= pi/2 would make
/// the coverage band span the whole sphere and are rejected.
inline double angular_tolerance(double f_min_mm, double roi_radius_mm) {
  if (!(f_min_mm > 0.0) || !(roi_radius_mm > 0.0))
    throw invalid_parameter("angular_tolerance requires positive f_min and radius");
  const double tol = f_min_mm / (2.0 * roi_radius_mm);
  if (tol >= std::numbers::pi / 2.0)
    throw invalid_parameter("angular tolerance >= pi/2 is nonphysical");
  return tol;
}

/// Spherical-cap estimate of the direction count needed at that tolerance:
/// ceil(16 r^2 / f_min^2), clamped below at 16.
inline int required_directions(double f_min_mm, double roi_radius_mm) {
  if (!(f_min_mm > 0.0) || !(roi_radius_mm > 0.0))
    throw invalid_parameter("required_directions requires positive f_min and radius");
  const double raw = 16.0 * roi_radius_mm * roi_radius_mm / (f_min_mm * f_min_mm);
  const double z = std::ceil(raw);
  if (z < 16.0) return 16;
  if (z > 100'000'000.0) throw invalid_parameter("required direction count is absurdly large");
  return static_cast<int>(z);
}

/// Golden-angle lattice: point i of z uses cos(theta_i) = 1 - 2(i+0.5)/z and
/// longitude phi_i = 2 pi i (1 - 1/phi). Pole-free and deterministic.
inline std::vector<Direction> fibonacci_sphere(int z) {
  if (z < 1) throw invalid_parameter("fibonacci_sphere requires z >= 1");
  constexpr double golden = 1.6180339887498948482;
  const double phi_step = 2.0 * std::numbers::pi * (1.0 - 1.0 / golden);
  std::vector<Direction> out;
  out.reserve(static_cast<std::size_t>(z));
  for (int i = 0; i < z; ++i) {
    const double c = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(z);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double phi = phi_step * static_cast<double>(i);
    out.push_back(Direction{{s * std::cos(phi), s * std::sin(phi), c}});
  }
  return out;
}

/// Quasi-uniform sample of plane normals with its Nyquist tolerance.
struct DirectionGrid {
  std::vector<Direction> directions;
  double tolerance_rad = 0.0;   // Delta-gamma
  double dot_tolerance = 0.0;   // tau = sin(Delta-gamma)
  double f_min_mm = 0.0;
  double roi_radius_mm = 0.0;

  int size() const { return static_cast<int>(directions.size()); }
};

inline DirectionGrid make_direction_grid(double f_min_mm, double roi_radius_mm,
                                         std::optional<int> z_override = std::nullopt) {
  DirectionGrid grid;
  grid.tolerance_rad = angular_tolerance(f_min_mm, roi_radius_mm);
  grid.dot_tolerance = std::sin(grid.tolerance_rad);
  grid.f_min_mm = f_min_mm;
  grid.roi_radius_mm = roi_radius_mm;
  int z = required_directions(f_min_mm, roi_radius_mm);
  if (z_override) {
    if (*z_override < 1) throw invalid_parameter("direction grid override must be >= 1");
    z = *z_override;
  }
  grid.directions = fibonacci_sphere(z);
  return grid;
}

/// Candidate X-ray source positions on a sphere around the isocenter.
struct SourceSet {
  std::vector<Vec3> positions;
  double radius_mm = 0.0;
  Vec3 isocenter;

  int size() const { return static_cast<int>(positions.size()); }
};

inline SourceSet fibonacci_source_sphere(int m, double radius_mm, Vec3 isocenter = {}) {
  if (m < 1) throw invalid_parameter("fibonacci_source_sphere requires m >= 1");
  if (!(radius_mm > 0.0)) throw invalid_parameter("source sphere radius must be positive");
  SourceSet set;
  set.radius_mm = radius_mm;
  set.isocenter = isocenter;
  set.positions.reserve(static_cast<std::size_t>(m));
  for (const Direction& d : fibonacci_sphere(m))
    set.positions.push_back(isocenter + d.unit * radius_mm);
  return set;
}

}  // namespace tuycover

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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tuycover {

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class invalid_parameter : public error {
 public:
  using error::error;
};

class geometry_error : public error {
 public:
  using error::error;
};

class scene_error : public error {
 public:
  using error::error;
};

class calibration_error : public error {
 public:
  using error::error;
};

class config_error : public error {
 public:
  using error::error;
};

class infeasible_scene : public error {
 public:
  using error::error;
};

class instance_too_large : public error {
 public:
  using error::error;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

  double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
  double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (n == 0.0) throw geometry_error("cannot normalize a zero-length vector");
  return a / n;
}

/// Nearest-rank quantile: the ceil(p*n)-th smallest value, p in (0,1).
inline double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw invalid_parameter("quantile of an empty sample");
  if (!(p > 0.0 && p < 1.0)) throw invalid_parameter("quantile p must lie in (0,1)");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<long>(values.size());
  long rank = static_cast<long>(std::ceil(p * static_cast<double>(n)));
  rank = std::clamp(rank, 1L, n);
  return values[static_cast<std::size_t>(rank - 1)];
}

// Engine-portable draws (std::uniform_*_distribution is implementation
// defined, which would break cross-toolchain determinism of seeds).
template <class Engine>
inline double uniform_unit(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

template <class Engine>
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
  return bound == 0 ? 0 : eng() % bound;
}

template <class Engine>
inline long uniform_int(Engine& eng, long lo, long hi) {
  if (hi < lo) throw invalid_parameter("uniform_int: empty range");
  return lo + static_cast<long>(uniform_below(eng, static_cast<std::uint64_t>(hi - lo + 1)));
}

template <class Engine>
inline double uniform_real(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(eng);
}

inline int worker_count() {
  if (const char* env = std::getenv("TUYCOVER_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n). Results must be written to disjoint,
/// preallocated slots so the outcome is independent of the worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = static_cast<std::size_t>(w); i < n;
           i += static_cast<std::size_t>(workers))
        fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// C(n, k) saturated at `cap` so callers can test enumeration budgets
/// without overflow.
inline std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    if (result > cap) return cap + 1;
    const __uint128_t next = static_cast<__uint128_t>(result) * (n - k + i) / i;
    if (next > cap) return cap + 1;
    result = static_cast<std::uint64_t>(next);
  }
  return result;
}

/// Total count of non-empty subsets of size <= k, saturated at `cap`.
inline std::uint64_t subset_budget(std::size_t n, int k, std::uint64_t cap) {
  std::uint64_t total = 0;
  for (int t = 1; t <= k; ++t) {
    const std::uint64_t c =
        binomial_capped(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(t), cap);
    if (c > cap || cap - total < c) return cap + 1;
    total += c;
  }
  return total;
}

}  // namespace tuycover

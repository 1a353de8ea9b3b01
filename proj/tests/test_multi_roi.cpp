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

#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "tuycover/multi_roi.hpp"

using namespace tuycover;

namespace {

ValidityMask permissive(int m) {
  ValidityMask mask;
  mask.valid.assign(static_cast<std::size_t>(m), true);
  mask.geometric_ok.assign(static_cast<std::size_t>(m), true);
  mask.rho.assign(static_cast<std::size_t>(m), 0.0);
  return mask;
}

JointInstance synthetic_joint(std::vector<CoverageMatrix> matrices, std::vector<double> weights,
                              int k) {
  JointInstance instance;
  instance.k = k;
  for (std::size_t c = 0; c < matrices.size(); ++c) {
    Cluster cluster;
    cluster.members = {static_cast<int>(c)};
    cluster.weight = weights[c];
    cluster.matrix = std::make_shared<CoverageMatrix>(std::move(matrices[c]));
    instance.clusters.push_back(cluster);
  }
  return instance;
}

}  // namespace

TEST_CASE("fuse_rois groups by single linkage") {
  const Roi a{Vec3{0.0, 0.0, 0.0}, 5.0};
  const Roi b{Vec3{20.0, 0.0, 0.0}, 5.0};
  const Roi c{Vec3{80.0, 0.0, 0.0}, 5.0};

  // one ROI: singleton with its own radius
  const auto single = fuse_rois({a}, 30.0);
  REQUIRE(single.size() == 1);
  CHECK(single[0].effective_radius_mm == Catch::Approx(5.0));
  CHECK(single[0].centroid_mm == a.center_mm);

  // 20 mm apart under d_fuse=30: one cluster, centroid at the midpoint,
  // inflated radius 5 + 10
  const auto fused = fuse_rois({a, b}, 30.0);
  REQUIRE(fused.size() == 1);
  CHECK(fused[0].centroid_mm == Vec3{10.0, 0.0, 0.0});
  CHECK(fused[0].effective_radius_mm == Catch::Approx(15.0));
  CHECK(fused[0].members == std::vector<int>{0, 1});

  // 60 mm apart: two clusters
  const auto split = fuse_rois({b, c}, 30.0);
  CHECK(split.size() == 2);

  // d_fuse = 0: no fusion
  CHECK(fuse_rois({a, b, c}, 0.0).size() == 3);

  // chained linkage: a-b and b-c within threshold merges all three
  const Roi mid{Vec3{40.0, 0.0, 0.0}, 5.0};
  CHECK(fuse_rois({a, mid, c}, 45.0).size() == 1);

  CHECK_THROWS_AS(fuse_rois({}, 10.0), invalid_parameter);
  CHECK_THROWS_AS(fuse_rois({a}, -1.0), invalid_parameter);
}

TEST_CASE("cluster spheres contain every member sphere") {
  std::mt19937_64 rng(741);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Roi> rois;
    const long q = uniform_int(rng, 2, 6);
    for (long i = 0; i < q; ++i)
      rois.push_back({Vec3{uniform_real(rng, -30.0, 30.0), uniform_real(rng, -30.0, 30.0),
                           uniform_real(rng, -30.0, 30.0)},
                      uniform_real(rng, 2.0, 8.0)});
    const double d_fuse = uniform_real(rng, 0.0, 50.0);
    for (const Cluster& cl : fuse_rois(rois, d_fuse)) {
      for (int idx : cl.members) {
        const Roi& roi = rois[static_cast<std::size_t>(idx)];
        CHECK(norm(roi.center_mm - cl.centroid_mm) + roi.radius_mm <=
              cl.effective_radius_mm + 1e-9);
      }
    }
    // cluster count non-increasing in d_fuse
    CHECK(fuse_rois(rois, d_fuse).size() >= fuse_rois(rois, d_fuse + 10.0).size());
  }
}

TEST_CASE("joint instance construction derives per-cluster grids and masks") {
  const SourceSet sources = fibonacci_source_sphere(24, 300.0, Vec3{});
  std::vector<Roi> rois{{Vec3{0.0, 0.0, 0.0}, 6.0}, {Vec3{14.0, 0.0, 0.0}, 6.0}};

  // member masks knock out different sources
  const auto member_mask = [&](const Roi& roi) {
    ValidityMask mask = permissive(24);
    const int block = roi.center_mm.x > 0.0 ? 3 : 5;
    mask.valid[static_cast<std::size_t>(block)] = false;
    return mask;
  };

  const JointInstance inst = build_joint_instance(
      rois, 30.0, FusionWeighting::distance_weighted, 4, sources, 4.0, 80, member_mask);
  REQUIRE(inst.clusters.size() == 1);
  const Cluster& cl = inst.clusters[0];
  CHECK(cl.weight == 2.0);  // |members|
  CHECK(cl.effective_radius_mm == Catch::Approx(13.0));
  // conjunction mask: both blocked sources are invalid
  CHECK_FALSE(cl.matrix->mask->valid[3]);
  CHECK_FALSE(cl.matrix->mask->valid[5]);
  CHECK(cl.matrix->z == 80);
  // per-cluster tolerance derives from the inflated radius
  CHECK(cl.matrix->grid->tolerance_rad == Catch::Approx(4.0 / (2.0 * 13.0)));

  // uniform: a single cluster at unit weight
  const JointInstance uni = build_joint_instance(
      rois, 0.0, FusionWeighting::uniform, 4, sources, 4.0, 80, member_mask);
  REQUIRE(uni.clusters.size() == 1);
  CHECK(uni.clusters[0].weight == 1.0);

  // none: singleton clusters at unit weight
  const JointInstance none = build_joint_instance(
      rois, 50.0, FusionWeighting::none, 4, sources, 4.0, 80, member_mask);
  REQUIRE(none.clusters.size() == 2);
  CHECK(none.clusters[0].weight == 1.0);
  CHECK(none.clusters[1].weight == 1.0);
}

TEST_CASE("single-cluster joint solve reduces to the single-matrix solve") {
  std::mt19937_64 rng(220);
  for (int trial = 0; trial < 20; ++trial) {
    CoverageMatrix matrix = oracle::random_soft_matrix(rng, 12, 30);
    const int k = static_cast<int>(uniform_int(rng, 1, 4));
    const ExactResult direct = exact_select(matrix, k);
    JointInstance inst = synthetic_joint({matrix}, {1.0}, k);
    const ExactResult joint = joint_exact_select(inst);
    CHECK(joint.chosen == direct.chosen);
    CHECK(joint.objective == direct.objective);
    REQUIRE(joint.per_cluster_objective.size() == 1);
    CHECK(joint.per_cluster_objective[0] == Catch::Approx(joint.objective).margin(1e-12));

    const Selection g_direct = greedy_select(matrix, k);
    const Selection g_joint = joint_greedy_select(inst, k);
    CHECK(g_joint.chosen == g_direct.chosen);
    CHECK(g_joint.objective == g_direct.objective);
  }
}

TEST_CASE("disjoint-support clusters add their optima under ample budget") {
  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 10; ++trial) {
    // two synthetic matrices over disjoint candidate support
    const int m = 10;
    CoverageMatrix a, b;
    a.flavor = b.flavor = MatrixFlavor::soft;
    a.m = b.m = m;
    a.z = 6;
    b.z = 5;
    a.rows.resize(m);
    b.rows.resize(m);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < a.z; ++j)
        if (uniform_unit(rng) < 0.6)
          a.rows[static_cast<std::size_t>(i)].push_back({j, uniform_real(rng, 0.1, 1.0)});
    for (int i = 5; i < m; ++i)
      for (int j = 0; j < b.z; ++j)
        if (uniform_unit(rng) < 0.6)
          b.rows[static_cast<std::size_t>(i)].push_back({j, uniform_real(rng, 0.1, 1.0)});

    const int k = 8;  // ample: both 4-subsets fit
    const ExactResult opt_a = exact_select(a, 4);
    const ExactResult opt_b = exact_select(b, 4);
    JointInstance inst = synthetic_joint({a, b}, {1.0, 1.0}, k);
    const ExactResult joint = joint_exact_select(inst);
    CHECK(joint.objective >= opt_a.objective + opt_b.objective - 1e-9);
  }
}

TEST_CASE("mismatched candidate counts across clusters are rejected") {
  std::mt19937_64 rng(5);
  CoverageMatrix a = oracle::random_synthetic_matrix(rng, 6, 5, 0.5);
  CoverageMatrix b = oracle::random_synthetic_matrix(rng, 6, 5, 0.5);
  b.m = a.m + 1;
  b.rows.resize(static_cast<std::size_t>(b.m));
  JointInstance inst = synthetic_joint({a, b}, {1.0, 1.0}, 2);
  CHECK_THROWS_AS(joint_exact_select(inst), invalid_parameter);
  CHECK_THROWS_AS(joint_greedy_select(inst, 2), invalid_parameter);
}

TEST_CASE("scaling all weights leaves the chosen set invariant") {
  std::mt19937_64 rng(86);
  CoverageMatrix a = oracle::random_synthetic_matrix(rng, 8, 6, 0.5);
  CoverageMatrix b = oracle::random_synthetic_matrix(rng, 8, 6, 0.5);
  b.m = a.m;
  b.rows.resize(static_cast<std::size_t>(a.m));

  JointInstance base = synthetic_joint({a, b}, {1.0, 1.0}, 3);
  JointInstance doubled = synthetic_joint({a, b}, {2.0, 2.0}, 3);
  const ExactResult r1 = joint_exact_select(base);
  const ExactResult r2 = joint_exact_select(doubled);
  CHECK(r1.chosen == r2.chosen);
  CHECK(r2.objective == Catch::Approx(2.0 * r1.objective).epsilon(1e-12));
}

TEST_CASE("joint greedy satisfies the approximation bound on the joint objective") {
  std::mt19937_64 rng(433);
  for (int trial = 0; trial < 15; ++trial) {
    CoverageMatrix a = oracle::random_synthetic_matrix(rng, 8, 6, 0.5);
    CoverageMatrix b = oracle::random_synthetic_matrix(rng, 8, 6, 0.5);
    b.m = a.m;
    b.rows.resize(static_cast<std::size_t>(a.m));
    const int k = static_cast<int>(uniform_int(rng, 1, 3));
    JointInstance inst = synthetic_joint({a, b}, {2.0, 1.0}, k);

    const Selection greedy = joint_greedy_select(inst, k);
    for (std::size_t s = 1; s < greedy.per_step_gains.size(); ++s)
      CHECK(greedy.per_step_gains[s] <= greedy.per_step_gains[s - 1] + 1e-12);

    const ExactResult opt = joint_exact_select(inst);
    CHECK(greedy.objective >= (1.0 - 1.0 / std::numbers::e) * opt.objective - 1e-9);

    // solver-reported joint objective matches recomputation
    std::vector<double> per_cluster;
    const double recomputed = evaluate_joint_objective(inst, opt.chosen, &per_cluster);
    CHECK(std::abs(recomputed - opt.objective) < 1e-9);
    double sum = 0.0;
    for (double v : per_cluster) sum += v;
    CHECK(std::abs(sum - recomputed) < 1e-9);
  }
}

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

// Acceptance suite: every release-gating claim as one test case, printed
// as one PASS/FAIL line per criterion.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "tuycover/pipeline.hpp"

using namespace tuycover;

namespace {

class CriterionLine : public Catch::EventListenerBase {
 public:
  using EventListenerBase::EventListenerBase;
  void testCaseEnded(const Catch::TestCaseStats& stats) override {
    std::printf("%s: %s\n", stats.testInfo->name.c_str(),
                stats.totals.assertions.allOk() ? "PASS" : "FAIL");
    std::fflush(stdout);
  }
};
CATCH_REGISTER_LISTENER(CriterionLine)

// Independent exhaustive optimum: DFS over subsets of size <= k with an
// undo log; candidate improvements are re-evaluated canonically (rows in
// ascending order, per-direction clamp), so the reported optimum is
// bit-comparable with solver objectives.
class ExhaustiveOptimum {
 public:
  ExhaustiveOptimum(const CoverageMatrix& matrix, int k) : matrix_(matrix), k_(k) {}

  double run() {
    gamma_.assign(static_cast<std::size_t>(matrix_.z), 0.0);
    stack_.clear();
    best_ = 0.0;
    descend(0, 0.0);
    return best_;
  }

 private:
  double canonical(const std::vector<int>& chosen) const {
    std::vector<double> sums(static_cast<std::size_t>(matrix_.z), 0.0);
    for (int i : chosen)  // stack is already ascending
      for (const MatrixEntry& e : matrix_.rows[static_cast<std::size_t>(i)])
        sums[static_cast<std::size_t>(e.col)] += e.value;
    double total = 0.0;
    for (double s : sums) total += std::min(1.0, s);
    return total;
  }

  void descend(int next, double value) {
    if (value > best_ - 1e-9 * (1.0 + best_) && !stack_.empty())
      best_ = std::max(best_, canonical(stack_));
    if (static_cast<int>(stack_.size()) == k_) return;
    for (int i = next; i < matrix_.m; ++i) {
      const auto& row = matrix_.rows[static_cast<std::size_t>(i)];
      if (row.empty()) continue;
      double gain = 0.0;
      const std::size_t mark = undo_.size();
      for (const MatrixEntry& e : row) {
        double& g = gamma_[static_cast<std::size_t>(e.col)];
        undo_.push_back({e.col, g});
        const double updated = std::min(1.0, g + e.value);
        gain += updated - g;
        g = updated;
      }
      stack_.push_back(i);
      descend(i + 1, value + gain);
      stack_.pop_back();
      while (undo_.size() > mark) {
        gamma_[static_cast<std::size_t>(undo_.back().first)] = undo_.back().second;
        undo_.pop_back();
      }
    }
  }

  const CoverageMatrix& matrix_;
  int k_;
  std::vector<double> gamma_;
  std::vector<int> stack_;
  std::vector<std::pair<int, double>> undo_;
  double best_ = 0.0;
};

CoverageMatrix random_geometry_matrix(std::mt19937_64& rng, int m, int z) {
  const double roi_r = uniform_real(rng, 3.0, 15.0);
  const double f_min = uniform_real(rng, 0.25, 1.0) * roi_r;
  const Roi roi{Vec3{uniform_real(rng, -5.0, 5.0), uniform_real(rng, -5.0, 5.0),
                     uniform_real(rng, -5.0, 5.0)},
                roi_r};
  const SourceSet sources = fibonacci_source_sphere(m, uniform_real(rng, 60.0, 250.0), Vec3{});
  auto grid = std::make_shared<DirectionGrid>(make_direction_grid(f_min, roi_r, z));
  auto mask = std::make_shared<ValidityMask>();
  mask->valid.assign(static_cast<std::size_t>(m), true);
  mask->geometric_ok.assign(static_cast<std::size_t>(m), true);
  mask->rho.assign(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i)
    if (uniform_unit(rng) < 0.15) mask->valid[static_cast<std::size_t>(i)] = false;
  return build_matrix(MatrixFlavor::soft, sources, roi, grid, mask);
}

CoverageMatrix random_dense_matrix(std::mt19937_64& rng, int max_m, int max_z, double density) {
  CoverageMatrix matrix;
  matrix.flavor = MatrixFlavor::soft;
  matrix.m = static_cast<int>(uniform_int(rng, 1, max_m));
  matrix.z = static_cast<int>(uniform_int(rng, 1, max_z));
  matrix.rows.resize(static_cast<std::size_t>(matrix.m));
  for (auto& row : matrix.rows)
    for (int j = 0; j < matrix.z; ++j)
      if (uniform_unit(rng) < density) row.push_back({j, uniform_real(rng, 0.05, 1.0)});
  return matrix;
}

int feasible_budget(std::mt19937_64& rng, int m, int k_max, std::uint64_t cap) {
  int k = 1;
  for (int cand = 1; cand <= k_max; ++cand) {
    std::uint64_t total = 0;
    bool fits = true;
    for (int t = 1; t <= cand; ++t) {
      const std::uint64_t c =
          binomial_capped(static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(t), cap);
      if (c > cap || cap - total < c) {
        fits = false;
        break;
      }
      total += c;
    }
    if (fits) k = cand;
  }
  return static_cast<int>(uniform_int(rng, 1, k));
}

}  // namespace

TEST_CASE("criterion 01: greedy near-optimality on randomized instances") {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::vector<double> ratios;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = static_cast<int>(uniform_int(rng, 6, 40));
    const int z = static_cast<int>(uniform_int(rng, 20, 200));
    const CoverageMatrix matrix = random_geometry_matrix(rng, m, z);
    const int k = feasible_budget(rng, m, 8, 25'000);

    const Selection greedy = greedy_select(matrix, k);
    const double opt = ExhaustiveOptimum(matrix, k).run();
    const double ratio = opt > 0.0 ? greedy.objective / opt : 1.0;
    ratios.push_back(ratio);
    REQUIRE(ratio >= 1.0 - 1.0 / std::numbers::e - 1e-9);
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios[ratios.size() / 2];
  INFO("median greedy/opt ratio " << median << ", min " << ratios.front());
  REQUIRE(median >= 0.95);
  REQUIRE(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 300.0);
}

TEST_CASE("criterion 02: exact solver certificates are sound") {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = static_cast<int>(uniform_int(rng, 6, 30));
    const int z = static_cast<int>(uniform_int(rng, 10, 80));
    const CoverageMatrix matrix = random_geometry_matrix(rng, m, z);
    const int k = feasible_budget(rng, m, 5, 100'000);

    const ExactResult res = exact_select(matrix, k);
    const double opt = ExhaustiveOptimum(matrix, k).run();
    REQUIRE(res.status == SolveStatus::optimal);
    REQUIRE(res.gap == 0.0);
    REQUIRE(res.objective == opt);
    REQUIRE(res.upper_bound == res.objective);
  }
  REQUIRE(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 120.0);
}

TEST_CASE("criterion 03: saturated coverage dominates SoftTuy") {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 10'000; ++trial) {
    const CoverageMatrix matrix = random_dense_matrix(rng, 8, 10, 0.5);
    std::vector<int> chosen;
    for (int i = 0; i < matrix.m; ++i)
      if (uniform_unit(rng) < 0.5) chosen.push_back(i);
    const CoverageReadout r = readout(chosen, matrix);
    REQUIRE(r.saturated >= r.soft_tuy - 1e-12);
  }
}

TEST_CASE("criterion 04: support of A is contained in support of B") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 150; ++trial) {
    const int m = static_cast<int>(uniform_int(rng, 1, 20));
    const int z = static_cast<int>(uniform_int(rng, 8, 120));
    const double roi_r = uniform_real(rng, 3.0, 15.0);
    const double f_min = uniform_real(rng, 0.25, 1.2) * roi_r;
    const Roi roi{Vec3{uniform_real(rng, -5.0, 5.0), uniform_real(rng, -5.0, 5.0),
                       uniform_real(rng, -5.0, 5.0)},
                  roi_r};
    const SourceSet sources = fibonacci_source_sphere(m, uniform_real(rng, 60.0, 250.0), Vec3{});
    auto grid = std::make_shared<DirectionGrid>(make_direction_grid(f_min, roi_r, z));
    const CoverageMatrix soft = build_matrix(MatrixFlavor::soft, sources, roi, grid, nullptr);
    const CoverageMatrix binary = build_matrix(MatrixFlavor::binary, sources, roi, grid, nullptr);
    for (int i = 0; i < m; ++i) {
      const auto& brow = binary.rows[static_cast<std::size_t>(i)];
      for (const MatrixEntry& e : soft.rows[static_cast<std::size_t>(i)]) {
        REQUIRE(e.value > 0.0);
        REQUIRE(std::any_of(brow.begin(), brow.end(),
                            [&](const MatrixEntry& b) { return b.col == e.col; }));
      }
    }
  }

  // explicit boundary: |mu.d| = tau exactly makes B = 1 and A = 0
  for (double tau : {0.5, 0.25, 0.125, 0.375}) {
    const Direction d{Vec3{1.0, 0.0, 0.0}};
    const Direction boundary{Vec3{tau, std::sqrt(1.0 - tau * tau), 0.0}};
    REQUIRE(binary_entry(boundary, d, tau) == 1);
    REQUIRE(soft_entry(boundary, d, tau) == 0.0);
  }
}

TEST_CASE("criterion 05: soft score shape and linearity") {
  for (double tau : {0.019998666693333084 /* sin of 0.02 */, 0.25, 0.09983341664682815}) {
    const Direction d{Vec3{1.0, 0.0, 0.0}};
    const Direction orth{Vec3{0.0, 1.0, 0.0}};
    const Direction mid{Vec3{tau / 2.0, std::sqrt(1.0 - tau * tau / 4.0), 0.0}};
    const Direction edge{Vec3{tau, std::sqrt(1.0 - tau * tau), 0.0}};
    REQUIRE(soft_entry(orth, d, tau) == 1.0);
    REQUIRE(soft_entry(mid, d, tau) == 0.5);
    REQUIRE(soft_entry(edge, d, tau) == 0.0);
    for (int i = 1; i < 100; ++i) {
      const double a = tau * i / 100.0;
      const Direction mu{Vec3{a, std::sqrt(1.0 - a * a), 0.0}};
      REQUIRE(std::abs(soft_entry(mu, d, tau) - (1.0 - a / tau)) <= 1e-12);
    }
  }
}

TEST_CASE("criterion 06: Nyquist angular tolerance constant") {
  const double deg = angular_tolerance(1.0, 50.26) * 180.0 / std::numbers::pi;
  REQUIRE(deg == Catch::Approx(0.57).margin(0.005));
}

TEST_CASE("criterion 07: set-cover reduction equivalence, 1000 of 1000") {
  const auto t0 = std::chrono::steady_clock::now();
  RandomSetCoverParams params;
  params.n_max = 10;
  params.m_max = 10;
  params.k_max = 4;
  params.seed = 707;
  const ReduceReport report = run_reduce_batch(params, 1000);
  REQUIRE(report.total == 1000);
  REQUIRE(report.agree == 1000);
  REQUIRE(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 60.0);
}

TEST_CASE("criterion 08: ESR fallback for unsupported selections") {
  const SourceSet sources = fibonacci_source_sphere(12, 100.0, Vec3{});
  const Roi roi{Vec3{}, 10.0};
  const DirectionGrid grid = make_direction_grid(2.0, 10.0, 128);
  ValidityMask mask;
  mask.valid.assign(12, false);
  mask.geometric_ok.assign(12, false);
  mask.rho.assign(12, 1.0);
  const EsrReport report =
      esr_report(std::vector<int>{0, 1, 2, 3}, sources, roi, grid, mask);
  REQUIRE(report.unsupported);
  REQUIRE(report.esr_mean_mm == Catch::Approx(31.4159).margin(1e-3));
}

TEST_CASE("criterion 09: occlusion strictly degrades validity, never helps greedy") {
  const RunConfig config = default_run_config();
  const std::vector<OcclusionLevel> levels{OcclusionLevel::none, OcclusionLevel::mild,
                                           OcclusionLevel::moderate, OcclusionLevel::severe};
  const SweepResult sweep = run_sweep(config, {20}, levels, {Method::greedy});

  double prev_validity = 2.0;
  double prev_objective = std::numeric_limits<double>::infinity();
  for (OcclusionLevel level : levels) {
    double validity = 0.0, objective = 0.0;
    int n = 0;
    for (const SweepCell& cell : sweep.cells)
      if (cell.occlusion == level) {
        REQUIRE(!cell.failed);
        validity += cell.mean_validity;
        objective += cell.objective;
        ++n;
      }
    REQUIRE(n == static_cast<int>(config.rois.size()));
    validity /= n;
    objective /= n;
    INFO("level " << to_string(level) << ": mean validity " << validity << ", objective "
                  << objective);
    REQUIRE(validity < prev_validity);          // strict decrease
    REQUIRE(objective <= prev_objective + 1e-9);  // non-increasing
    prev_validity = validity;
    prev_objective = objective;
  }
}

TEST_CASE("criterion 10: worst-case solver equals brute-force max-min") {
  std::mt19937_64 rng(1010);
  int planted_checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    CoverageMatrix matrix = random_dense_matrix(rng, 14, 16, 0.45);
    const int k = feasible_budget(rng, matrix.m, 3, 100'000);

    // plant an all-zero column in half the instances
    const bool plant = trial % 2 == 0 && matrix.z >= 2;
    if (plant) {
      const int col = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(matrix.z)));
      for (auto& row : matrix.rows)
        row.erase(std::remove_if(row.begin(), row.end(),
                                 [&](const MatrixEntry& e) { return e.col == col; }),
                  row.end());
    }
    const std::vector<int> zero_cols = uncoverable_columns(matrix);

    // robust: brute force over the remaining columns
    std::vector<bool> excluded(static_cast<std::size_t>(matrix.z), false);
    for (int j : zero_cols) excluded[static_cast<std::size_t>(j)] = true;
    const WorstCaseResult robust = exact_worstcase_select(matrix, k, true);

    double best_t = 0.0;
    {
      // exhaustive max-min oracle
      std::vector<int> stack;
      const std::function<void(int)> descend = [&](int next) {
        std::vector<double> sums(static_cast<std::size_t>(matrix.z), 0.0);
        for (int i : stack)
          for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)])
            sums[static_cast<std::size_t>(e.col)] += e.value;
        double t = 1.0;
        bool any = false;
        for (int j = 0; j < matrix.z; ++j)
          if (!excluded[static_cast<std::size_t>(j)]) {
            t = std::min(t, std::min(1.0, sums[static_cast<std::size_t>(j)]));
            any = true;
          }
        if (!any) t = 0.0;
        best_t = std::max(best_t, t);
        if (static_cast<int>(stack.size()) == k) return;
        for (int i = next; i < matrix.m; ++i) {
          if (matrix.rows[static_cast<std::size_t>(i)].empty()) continue;
          stack.push_back(i);
          descend(i + 1);
          stack.pop_back();
        }
      };
      descend(0);
    }
    REQUIRE(robust.t_value == best_t);

    if (plant && !zero_cols.empty()) {
      ++planted_checked;
      const WorstCaseResult raw = exact_worstcase_select(matrix, k, false);
      REQUIRE(raw.t_value == 0.0);  // the zero column pins the floor
    }
  }
  REQUIRE(planted_checked > 0);
}

TEST_CASE("criterion 11: multi-ROI joint solve reduces and separates") {
  std::mt19937_64 rng(1111);
  for (int trial = 0; trial < 50; ++trial) {
    const CoverageMatrix matrix = random_dense_matrix(rng, 12, 10, 0.5);
    const int k = feasible_budget(rng, matrix.m, 4, 100'000);
    JointInstance single;
    single.k = k;
    Cluster c;
    c.members = {0};
    c.weight = 1.0;
    c.matrix = std::make_shared<CoverageMatrix>(matrix);
    single.clusters = {c};

    const ExactResult joint = joint_exact_select(single);
    const ExactResult direct = exact_select(matrix, k);
    REQUIRE(joint.chosen == direct.chosen);
    REQUIRE(joint.objective == direct.objective);
  }

  // disjoint-support clusters with ample budget reach the sum of optima
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 12;
    CoverageMatrix a, b;
    a.flavor = b.flavor = MatrixFlavor::soft;
    a.m = b.m = m;
    a.z = 6;
    b.z = 7;
    a.rows.resize(m);
    b.rows.resize(m);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < a.z; ++j)
        if (uniform_unit(rng) < 0.6)
          a.rows[static_cast<std::size_t>(i)].push_back({j, uniform_real(rng, 0.1, 1.0)});
    for (int i = 6; i < m; ++i)
      for (int j = 0; j < b.z; ++j)
        if (uniform_unit(rng) < 0.6)
          b.rows[static_cast<std::size_t>(i)].push_back({j, uniform_real(rng, 0.1, 1.0)});

    const ExactResult opt_a = exact_select(a, 3);
    const ExactResult opt_b = exact_select(b, 3);
    JointInstance pair;
    pair.k = 6;
    Cluster ca, cb;
    ca.members = {0};
    ca.weight = 1.0;
    ca.matrix = std::make_shared<CoverageMatrix>(a);
    cb.members = {1};
    cb.weight = 1.0;
    cb.matrix = std::make_shared<CoverageMatrix>(b);
    pair.clusters = {ca, cb};
    const ExactResult joint = joint_exact_select(pair);
    REQUIRE(joint.objective >= opt_a.objective + opt_b.objective - 1e-9);
  }
}

TEST_CASE("criterion 12: plan runs are deterministic across worker counts") {
  const auto base = std::filesystem::temp_directory_path() / "tuycover_acceptance_det";
  std::filesystem::remove_all(base);

  RunConfig config;
  config.scene.dims = {48, 48, 48};
  config.scene.spacing_mm = 2.5;
  config.geometry.num_candidates = 80;
  config.geometry.detector = Detector{48, 48, 4.8, 4000.0};
  config.rois = {Roi{Vec3{4.0, -2.0, 6.0}, 12.0}, Roi{Vec3{-6.0, 5.0, -3.0}, 12.0}};
  config.resolution.f_min_mm = 2.4;
  config.resolution.z_override = 160;
  config.k = 10;

  setenv("TUYCOVER_WORKERS", "1", 1);
  config.output_dir = (base / "w1").string();
  const RunReport serial = run_plan(config);
  config.output_dir = (base / "w1b").string();
  const RunReport serial_again = run_plan(config);
  setenv("TUYCOVER_WORKERS", "4", 1);
  config.output_dir = (base / "w4").string();
  const RunReport parallel = run_plan(config);
  unsetenv("TUYCOVER_WORKERS");

  const auto strip = [](json r) {
    r.erase("timings");
    r.at("config").erase("output_dir");
    return r;
  };
  REQUIRE(strip(serial.report) == strip(serial_again.report));
  REQUIRE(strip(serial.report) == strip(parallel.report));
  REQUIRE(serial.sphere_maps == parallel.sphere_maps);
  for (std::size_t i = 0; i < serial.selections.size(); ++i)
    REQUIRE(serial.selections[i].chosen == parallel.selections[i].chosen);
}

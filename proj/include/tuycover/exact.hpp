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
#include <chrono>
#include <cstdint>
#include <queue>
#include <span>
#include <vector>

#include "tuycover/common.hpp"
#include "tuycover/coverage.hpp"
#include "tuycover/greedy.hpp"

namespace tuycover {

struct SolveOptions {
  double time_limit_s = 300.0;
  double gap_limit = 1e-6;              // relative
  std::uint64_t enum_cap = 2'000'000;   // exhaustive fast path when C(m,k) fits
};

enum class SolveStatus { optimal, gap_limit, time_limit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::gap_limit: return "gap_limit";
    case SolveStatus::time_limit: return "time_limit";
  }
  return "unknown";
}

/// Certified result: objective is the incumbent value f_I, upper_bound a
/// valid bound U >= OPT, and gap = (U - f_I)/U their relative distance.
struct ExactResult {
  std::vector<int> chosen;  // sorted ascending
  double objective = 0.0;
  double upper_bound = 0.0;
  double gap = 0.0;
  SolveStatus status = SolveStatus::optimal;
  std::uint64_t node_count = 0;
  bool warm_start_used = false;
  std::vector<double> per_cluster_objective;  // one entry per cluster
  double wall_s = 0.0;
};

namespace detail {

/// Weighted multi-cluster coverage instance flattened into one column
/// space; the single-matrix problem is the one-cluster special case with
/// unit weights.
struct FlatInstance {
  int m = 0;
  int total_cols = 0;
  std::vector<double> col_weight;
  std::vector<std::vector<MatrixEntry>> rows;  // flattened column indices
  std::vector<int> cluster_offsets;            // size = clusters + 1
};

inline FlatInstance flatten(std::span<const CoverageMatrix* const> matrices,
                            std::span<const double> weights) {
  if (matrices.empty()) throw invalid_parameter("no matrices to solve over");
  if (matrices.size() != weights.size())
    throw invalid_parameter("weights do not match the matrix count");
  FlatInstance flat;
  flat.m = matrices.front()->m;
  flat.cluster_offsets.push_back(0);
  for (std::size_t c = 0; c < matrices.size(); ++c) {
    if (matrices[c]->m != flat.m)
      throw invalid_parameter("cluster matrices disagree on the candidate count");
    flat.total_cols += matrices[c]->z;
    flat.cluster_offsets.push_back(flat.total_cols);
    for (int j = 0; j < matrices[c]->z; ++j) flat.col_weight.push_back(weights[c]);
  }
  flat.rows.assign(static_cast<std::size_t>(flat.m), {});
  for (std::size_t c = 0; c < matrices.size(); ++c) {
    const int off = flat.cluster_offsets[c];
    for (int i = 0; i < flat.m; ++i)
      for (const MatrixEntry& e : matrices[c]->rows[static_cast<std::size_t>(i)])
        flat.rows[static_cast<std::size_t>(i)].push_back({e.col + off, e.value});
  }
  return flat;
}

/// Canonical objective: rows applied in ascending candidate order with
/// per-direction clamping, then summed over columns in ascending order.
inline double flat_evaluate(const FlatInstance& flat, std::span<const int> chosen,
                            std::vector<double>* per_cluster = nullptr) {
  std::vector<double> gamma(static_cast<std::size_t>(flat.total_cols), 0.0);
  std::vector<int> sorted(chosen.begin(), chosen.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i : sorted)
    for (const MatrixEntry& e : flat.rows[static_cast<std::size_t>(i)]) {
      double& g = gamma[static_cast<std::size_t>(e.col)];
      g = std::min(1.0, g + e.value);
    }
  double total = 0.0;
  for (int j = 0; j < flat.total_cols; ++j)
    total += flat.col_weight[static_cast<std::size_t>(j)] * gamma[static_cast<std::size_t>(j)];
  if (per_cluster) {
    per_cluster->assign(flat.cluster_offsets.size() - 1, 0.0);
    for (std::size_t c = 0; c + 1 < flat.cluster_offsets.size(); ++c)
      for (int j = flat.cluster_offsets[c]; j < flat.cluster_offsets[c + 1]; ++j)
        (*per_cluster)[c] +=
            flat.col_weight[static_cast<std::size_t>(j)] * gamma[static_cast<std::size_t>(j)];
  }
  return total;
}

inline double flat_gain(const FlatInstance& flat, const std::vector<double>& gamma, int row) {
  double gain = 0.0;
  for (const MatrixEntry& e : flat.rows[static_cast<std::size_t>(row)]) {
    const double g = gamma[static_cast<std::size_t>(e.col)];
    gain += flat.col_weight[static_cast<std::size_t>(e.col)] * (std::min(1.0, g + e.value) - g);
  }
  return gain;
}

inline void flat_apply(const FlatInstance& flat, std::vector<double>& gamma, int row) {
  for (const MatrixEntry& e : flat.rows[static_cast<std::size_t>(row)]) {
    double& g = gamma[static_cast<std::size_t>(e.col)];
    g = std::min(1.0, g + e.value);
  }
}

inline bool lex_less(std::span<const int> a, std::span<const int> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// f(F) plus the sum of the (k - |F|) largest singleton marginal gains of
/// the unfixed, unforbidden candidates. Submodularity makes every future
/// gain at most its gain at F, so this dominates any completion of F.
inline double flat_upper_bound(const FlatInstance& flat, std::span<const int> fixed_in,
                               std::span<const int> forbidden, int k) {
  if (static_cast<int>(fixed_in.size()) > k)
    throw invalid_parameter("fixed set exceeds the budget");
  std::vector<double> gamma(static_cast<std::size_t>(flat.total_cols), 0.0);
  std::vector<int> sorted(fixed_in.begin(), fixed_in.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i : sorted) flat_apply(flat, gamma, i);
  double base = 0.0;
  for (int j = 0; j < flat.total_cols; ++j)
    base += flat.col_weight[static_cast<std::size_t>(j)] * gamma[static_cast<std::size_t>(j)];

  std::vector<bool> blocked(static_cast<std::size_t>(flat.m), false);
  for (int i : fixed_in) blocked[static_cast<std::size_t>(i)] = true;
  for (int i : forbidden) blocked[static_cast<std::size_t>(i)] = true;

  std::vector<double> gains;
  for (int i = 0; i < flat.m; ++i)
    if (!blocked[static_cast<std::size_t>(i)]) gains.push_back(flat_gain(flat, gamma, i));
  const int budget = k - static_cast<int>(fixed_in.size());
  const int take = std::min<int>(budget, static_cast<int>(gains.size()));
  std::partial_sort(gains.begin(), gains.begin() + take, gains.end(), std::greater<>());
  for (int t = 0; t < take; ++t) base += std::max(0.0, gains[static_cast<std::size_t>(t)]);
  return base;
}

struct Incumbent {
  std::vector<int> chosen;  // sorted
  double value = 0.0;
  bool initialized = false;

  // Strictly larger objective wins; exact float ties break toward the
  // lexicographically smallest sorted index sequence.
  bool offer(std::span<const int> sorted_set, double value_canonical) {
    if (!initialized || value_canonical > value ||
        (value_canonical == value && lex_less(sorted_set, chosen))) {
      chosen.assign(sorted_set.begin(), sorted_set.end());
      value = value_canonical;
      initialized = true;
      return true;
    }
    return false;
  }
};

/// Exhaustive search over all subsets of size <= k of the active
/// candidates. Incremental values steer a prefilter; every potential winner
/// is re-evaluated canonically before it can become the incumbent.
class SaturatedEnumerator {
 public:
  SaturatedEnumerator(const FlatInstance& flat, const std::vector<int>& active, int k)
      : flat_(flat), active_(active), k_(k), gamma_(static_cast<std::size_t>(flat.total_cols), 0.0) {}

  void run(Incumbent& best, std::uint64_t& node_count) {
    best_ = &best;
    nodes_ = 0;
    descend(0, 0.0);
    node_count += nodes_;
  }

 private:
  void descend(std::size_t next, double inc_value) {
    const int depth = static_cast<int>(stack_.size());
    if (depth == k_) return;
    for (std::size_t pos = next; pos < active_.size(); ++pos) {
      const int cand = active_[pos];
      ++nodes_;
      const double gain = flat_gain(flat_, gamma_, cand);
      const double value = inc_value + gain;
      stack_.push_back(cand);
      const std::size_t undo_mark = undo_.size();
      for (const MatrixEntry& e : flat_.rows[static_cast<std::size_t>(cand)]) {
        double& g = gamma_[static_cast<std::size_t>(e.col)];
        undo_.push_back({e.col, g});
        g = std::min(1.0, g + e.value);
      }
      if (!best_->initialized || value > best_->value - guard()) {
        std::vector<int> sorted(stack_.begin(), stack_.end());
        std::sort(sorted.begin(), sorted.end());
        best_->offer(sorted, flat_evaluate(flat_, sorted));
      }
      descend(pos + 1, value);
      while (undo_.size() > undo_mark) {
        gamma_[static_cast<std::size_t>(undo_.back().col)] = undo_.back().value;
        undo_.pop_back();
      }
      stack_.pop_back();
    }
  }

  double guard() const { return 1e-9 * (1.0 + std::abs(best_->value)); }

  const FlatInstance& flat_;
  const std::vector<int>& active_;
  int k_;
  std::vector<double> gamma_;
  std::vector<int> stack_;
  struct Undo {
    int col;
    double value;
  };
  std::vector<Undo> undo_;
  Incumbent* best_ = nullptr;
  std::uint64_t nodes_ = 0;
};

inline std::vector<int> active_candidates(const FlatInstance& flat) {
  std::vector<int> active;
  for (int i = 0; i < flat.m; ++i)
    if (!flat.rows[static_cast<std::size_t>(i)].empty()) active.push_back(i);
  return active;
}

/// Best-first branch-and-bound on include/exclude decisions, candidates
/// ordered by singleton gain, pruned by the submodular bound.
inline ExactResult solve_max_saturated(const FlatInstance& flat, int k, const SolveOptions& opts,
                                       std::span<const int> warm) {
  if (k < 1) throw invalid_parameter("exact solve requires k >= 1");
  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  ExactResult result;
  result.warm_start_used = !warm.empty();

  Incumbent best;
  {
    std::vector<int> none;
    best.offer(none, 0.0);
  }
  if (!warm.empty()) {
    std::vector<int> sorted(warm.begin(), warm.end());
    std::sort(sorted.begin(), sorted.end());
    best.offer(sorted, flat_evaluate(flat, sorted));
  }

  const std::vector<int> active = active_candidates(flat);
  const int kk = std::min<int>(k, static_cast<int>(active.size()));

  if (kk == 0) {
    result.objective = best.value;
    result.chosen = best.chosen;
    result.upper_bound = best.value;
    result.gap = 0.0;
    result.status = SolveStatus::optimal;
    flat_evaluate(flat, result.chosen, &result.per_cluster_objective);
    result.wall_s = elapsed();
    return result;
  }

  if (tuycover::subset_budget(active.size(), kk, opts.enum_cap) <= opts.enum_cap) {
    SaturatedEnumerator enumerator(flat, active, kk);
    enumerator.run(best, result.node_count);
    result.chosen = best.chosen;
    result.objective = best.value;
    result.upper_bound = best.value;  // proof by exhaustion
    result.gap = 0.0;
    result.status = SolveStatus::optimal;
    flat_evaluate(flat, result.chosen, &result.per_cluster_objective);
    result.wall_s = elapsed();
    return result;
  }

  // Candidate order: singleton gain descending, then index.
  std::vector<int> ord = active;
  {
    const std::vector<double> zero(static_cast<std::size_t>(flat.total_cols), 0.0);
    std::vector<double> singleton(static_cast<std::size_t>(flat.m), 0.0);
    for (int i : active) singleton[static_cast<std::size_t>(i)] = flat_gain(flat, zero, i);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
      const double ga = singleton[static_cast<std::size_t>(a)];
      const double gb = singleton[static_cast<std::size_t>(b)];
      return ga > gb || (ga == gb && a < b);
    });
  }

  struct Node {
    std::vector<int> fixed_in;  // candidate ids
    int pos = 0;                // next position in ord
    double bound = 0.0;
    std::uint64_t id = 0;
  };
  struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
      return a.bound < b.bound || (a.bound == b.bound && a.id > b.id);
    }
  };
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;

  const auto node_bound = [&](const std::vector<int>& fixed_in, int pos) {
    std::vector<int> forbidden;
    for (int p = 0; p < pos; ++p) {
      const int cand = ord[static_cast<std::size_t>(p)];
      if (std::find(fixed_in.begin(), fixed_in.end(), cand) == fixed_in.end())
        forbidden.push_back(cand);
    }
    return flat_upper_bound(flat, fixed_in, forbidden, k);
  };

  std::uint64_t next_id = 0;
  open.push(Node{{}, 0, node_bound({}, 0), next_id++});

  bool timed_out = false;
  bool gap_stop = false;
  double remaining_bound = best.value;

  while (!open.empty()) {
    const Node node = open.top();
    remaining_bound = node.bound;
    if (node.bound <= best.value) break;  // nothing left can improve: proof complete
    const double u_now = std::max(best.value, node.bound);
    if (u_now > 0.0 && (u_now - best.value) / u_now <= opts.gap_limit) {
      gap_stop = true;
      break;
    }
    if (elapsed() > opts.time_limit_s) {
      timed_out = true;
      break;
    }
    open.pop();
    ++result.node_count;

    if (node.pos >= static_cast<int>(ord.size()) || static_cast<int>(node.fixed_in.size()) >= k)
      continue;
    const int cand = ord[static_cast<std::size_t>(node.pos)];

    Node incl;
    incl.fixed_in = node.fixed_in;
    incl.fixed_in.push_back(cand);
    incl.pos = node.pos + 1;
    {
      std::vector<int> sorted = incl.fixed_in;
      std::sort(sorted.begin(), sorted.end());
      best.offer(sorted, flat_evaluate(flat, sorted));
    }
    if (static_cast<int>(incl.fixed_in.size()) < k &&
        incl.pos < static_cast<int>(ord.size())) {
      incl.bound = node_bound(incl.fixed_in, incl.pos);
      incl.id = next_id++;
      if (incl.bound > best.value) open.push(incl);
    }

    Node excl;
    excl.fixed_in = node.fixed_in;
    excl.pos = node.pos + 1;
    if (excl.pos < static_cast<int>(ord.size())) {
      excl.bound = node_bound(excl.fixed_in, excl.pos);
      excl.id = next_id++;
      if (excl.bound > best.value) open.push(excl);
    }
  }

  result.chosen = best.chosen;
  result.objective = best.value;
  const double u = open.empty() ? best.value : std::max(best.value, remaining_bound);
  result.upper_bound = std::max(u, best.value);
  result.gap =
      result.upper_bound > 0.0
          ? (result.upper_bound - result.objective) / result.upper_bound
          : 0.0;
  if (timed_out)
    result.status = SolveStatus::time_limit;
  else if (gap_stop && result.gap > 0.0)
    result.status = SolveStatus::gap_limit;
  else
    result.status = SolveStatus::optimal;
  flat_evaluate(flat, result.chosen, &result.per_cluster_objective);
  result.wall_s = elapsed();
  return result;
}

}  // namespace detail

/// Valid upper bound on any completion of the partial assignment
/// (fixed_in chosen, forbidden excluded) within budget k.
inline double submodular_upper_bound(const CoverageMatrix& matrix, std::span<const int> fixed_in,
                                     std::span<const int> forbidden, int k) {
  const CoverageMatrix* ptr = &matrix;
  const double w = 1.0;
  const detail::FlatInstance flat = detail::flatten({&ptr, 1}, {&w, 1});
  return detail::flat_upper_bound(flat, fixed_in, forbidden, k);
}

/// Certified maximization of saturated coverage under a cardinality budget.
/// Matches the enumeration optimum exactly on instances within the
/// exhaustive cap; larger instances run best-first branch-and-bound.
inline ExactResult exact_select(const CoverageMatrix& matrix, int k, const SolveOptions& opts = {},
                                const Selection* warm_start = nullptr) {
  const CoverageMatrix* ptr = &matrix;
  const double w = 1.0;
  const detail::FlatInstance flat = detail::flatten({&ptr, 1}, {&w, 1});
  std::span<const int> warm;
  if (warm_start) warm = warm_start->chosen;
  return detail::solve_max_saturated(flat, k, opts, warm);
}

/// Max-min result: t_value is the smallest per-direction coverage over the
/// floor-constrained columns, recomputable from the chosen set.
struct WorstCaseResult {
  std::vector<int> chosen;  // sorted ascending
  double t_value = 0.0;
  std::vector<int> excluded_columns;
  double tiebreak_mean = 0.0;
  SolveStatus status = SolveStatus::optimal;
  std::uint64_t node_count = 0;
};

namespace detail {

struct WorstCaseEval {
  double t = 0.0;
  double mean = 0.0;
};

inline WorstCaseEval worstcase_evaluate(const CoverageMatrix& matrix, std::span<const int> chosen,
                                        const std::vector<bool>& excluded) {
  std::vector<double> gamma(static_cast<std::size_t>(matrix.z), 0.0);
  std::vector<int> sorted(chosen.begin(), chosen.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i : sorted)
    for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)]) {
      double& g = gamma[static_cast<std::size_t>(e.col)];
      g = std::min(1.0, g + e.value);
    }
  WorstCaseEval eval;
  eval.t = 1.0;
  bool any_floor = false;
  double total = 0.0;
  for (int j = 0; j < matrix.z; ++j) {
    total += gamma[static_cast<std::size_t>(j)];
    if (!excluded[static_cast<std::size_t>(j)]) {
      eval.t = std::min(eval.t, gamma[static_cast<std::size_t>(j)]);
      any_floor = true;
    }
  }
  if (!any_floor) eval.t = 0.0;
  eval.mean = matrix.z > 0 ? total / matrix.z : 0.0;
  return eval;
}

struct WorstIncumbent {
  std::vector<int> chosen;
  WorstCaseEval eval;
  bool initialized = false;

  bool offer(std::span<const int> sorted_set, const WorstCaseEval& e) {
    if (!initialized || e.t > eval.t || (e.t == eval.t && e.mean > eval.mean) ||
        (e.t == eval.t && e.mean == eval.mean && lex_less(sorted_set, chosen))) {
      chosen.assign(sorted_set.begin(), sorted_set.end());
      eval = e;
      initialized = true;
      return true;
    }
    return false;
  }
};

}  // namespace detail

/// Exact max-min directional coverage. With robust=true the globally
/// uncoverable (all-zero) columns are dropped from the floor constraints;
/// with robust=false they force t = 0 for every selection. Ties on t break
/// by mean saturated coverage, then by the lexicographically smallest set.
inline WorstCaseResult exact_worstcase_select(const CoverageMatrix& matrix, int k,
                                              bool robust = true, const SolveOptions& opts = {}) {
  if (k < 1) throw invalid_parameter("exact solve requires k >= 1");
  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  WorstCaseResult result;
  std::vector<bool> excluded(static_cast<std::size_t>(matrix.z), false);
  if (robust) {
    for (int j : uncoverable_columns(matrix)) {
      excluded[static_cast<std::size_t>(j)] = true;
      result.excluded_columns.push_back(j);
    }
  }

  std::vector<int> active;
  for (int i = 0; i < matrix.m; ++i)
    if (!matrix.rows[static_cast<std::size_t>(i)].empty()) active.push_back(i);
  const int kk = std::min<int>(k, static_cast<int>(active.size()));

  detail::WorstIncumbent best;
  {
    std::vector<int> none;
    best.offer(none, detail::worstcase_evaluate(matrix, none, excluded));
  }

  if (kk == 0) {
    result.chosen = best.chosen;
    result.t_value = best.eval.t;
    result.tiebreak_mean = best.eval.mean;
    result.status = SolveStatus::optimal;
    return result;
  }

  if (tuycover::subset_budget(active.size(), kk, opts.enum_cap) <= opts.enum_cap) {
    // Exhaustive: every visited subset is a candidate, so equal-valued
    // smaller sets win the lexicographic tie.
    std::vector<int> stack;
    std::uint64_t nodes = 0;
    const std::function<void(std::size_t)> descend = [&](std::size_t next) {
      if (static_cast<int>(stack.size()) == kk) return;
      for (std::size_t pos = next; pos < active.size(); ++pos) {
        stack.push_back(active[pos]);
        ++nodes;
        std::vector<int> sorted = stack;
        std::sort(sorted.begin(), sorted.end());
        best.offer(sorted, detail::worstcase_evaluate(matrix, sorted, excluded));
        descend(pos + 1);
        stack.pop_back();
      }
    };
    descend(0);
    result.node_count = nodes;
    result.chosen = best.chosen;
    result.t_value = best.eval.t;
    result.tiebreak_mean = best.eval.mean;
    result.status = SolveStatus::optimal;
    return result;
  }

  // Branch-and-bound with a per-column completion bound: a node's subtree
  // cannot raise any column above its fixed coverage plus the top remaining
  // contributions, so the min over floor columns of that quantity bounds t.
  std::vector<std::vector<MatrixEntry>> cols(static_cast<std::size_t>(matrix.z));
  for (int i = 0; i < matrix.m; ++i)
    for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)])
      cols[static_cast<std::size_t>(e.col)].push_back({i, e.value});

  const auto column_bound = [&](const std::vector<double>& gamma,
                                const std::vector<bool>& allowed, int budget) {
    double t_ub = 1.0;
    bool any_floor = false;
    std::vector<double> top;
    for (int j = 0; j < matrix.z; ++j) {
      if (excluded[static_cast<std::size_t>(j)]) continue;
      any_floor = true;
      top.clear();
      for (const MatrixEntry& rc : cols[static_cast<std::size_t>(j)])
        if (allowed[static_cast<std::size_t>(rc.col)]) top.push_back(rc.value);
      const int take = std::min<int>(budget, static_cast<int>(top.size()));
      std::partial_sort(top.begin(), top.begin() + take, top.end(), std::greater<>());
      double reach = gamma[static_cast<std::size_t>(j)];
      for (int t = 0; t < take; ++t) reach += top[static_cast<std::size_t>(t)];
      t_ub = std::min(t_ub, std::min(1.0, reach));
      if (t_ub <= 0.0) break;
    }
    return any_floor ? t_ub : 0.0;
  };

  struct Node {
    std::vector<int> fixed_in;
    int pos = 0;
    double bound = 0.0;
    std::uint64_t id = 0;
  };
  struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
      return a.bound < b.bound || (a.bound == b.bound && a.id > b.id);
    }
  };

  // Order candidates by total row mass; purely a search-speed heuristic.
  std::vector<int> ord = active;
  {
    std::vector<double> mass(static_cast<std::size_t>(matrix.m), 0.0);
    for (int i : active)
      for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)])
        mass[static_cast<std::size_t>(i)] += e.value;
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
      const double ga = mass[static_cast<std::size_t>(a)];
      const double gb = mass[static_cast<std::size_t>(b)];
      return ga > gb || (ga == gb && a < b);
    });
  }

  const auto node_bound = [&](const std::vector<int>& fixed_in, int pos) {
    std::vector<double> gamma(static_cast<std::size_t>(matrix.z), 0.0);
    std::vector<int> sorted = fixed_in;
    std::sort(sorted.begin(), sorted.end());
    for (int i : sorted)
      for (const MatrixEntry& e : matrix.rows[static_cast<std::size_t>(i)]) {
        double& g = gamma[static_cast<std::size_t>(e.col)];
        g = std::min(1.0, g + e.value);
      }
    std::vector<bool> allowed(static_cast<std::size_t>(matrix.m), false);
    for (int p = pos; p < static_cast<int>(ord.size()); ++p)
      allowed[static_cast<std::size_t>(ord[static_cast<std::size_t>(p)])] = true;
    return column_bound(gamma, allowed, k - static_cast<int>(fixed_in.size()));
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::uint64_t next_id = 0;
  open.push(Node{{}, 0, node_bound({}, 0), next_id++});
  bool timed_out = false;

  while (!open.empty()) {
    const Node node = open.top();
    if (node.bound <= best.eval.t) break;
    if (elapsed() > opts.time_limit_s) {
      timed_out = true;
      break;
    }
    open.pop();
    ++result.node_count;
    if (node.pos >= static_cast<int>(ord.size()) || static_cast<int>(node.fixed_in.size()) >= k)
      continue;
    const int cand = ord[static_cast<std::size_t>(node.pos)];

    Node incl;
    incl.fixed_in = node.fixed_in;
    incl.fixed_in.push_back(cand);
    incl.pos = node.pos + 1;
    {
      std::vector<int> sorted = incl.fixed_in;
      std::sort(sorted.begin(), sorted.end());
      best.offer(sorted, detail::worstcase_evaluate(matrix, sorted, excluded));
    }
    if (static_cast<int>(incl.fixed_in.size()) < k && incl.pos < static_cast<int>(ord.size())) {
      incl.bound = node_bound(incl.fixed_in, incl.pos);
      incl.id = next_id++;
      if (incl.bound > best.eval.t) open.push(incl);
    }

    Node excl;
    excl.fixed_in = node.fixed_in;
    excl.pos = node.pos + 1;
    if (excl.pos < static_cast<int>(ord.size())) {
      excl.bound = node_bound(excl.fixed_in, excl.pos);
      excl.id = next_id++;
      if (excl.bound > best.eval.t) open.push(excl);
    }
  }

  result.chosen = best.chosen;
  result.t_value = best.eval.t;
  result.tiebreak_mean = best.eval.mean;
  result.status = timed_out ? SolveStatus::time_limit : SolveStatus::optimal;
  return result;
}

}  // namespace tuycover

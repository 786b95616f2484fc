#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "diffcal/descent.hpp"

namespace diffcal {

/// Search box with a uniform grid of n nodes per axis
/// (h_j = (b_j - a_j)/(n - 1), endpoints inclusive).
struct ParameterBox {
  Box bounds;
  int n = 32;

  std::size_t dimension() const { return bounds.dimension(); }
  double h(std::size_t axis) const {
    return (bounds.upper[axis] - bounds.lower[axis]) / (n - 1);
  }
  double coordinate(std::size_t axis, int node) const {
    return bounds.lower[axis] + node * h(axis);
  }
  void validate() const;
};

/// Per-axis grid coordinates q_j^(i) = a_j + i*h_j.
std::vector<std::vector<double>> discretize_box(const ParameterBox& box);

/// arccot mapping of the misfit onto (0, pi/2]; strictly decreasing, so
/// the largest-magnitude tensor entry is the smallest misfit. Throws
/// std::invalid_argument for negative input.
double map_g(double J_val);

using MultiIndex = std::vector<int>;

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& idx) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int v : idx) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }
};

/// Batch objective: parameter-space points -> misfit values J >= 0, in
/// request order. Must be deterministic and side-effect-free; a batch
/// is the designated parallelism point.
using BatchObjective =
    std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;

struct TTOptions {
  int r_max = 4;
  int n = 32;
  int n_sweeps = 16;
  double maxvol_tol = 1e-2;
  std::uint64_t seed = 20240817ull;
  long max_evals = 0;  ///< 0 resolves to 4 * p * n * r_max^2 * n_sweeps

  void validate() const;
};

struct SweepRecord {
  int sweep;
  long evals;
  double best_J;
};

struct TTResult {
  std::vector<double> q_best;  ///< grid coordinates of the best point
  double J_best = 0.0;
  MultiIndex index_best;
  long eval_count = 0;
  bool budget_exhausted = false;
  std::vector<SweepRecord> trace;
  TTOptions options;  ///< echoed, with the resolved eval budget
};

/// Caching batch evaluator over the grid: multi-index -> (g, J). Every
/// multi-index is evaluated at most once; evaluations are counted
/// against a hard budget. Also tracks the r_max best points seen.
class CachedEvaluator {
public:
  CachedEvaluator(BatchObjective objective, const ParameterBox& box, int top_size,
                  long max_evals);

  /// Ensures every index is cached. Returns false when the budget ran
  /// out (at most the remaining budget gets evaluated, the rest is
  /// skipped and the evaluator is marked exhausted).
  bool ensure(const std::vector<MultiIndex>& indices);

  /// Cache lookup; the index must have been ensured.
  std::pair<double, double> g_and_J(const MultiIndex& idx) const;

  long eval_count() const { return eval_count_; }
  bool exhausted() const { return exhausted_; }
  bool has_best() const { return !top_.empty(); }
  const std::pair<double, MultiIndex>& best() const { return top_.front(); }
  /// Best points seen so far, ascending misfit, at most top_size entries.
  const std::vector<std::pair<double, MultiIndex>>& top() const { return top_; }
  std::vector<double> coordinates(const MultiIndex& idx) const;

private:
  BatchObjective objective_;
  std::vector<std::vector<double>> grids_;
  long max_evals_;
  long eval_count_ = 0;
  bool exhausted_ = false;
  std::size_t top_size_;
  std::unordered_map<MultiIndex, std::pair<double, double>, MultiIndexHash> cache_;
  std::vector<std::pair<double, MultiIndex>> top_;

  void record(const MultiIndex& idx, double J);
};

/// Tensor-train cross global minimization over the discretized box:
/// alternating left/right sweeps build interface index sets by maxvol
/// on QR-orthogonalized unfolding submatrices, enriched with the best
/// inspected points, their grid neighbors, and coordinate-wise hill
/// descent around the cross points.
TTResult tt_minimize(const BatchObjective& objective, const ParameterBox& box,
                     const TTOptions& options);

}  // namespace diffcal

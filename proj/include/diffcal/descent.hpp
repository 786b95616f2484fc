#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "diffcal/adjoint.hpp"
#include "diffcal/forward.hpp"
#include "diffcal/model.hpp"

namespace diffcal {

/// Componentwise bounds of the admissible set.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dimension() const { return lower.size(); }
  void validate() const;
  bool contains(std::span<const double> q) const;
};

enum class AlphaRule {
  paper_literal,          // 2 J / |J'|
  minimal_error_squared,  // 2 J / |J'|^2
};

std::string_view to_string(AlphaRule rule);
AlphaRule alpha_rule_from_string(std::string_view name);

struct DescentSettings {
  double epsilon = 1e-12;  ///< stop when J < epsilon
  long max_iter = 5000;
  AlphaRule alpha_rule = AlphaRule::minimal_error_squared;
  bool backtracking = true;
  double backtrack_shrink = 0.5;
  int max_backtrack = 30;

  void validate() const;
};

enum class DescentStatus { converged, iter_cap, stalled };

std::string_view to_string(DescentStatus status);

struct DescentRecord {
  std::vector<double> q;  // flattened iterate
  double J;
  double grad_norm;
  double alpha;  // accepted step (0 at the final record)
};

struct DescentTrace {
  std::vector<DescentRecord> iterations;
  DescentStatus status = DescentStatus::iter_cap;
  long forward_solves = 0;
  long adjoint_solves = 0;
};

/// Step length of the minimum-error gradient method. Returns nullopt
/// when grad_norm is zero (stationary point; the caller stops).
std::optional<double> step_size(double J_val, double grad_norm, AlphaRule rule);

/// Componentwise clamp into the box; idempotent.
ParameterVector project_box(const ParameterVector& q, const Box& box);

struct DescentResult {
  ParameterVector q;
  double J;
  DescentTrace trace;
};

/// Projected gradient descent on the misfit: evaluate J, stop if
/// J < epsilon, otherwise take an adjoint-gradient step with the
/// selected alpha rule; with backtracking on, alpha is halved until J
/// decreases or the halving cap trips (-> stalled).
///
/// Steps are taken in box-normalized coordinates (each component scaled
/// by its box width), so q_{n+1} = q_n - alpha_n W^2 J'(q_n) with W the
/// diagonal of widths; grad_norm in the trace is the scaled norm that
/// feeds the alpha rule. A zero-width (pinned) coordinate never moves.
DescentResult minimize_gradient(const ParameterVector& q0, const ObservationSet& obs,
                                std::span<const double> anchor_positions,
                                const SpaceTimeGrid& grid, const Box& box,
                                const DescentSettings& settings);

}  // namespace diffcal

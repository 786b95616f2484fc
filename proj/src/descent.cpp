#include "diffcal/descent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diffcal {

void Box::validate() const {
  if (lower.size() != upper.size() || lower.empty()) {
    throw std::invalid_argument("box bounds must be non-empty and of equal length");
  }
  for (std::size_t j = 0; j < lower.size(); ++j) {
    // degenerate (point) intervals are allowed: they pin a coordinate
    if (!(lower[j] <= upper[j])) {
      throw std::invalid_argument("box requires lower <= upper in every coordinate");
    }
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j])) {
      throw std::invalid_argument("box bounds must be finite");
    }
  }
}

bool Box::contains(std::span<const double> q) const {
  if (q.size() != lower.size()) return false;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] < lower[j] || q[j] > upper[j]) return false;
  }
  return true;
}

std::string_view to_string(AlphaRule rule) {
  return rule == AlphaRule::paper_literal ? "paper-literal" : "minimal-error-squared";
}

AlphaRule alpha_rule_from_string(std::string_view name) {
  if (name == "paper-literal") return AlphaRule::paper_literal;
  if (name == "minimal-error-squared") return AlphaRule::minimal_error_squared;
  throw std::invalid_argument("unknown alpha rule: " + std::string(name));
}

void DescentSettings::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (!(backtrack_shrink > 0.0 && backtrack_shrink < 1.0)) {
    throw std::invalid_argument("backtrack shrink factor must be in (0,1)");
  }
}

std::string_view to_string(DescentStatus status) {
  switch (status) {
    case DescentStatus::converged: return "converged";
    case DescentStatus::iter_cap: return "iter-cap";
    case DescentStatus::stalled: return "stalled";
  }
  return "unknown";
}

std::optional<double> step_size(double J_val, double grad_norm, AlphaRule rule) {
  if (J_val < 0.0 || !std::isfinite(J_val) || !std::isfinite(grad_norm)) {
    throw std::invalid_argument("step_size needs finite J >= 0 and finite gradient norm");
  }
  if (grad_norm == 0.0) return std::nullopt;
  if (rule == AlphaRule::paper_literal) return 2.0 * J_val / grad_norm;
  return 2.0 * J_val / (grad_norm * grad_norm);
}

ParameterVector project_box(const ParameterVector& q, const Box& box) {
  std::vector<double> flat = q.flatten();
  if (flat.size() != box.dimension()) {
    throw std::invalid_argument("box dimension does not match parameter vector");
  }
  for (std::size_t j = 0; j < flat.size(); ++j) {
    flat[j] = std::clamp(flat[j], box.lower[j], box.upper[j]);
  }
  return ParameterVector::from_flat(flat);
}

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

DescentResult minimize_gradient(const ParameterVector& q0, const ObservationSet& obs,
                                std::span<const double> anchor_positions,
                                const SpaceTimeGrid& grid, const Box& box,
                                const DescentSettings& settings) {
  settings.validate();
  box.validate();
  if (!box.contains(q0.flatten())) {
    throw std::invalid_argument("initial point lies outside the box");
  }

  DescentResult result{q0, 0.0, {}};
  DescentTrace& trace = result.trace;

  ParameterVector q = q0;
  MisfitResult cur = misfit(q, obs, anchor_positions, grid);
  double J = cur.J;
  trace.forward_solves++;

  int last_exponent = 0;
  for (long n = 0; n < settings.max_iter; ++n) {
    if (J < settings.epsilon) {
      trace.iterations.push_back({q.flatten(), J, 0.0, 0.0});
      trace.status = DescentStatus::converged;
      result.q = q;
      result.J = J;
      return result;
    }

    GradientResult gr = gradient_from(cur, q, obs, anchor_positions, grid);
    trace.adjoint_solves++;
    // The step is taken in box-normalized coordinates: scaling each
    // component by its box width evens out the wildly different
    // parameter magnitudes, and pinned coordinates (zero width) drop
    // out. Components pushing outward at an active bound cannot move
    // and must not enter the step-size norm either.
    const std::vector<double> flat = q.flatten();
    std::vector<double> scaled = gr.gradient;
    for (std::size_t j = 0; j < scaled.size(); ++j) {
      const double width = box.upper[j] - box.lower[j];
      const bool blocked = (flat[j] <= box.lower[j] && gr.gradient[j] > 0.0) ||
                           (flat[j] >= box.upper[j] && gr.gradient[j] < 0.0);
      scaled[j] = blocked ? 0.0 : width * gr.gradient[j];
    }
    const double gnorm = norm2(scaled);
    const auto alpha0 = step_size(J, gnorm, settings.alpha_rule);
    if (!alpha0) {
      trace.iterations.push_back({q.flatten(), J, gnorm, 0.0});
      trace.status = DescentStatus::stalled;
      result.q = q;
      result.J = J;
      return result;
    }

    // The safeguard remembers how many halvings the previous iteration
    // needed and starts one level above that, so a chronically
    // overshooting rule costs ~2 solves per iteration instead of many.
    int exponent = settings.backtracking ? std::max(0, last_exponent - 1) : 0;
    double alpha = *alpha0 * std::pow(settings.backtrack_shrink, exponent);
    ParameterVector q_next;
    MisfitResult next;
    bool accepted = false;
    const int tries = settings.backtracking ? settings.max_backtrack + 1 - exponent : 1;
    for (int attempt = 0; attempt < tries; ++attempt) {
      std::vector<double> cand = flat;
      for (std::size_t j = 0; j < cand.size(); ++j) {
        cand[j] -= alpha * (box.upper[j] - box.lower[j]) * scaled[j];
      }
      q_next = project_box(ParameterVector::from_flat(cand), box);
      next = misfit(q_next, obs, anchor_positions, grid);
      trace.forward_solves++;
      if (!settings.backtracking || next.J < J) {
        accepted = true;
        last_exponent = exponent;
        break;
      }
      alpha *= settings.backtrack_shrink;
      ++exponent;
    }

    trace.iterations.push_back({flat, J, gnorm, accepted ? alpha : 0.0});
    if (!accepted) {
      trace.status = DescentStatus::stalled;
      result.q = q;
      result.J = J;
      return result;
    }
    q = std::move(q_next);
    cur = std::move(next);
    J = cur.J;
  }

  trace.iterations.push_back({q.flatten(), J, 0.0, 0.0});
  trace.status = J < settings.epsilon ? DescentStatus::converged : DescentStatus::iter_cap;
  result.q = q;
  result.J = J;
  return result;
}

}  // namespace diffcal

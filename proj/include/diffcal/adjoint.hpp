#pragma once

#include <functional>
#include <span>
#include <vector>

#include "diffcal/forward.hpp"
#include "diffcal/grid.hpp"
#include "diffcal/model.hpp"

namespace diffcal {

/// Backward-in-time dual field Psi(x,t); terminal slice is zero.
struct AdjointField : Field {
  using Field::Field;
};

/// Discretized observation source b(x,t): each residual contributes
/// misfit_scale * 2 * (y - F), split bilinearly over the corners of its
/// enclosing cell and normalized by the corner's quadrature weight, so
/// that the weighted inner product <b, v> reproduces the point values.
struct SourceField : Field {
  using Field::Field;
};

/// Misfit gradient in ParameterVector flattening order:
/// (dJ/dd, dJ/dK_cap, dJ/dbeta1, dJ/dbeta2, dJ/dbeta3, dJ/dpsi_1..psi_Nx).
using GradientVector = std::vector<double>;

SourceField assemble_sources(const Field& field, const ObservationSet& obs,
                             const SpaceTimeGrid& grid);

/// Solves  dPsi/dt = -d d2Psi/dx2 - P(y) Psi + b,  Psi(x,T) = 0, no-flux
/// boundaries, by explicit stepping of the time-reversed problem. P is
/// the reaction derivative evaluated at the stored forward solution.
AdjointField solve_adjoint(const Field& field, const ParameterVector& q,
                           const SourceField& sources, const SpaceTimeGrid& grid);

struct GradientResult {
  GradientVector gradient;
  double J;
};

/// Adjoint-state gradient of the misfit: one forward and one backward
/// solve, then trapezoidal quadrature of
///   dJ/dd      = -int int y_xx Psi dx dt
///   dJ/dphi_m  = -int int (dmu/dphi_m) Psi dx dt   (phi = K_cap, betas)
///   dJ/dpsi    = -Psi(x, t0), pushed through the anchor interpolation.
GradientResult gradient(const ParameterVector& q, const ObservationSet& obs,
                        std::span<const double> anchor_positions, const SpaceTimeGrid& grid);

/// Same, reusing an already-solved forward field for q (the descent
/// loop hands over the accepted candidate's solve).
GradientResult gradient_from(const MisfitResult& solved, const ParameterVector& q,
                             const ObservationSet& obs,
                             std::span<const double> anchor_positions,
                             const SpaceTimeGrid& grid);

/// Linearized forward problem for a parameter perturbation dq:
///   d(dy)/dt = d dy_xx + P dy + sum_m R_m dphi_m + dd * y_xx,
///   dy(x,t0) = dpsi interpolated from the perturbed anchors.
Field solve_sensitivity(const ParameterVector& q, const ParameterVector& dq,
                        std::span<const double> anchor_positions, const SpaceTimeGrid& grid);

/// Central finite differences of an arbitrary functional; the step for
/// coordinate j is step*(1 + |q_j|).
GradientVector fd_gradient_of(const std::function<double(const ParameterVector&)>& fn,
                              const ParameterVector& q, double step);

/// Central finite differences of the misfit (2p forward solves).
GradientVector fd_gradient(const ParameterVector& q, const ObservationSet& obs,
                           std::span<const double> anchor_positions,
                           const SpaceTimeGrid& grid, double step);

}  // namespace diffcal

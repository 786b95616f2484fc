#pragma once

#include <functional>
#include <span>
#include <vector>

#include "diffcal/grid.hpp"
#include "diffcal/model.hpp"

namespace diffcal {

/// Measured densities F_ik at distances x_i and hours t_k.
/// values is row-major Nx x K: values[i*K + k].
struct ObservationSet {
  std::vector<double> distances;
  std::vector<double> times;
  std::vector<double> values;
  double noise_sigma = 0.0;

  std::size_t nx() const { return distances.size(); }
  std::size_t nk() const { return times.size(); }
  double value(std::size_t i, std::size_t k) const { return values[i * nk() + k]; }

  /// Throws std::invalid_argument if a point lies outside the grid
  /// domain or a value is non-finite.
  void validate(const SpaceTimeGrid& grid) const;
};

/// Leading factor of the misfit: (T-t0)*(L-l)/(K*Nx).
double misfit_scale(const SpaceTimeGrid& grid, const ObservationSet& obs);

/// Optional extra source term s(x,t) added to the right-hand side;
/// used by the verification tests (manufactured solutions).
using SourceFn = std::function<double(double x, double t)>;

/// Explicit forward-Euler stepping of
///   dy/dt = d * d2y/dx2 + r(t) y (1 - y/K_cap) [+ extra_source]
/// from a given initial profile. Checks the CFL bound up front and
/// throws divergence_error if the state goes non-finite.
Field solve_forward_profile(std::span<const double> initial_profile,
                            const LogisticParams& params, const SpaceTimeGrid& grid,
                            const SourceFn& extra_source = nullptr);

/// Forward solve from a ParameterVector: the initial profile is the
/// anchor interpolation at the given anchor positions.
Field solve_forward(const ParameterVector& q, std::span<const double> anchor_positions,
                    const SpaceTimeGrid& grid);

/// Bilinear sampling weights of one observation point: the 4 corners
/// of its enclosing space-time cell. These weights are shared between
/// observation sampling and the adjoint source assembly so the two
/// stay exact transposes of each other.
struct ObsStencil {
  int ix, it;           // lower-left node of the cell
  double wx1, wt1;      // weights of the upper node in each direction
};

ObsStencil obs_stencil(double x, double t, const SpaceTimeGrid& grid);

/// Bilinear interpolation of the field at every observation point;
/// returns a row-major Nx x K matrix of model values.
std::vector<double> sample_observations(const Field& field, const ObservationSet& obs);

struct MisfitResult {
  double J;
  Field field;  // retained so a following gradient pass never re-solves
};

/// J(q) = misfit_scale * sum_ik |y(x_i,t_k;q) - F_ik|^2.
MisfitResult misfit(const ParameterVector& q, const ObservationSet& obs,
                    std::span<const double> anchor_positions, const SpaceTimeGrid& grid);

}  // namespace diffcal

#pragma once

#include <span>
#include <vector>

namespace diffcal {

/// Uniform discretization of (l,L) x (t0,T) for the explicit solvers.
/// nx nodes in space (nx >= 3), nt time steps (nt+1 stored slices).
struct SpaceTimeGrid {
  double l = 1.0;
  double L = 6.0;
  double t0 = 1.0;
  double T = 24.0;
  int nx = 101;
  int nt = 2300;

  double dx() const { return (L - l) / (nx - 1); }
  double dt() const { return (T - t0) / nt; }
  double x(int i) const { return l + i * dx(); }
  double t(int k) const { return t0 + k * dt(); }

  /// Throws std::invalid_argument unless l < L, t0 < T, nx >= 3, nt >= 1.
  void validate() const;

  /// Throws stability_error unless d*dt/dx^2 <= 1/2; message names the
  /// maximal admissible dt.
  void check_cfl(double d) const;

  /// Trapezoidal quadrature weight of spatial node i (dx, halved at the
  /// two boundary nodes).
  double space_weight(int i) const;
  /// Trapezoidal quadrature weight of time slice k.
  double time_weight(int k) const;
};

/// Space-time array y(x_i, t_k), stored one spatial slice per step.
struct Field {
  SpaceTimeGrid grid;
  std::vector<double> values;  // values[k*nx + i]

  Field() = default;
  explicit Field(const SpaceTimeGrid& g)
      : grid(g), values(static_cast<std::size_t>(g.nx) * (g.nt + 1), 0.0) {}

  double& at(int i, int k) { return values[static_cast<std::size_t>(k) * grid.nx + i]; }
  double at(int i, int k) const { return values[static_cast<std::size_t>(k) * grid.nx + i]; }

  std::span<double> slice(int k) {
    return {values.data() + static_cast<std::size_t>(k) * grid.nx,
            static_cast<std::size_t>(grid.nx)};
  }
  std::span<const double> slice(int k) const {
    return {values.data() + static_cast<std::size_t>(k) * grid.nx,
            static_cast<std::size_t>(grid.nx)};
  }
};

/// Second-order 3-point Laplacian with no-flux boundaries imposed by
/// ghost-node reflection (y[-1] = y[1], y[nx] = y[nx-2]).
void laplacian(std::span<const double> y, double dx, std::span<double> out);

}  // namespace diffcal

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace diffcal {

struct SpaceTimeGrid;

/// Scalar coefficients of the diffusive logistic model.
///
/// The growth rate of the reaction term is time dependent:
///   r(t) = beta2/beta1 - exp(-beta1*(t-1)) * (beta2/beta1 - beta3),
/// so r(1) = beta3 and r(t) -> beta2/beta1 as t -> infinity.
struct LogisticParams {
  double d = 0.01;       ///< diffusivity (distance^2/hour)
  double K_cap = 25.0;   ///< carrying capacity (density)
  double beta1 = 1.5;    ///< decline rate (1/hour)
  double beta2 = 0.375;  ///< residual speed
  double beta3 = 1.65;   ///< initial growth rate (1/hour)

  /// Throws std::invalid_argument unless d >= 0, K_cap > 0, beta1 > 0
  /// and all fields are finite.
  void validate() const;
};

/// The full inverse-problem unknown: scalar coefficients plus the
/// initial density sampled at Nx anchor distances. Flattening order is
/// fixed everywhere: (d, K_cap, beta1, beta2, beta3, psi_1..psi_Nx).
struct ParameterVector {
  LogisticParams params;
  std::vector<double> psi_anchors;

  std::size_t dimension() const { return 5 + psi_anchors.size(); }

  std::vector<double> flatten() const;
  static ParameterVector from_flat(std::span<const double> q);

  /// Validates params and psi_anchors[i] >= 0.
  void validate() const;
};

/// Partial derivatives of r(t) with respect to (beta1, beta2, beta3).
struct GrowthRateJacobian {
  double d_beta1;
  double d_beta2;
  double d_beta3;
};

/// Partial derivatives of the reaction term with respect to the scalar
/// parameters it depends on, ordered (K_cap, beta1, beta2, beta3).
using ReactionParamDerivs = std::array<double, 4>;

/// r(t) = beta2/beta1 - exp(-beta1*(t-1)) * (beta2/beta1 - beta3).
/// Throws std::invalid_argument on non-finite input.
double growth_rate(double t, const LogisticParams& params);

/// Analytic partials of growth_rate; validated against central finite
/// differences in the test suite.
GrowthRateJacobian growth_rate_jacobian(double t, const LogisticParams& params);

/// mu(y, t) = r(t) * y * (1 - y/K_cap).
double reaction(double y, double t, const LogisticParams& params);

/// d(mu)/dy = r(t) * (1 - 2y/K_cap).
double reaction_dy(double y, double t, const LogisticParams& params);

/// (d(mu)/dK_cap, d(mu)/dbeta1, d(mu)/dbeta2, d(mu)/dbeta3).
ReactionParamDerivs reaction_dparams(double y, double t, const LogisticParams& params);

/// Piecewise-linear interpolation of the anchor values onto the grid
/// nodes, with constant extrapolation beyond the outermost anchors.
/// Requires at least two anchors at strictly increasing positions.
std::vector<double> interpolate_initial(std::span<const double> psi_anchors,
                                        std::span<const double> anchor_positions,
                                        const SpaceTimeGrid& grid);

/// Sparse representation of the linear map anchors -> grid profile.
/// Row i holds at most two (anchor index, weight) pairs whose weighted
/// sum gives the profile value at grid node i. Used both to apply the
/// interpolation and to apply its transpose in the gradient.
struct InitialInterpolation {
  struct Entry {
    int anchor;
    double weight;
  };
  std::vector<std::array<Entry, 2>> rows;  // second entry weight 0 if unused

  std::vector<double> apply(std::span<const double> anchors) const;
  /// Transpose action: grid-sized vector -> anchor-sized vector.
  std::vector<double> apply_transpose(std::span<const double> grid_values,
                                      std::size_t n_anchors) const;
};

InitialInterpolation build_initial_interpolation(std::span<const double> anchor_positions,
                                                 const SpaceTimeGrid& grid);

}  // namespace diffcal

#include "diffcal/model.hpp"

#include <cmath>
#include <stdexcept>

#include "diffcal/grid.hpp"

namespace diffcal {

namespace {

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be finite");
  }
}

}  // namespace

void LogisticParams::validate() const {
  require_finite(d, "d");
  require_finite(K_cap, "K_cap");
  require_finite(beta1, "beta1");
  require_finite(beta2, "beta2");
  require_finite(beta3, "beta3");
  if (d < 0.0) throw std::invalid_argument("d must be non-negative");
  if (K_cap <= 0.0) throw std::invalid_argument("K_cap must be positive");
  if (beta1 <= 0.0) throw std::invalid_argument("beta1 must be positive");
}

std::vector<double> ParameterVector::flatten() const {
  std::vector<double> q;
  q.reserve(dimension());
  q.push_back(params.d);
  q.push_back(params.K_cap);
  q.push_back(params.beta1);
  q.push_back(params.beta2);
  q.push_back(params.beta3);
  q.insert(q.end(), psi_anchors.begin(), psi_anchors.end());
  return q;
}

ParameterVector ParameterVector::from_flat(std::span<const double> q) {
  if (q.size() < 6) {
    throw std::invalid_argument("flattened parameter vector needs at least 6 entries");
  }
  ParameterVector p;
  p.params.d = q[0];
  p.params.K_cap = q[1];
  p.params.beta1 = q[2];
  p.params.beta2 = q[3];
  p.params.beta3 = q[4];
  p.psi_anchors.assign(q.begin() + 5, q.end());
  return p;
}

void ParameterVector::validate() const {
  params.validate();
  for (double psi : psi_anchors) {
    require_finite(psi, "psi anchor");
    if (psi < 0.0) throw std::invalid_argument("psi anchors must be non-negative");
  }
}

double growth_rate(double t, const LogisticParams& params) {
  require_finite(t, "t");
  params.validate();
  const double ratio = params.beta2 / params.beta1;
  return ratio - std::exp(-params.beta1 * (t - 1.0)) * (ratio - params.beta3);
}

GrowthRateJacobian growth_rate_jacobian(double t, const LogisticParams& params) {
  require_finite(t, "t");
  params.validate();
  const double b1 = params.beta1;
  const double ratio = params.beta2 / b1;
  const double e = std::exp(-b1 * (t - 1.0));
  GrowthRateJacobian jac;
  jac.d_beta1 = -params.beta2 / (b1 * b1) * (1.0 - e) + (t - 1.0) * e * (ratio - params.beta3);
  jac.d_beta2 = (1.0 - e) / b1;
  jac.d_beta3 = e;
  return jac;
}

double reaction(double y, double t, const LogisticParams& params) {
  require_finite(y, "y");
  return growth_rate(t, params) * y * (1.0 - y / params.K_cap);
}

double reaction_dy(double y, double t, const LogisticParams& params) {
  require_finite(y, "y");
  return growth_rate(t, params) * (1.0 - 2.0 * y / params.K_cap);
}

ReactionParamDerivs reaction_dparams(double y, double t, const LogisticParams& params) {
  require_finite(y, "y");
  const double r = growth_rate(t, params);
  const GrowthRateJacobian jac = growth_rate_jacobian(t, params);
  const double logistic = y * (1.0 - y / params.K_cap);
  ReactionParamDerivs out;
  out[0] = r * y * y / (params.K_cap * params.K_cap);  // d/dK_cap
  out[1] = logistic * jac.d_beta1;
  out[2] = logistic * jac.d_beta2;
  out[3] = logistic * jac.d_beta3;
  return out;
}

InitialInterpolation build_initial_interpolation(std::span<const double> anchor_positions,
                                                 const SpaceTimeGrid& grid) {
  if (anchor_positions.size() < 2) {
    throw std::invalid_argument("need at least 2 anchor positions");
  }
  for (std::size_t j = 0; j + 1 < anchor_positions.size(); ++j) {
    if (!(anchor_positions[j] < anchor_positions[j + 1])) {
      throw std::invalid_argument("anchor positions must be strictly increasing");
    }
  }
  if (anchor_positions.front() < grid.l || anchor_positions.back() > grid.L) {
    throw std::invalid_argument("anchor positions must lie inside [l, L]");
  }

  InitialInterpolation interp;
  interp.rows.resize(grid.nx);
  std::size_t seg = 0;  // current anchor segment, advances with x
  for (int i = 0; i < grid.nx; ++i) {
    const double x = grid.x(i);
    auto& row = interp.rows[i];
    if (x <= anchor_positions.front()) {
      row = {{{0, 1.0}, {0, 0.0}}};
      continue;
    }
    if (x >= anchor_positions.back()) {
      row = {{{static_cast<int>(anchor_positions.size()) - 1, 1.0}, {0, 0.0}}};
      continue;
    }
    while (anchor_positions[seg + 1] < x) ++seg;
    const double x0 = anchor_positions[seg];
    const double x1 = anchor_positions[seg + 1];
    const double w = (x - x0) / (x1 - x0);
    row = {{{static_cast<int>(seg), 1.0 - w}, {static_cast<int>(seg) + 1, w}}};
  }
  return interp;
}

std::vector<double> InitialInterpolation::apply(std::span<const double> anchors) const {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    out[i] = row[0].weight * anchors[row[0].anchor] + row[1].weight * anchors[row[1].anchor];
  }
  return out;
}

std::vector<double> InitialInterpolation::apply_transpose(std::span<const double> grid_values,
                                                          std::size_t n_anchors) const {
  std::vector<double> out(n_anchors, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    out[row[0].anchor] += row[0].weight * grid_values[i];
    out[row[1].anchor] += row[1].weight * grid_values[i];
  }
  return out;
}

std::vector<double> interpolate_initial(std::span<const double> psi_anchors,
                                        std::span<const double> anchor_positions,
                                        const SpaceTimeGrid& grid) {
  if (psi_anchors.size() != anchor_positions.size()) {
    throw std::invalid_argument("anchor values and positions must have equal length");
  }
  return build_initial_interpolation(anchor_positions, grid).apply(psi_anchors);
}

}  // namespace diffcal

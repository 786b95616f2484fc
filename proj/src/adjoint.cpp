#include "diffcal/adjoint.hpp"

#include <cmath>
#include <sstream>

#include "diffcal/errors.hpp"

namespace diffcal {

SourceField assemble_sources(const Field& field, const ObservationSet& obs,
                             const SpaceTimeGrid& grid) {
  obs.validate(grid);
  const auto sampled = sample_observations(field, obs);
  const double scale = misfit_scale(grid, obs);

  SourceField sources(grid);
  for (std::size_t i = 0; i < obs.nx(); ++i) {
    for (std::size_t k = 0; k < obs.nk(); ++k) {
      const double residual = sampled[i * obs.nk() + k] - obs.value(i, k);
      const double strength = scale * 2.0 * residual;
      ObsStencil st = obs_stencil(obs.distances[i], obs.times[k], grid);
      // The terminal slice is pinned to zero and never enters the
      // backward recursion; shift any weight landing there one step
      // down (position error <= dt).
      if (st.it == grid.nt - 1 && st.wt1 > 0.0) {
        st.wt1 = 0.0;
      }
      const double wx[2] = {1.0 - st.wx1, st.wx1};
      const double wt[2] = {1.0 - st.wt1, st.wt1};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          if (wx[a] * wt[b] == 0.0) continue;
          const int ii = st.ix + a;
          const int kk = st.it + b;
          // Normalize by the quadrature weight of the receiving node so
          // that sum_i w_i b_i v_i recovers the point value (the delta
          // discretization stays consistent at the halved boundary
          // weights too).
          sources.at(ii, kk) +=
              strength * wx[a] * wt[b] / (grid.space_weight(ii) * grid.dt());
        }
      }
    }
  }
  return sources;
}

AdjointField solve_adjoint(const Field& field, const ParameterVector& q,
                           const SourceField& sources, const SpaceTimeGrid& grid) {
  q.validate();
  grid.check_cfl(q.params.d);

  AdjointField psi(grid);
  const double dt = grid.dt();
  const double dx = grid.dx();
  std::vector<double> lap(grid.nx);
  // Terminal condition Psi(x,T) = 0; step the time-reversed problem
  // (forward parabolic after tau = T - t). The reaction linearization P
  // is taken at the target slice k, which matches the linearization of
  // the explicit forward step from slice k.
  for (int k = grid.nt - 1; k >= 0; --k) {
    auto next = psi.slice(k + 1);
    auto cur = psi.slice(k);
    laplacian(next, dx, lap);
    const double t = grid.t(k);
    const auto y = field.slice(k);
    for (int i = 0; i < grid.nx; ++i) {
      const double p = reaction_dy(y[i], t, q.params);
      cur[i] = next[i] + dt * (q.params.d * lap[i] + p * next[i] - sources.at(i, k));
    }
    for (int i = 0; i < grid.nx; ++i) {
      if (!std::isfinite(cur[i])) {
        std::ostringstream msg;
        msg << "adjoint solve diverged at step " << k << " (t = " << t << "), node " << i;
        throw divergence_error(k, msg.str());
      }
    }
  }
  return psi;
}

GradientResult gradient(const ParameterVector& q, const ObservationSet& obs,
                        std::span<const double> anchor_positions, const SpaceTimeGrid& grid) {
  return gradient_from(misfit(q, obs, anchor_positions, grid), q, obs, anchor_positions,
                       grid);
}

GradientResult gradient_from(const MisfitResult& mf, const ParameterVector& q,
                             const ObservationSet& obs,
                             std::span<const double> anchor_positions,
                             const SpaceTimeGrid& grid) {
  const SourceField sources = assemble_sources(mf.field, obs, grid);
  const AdjointField psi = solve_adjoint(mf.field, q, sources, grid);

  const std::size_t n_anchors = q.psi_anchors.size();
  GradientVector grad(5 + n_anchors, 0.0);

  // Space-time quadrature of the coefficient entries: coefficients at
  // slice k against an average of the two adjacent adjoint slices. The
  // explicit stepping pairs slice k with Psi at k+1, so the average is
  // weighted toward the upper slice; the remaining staggering bias is
  // O(dt) and shrinks under refinement.
  std::vector<double> lap(grid.nx);
  for (int k = 0; k < grid.nt; ++k) {
    const double t = grid.t(k);
    const auto y = mf.field.slice(k);
    const auto p0 = psi.slice(k);
    const auto p1 = psi.slice(k + 1);
    laplacian(y, grid.dx(), lap);
    for (int i = 0; i < grid.nx; ++i) {
      const double w = grid.dt() * grid.space_weight(i);
      const double p_mid = 0.25 * p0[i] + 0.75 * p1[i];
      const ReactionParamDerivs r = reaction_dparams(y[i], t, q.params);
      grad[0] -= w * lap[i] * p_mid;    // d
      grad[1] -= w * r[0] * p_mid;      // K_cap
      grad[2] -= w * r[1] * p_mid;      // beta1
      grad[3] -= w * r[2] * p_mid;      // beta2
      grad[4] -= w * r[3] * p_mid;      // beta3
    }
  }

  // dJ/dpsi(x) = -Psi(x, t0); chain rule through the anchor interpolation
  // with the spatial quadrature weights.
  const auto interp = build_initial_interpolation(anchor_positions, grid);
  std::vector<double> weighted(grid.nx);
  const auto psi0 = psi.slice(0);
  for (int i = 0; i < grid.nx; ++i) {
    weighted[i] = -grid.space_weight(i) * psi0[i];
  }
  const auto anchor_grad = interp.apply_transpose(weighted, n_anchors);
  for (std::size_t j = 0; j < n_anchors; ++j) {
    grad[5 + j] = anchor_grad[j];
  }

  return {std::move(grad), mf.J};
}

Field solve_sensitivity(const ParameterVector& q, const ParameterVector& dq,
                        std::span<const double> anchor_positions, const SpaceTimeGrid& grid) {
  if (dq.psi_anchors.size() != q.psi_anchors.size()) {
    throw std::invalid_argument("perturbation anchor count does not match parameters");
  }
  const Field base = solve_forward(q, anchor_positions, grid);

  Field dy(grid);
  const auto interp = build_initial_interpolation(anchor_positions, grid);
  const auto dpsi = interp.apply(dq.psi_anchors);
  std::copy(dpsi.begin(), dpsi.end(), dy.slice(0).begin());

  const double dt = grid.dt();
  const double dx = grid.dx();
  std::vector<double> lap_dy(grid.nx), lap_y(grid.nx);
  for (int k = 0; k < grid.nt; ++k) {
    const double t = grid.t(k);
    const auto y = base.slice(k);
    auto cur = dy.slice(k);
    auto next = dy.slice(k + 1);
    laplacian(cur, dx, lap_dy);
    laplacian(y, dx, lap_y);
    for (int i = 0; i < grid.nx; ++i) {
      const double p = reaction_dy(y[i], t, q.params);
      const ReactionParamDerivs r = reaction_dparams(y[i], t, q.params);
      const double coeff_term = r[0] * dq.params.K_cap + r[1] * dq.params.beta1 +
                                r[2] * dq.params.beta2 + r[3] * dq.params.beta3;
      next[i] = cur[i] + dt * (q.params.d * lap_dy[i] + p * cur[i] + coeff_term +
                               dq.params.d * lap_y[i]);
    }
    for (int i = 0; i < grid.nx; ++i) {
      if (!std::isfinite(next[i])) {
        std::ostringstream msg;
        msg << "sensitivity solve diverged at step " << k + 1;
        throw divergence_error(k + 1, msg.str());
      }
    }
  }
  return dy;
}

GradientVector fd_gradient_of(const std::function<double(const ParameterVector&)>& fn,
                              const ParameterVector& q, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd step must be positive");
  const std::vector<double> flat = q.flatten();
  GradientVector grad(flat.size());
  for (std::size_t j = 0; j < flat.size(); ++j) {
    const double h = step * (1.0 + std::abs(flat[j]));
    std::vector<double> plus = flat, minus = flat;
    plus[j] += h;
    minus[j] -= h;
    const double fp = fn(ParameterVector::from_flat(plus));
    const double fm = fn(ParameterVector::from_flat(minus));
    grad[j] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

GradientVector fd_gradient(const ParameterVector& q, const ObservationSet& obs,
                           std::span<const double> anchor_positions,
                           const SpaceTimeGrid& grid, double step) {
  return fd_gradient_of(
      [&](const ParameterVector& p) { return misfit(p, obs, anchor_positions, grid).J; }, q,
      step);
}

}  // namespace diffcal

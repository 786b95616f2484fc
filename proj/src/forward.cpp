#include "diffcal/forward.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "diffcal/errors.hpp"

namespace diffcal {

void ObservationSet::validate(const SpaceTimeGrid& grid) const {
  if (values.size() != distances.size() * times.size()) {
    throw std::invalid_argument("observation matrix shape does not match schedule");
  }
  for (double x : distances) {
    if (!(x >= grid.l && x <= grid.L)) {
      throw std::invalid_argument("observation distance outside [l, L]");
    }
  }
  for (double t : times) {
    if (!(t >= grid.t0 && t <= grid.T)) {
      throw std::invalid_argument("observation time outside [t0, T]");
    }
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("observation value not finite");
  }
}

double misfit_scale(const SpaceTimeGrid& grid, const ObservationSet& obs) {
  return (grid.T - grid.t0) * (grid.L - grid.l) /
         (static_cast<double>(obs.nk()) * static_cast<double>(obs.nx()));
}

Field solve_forward_profile(std::span<const double> initial_profile,
                            const LogisticParams& params, const SpaceTimeGrid& grid,
                            const SourceFn& extra_source) {
  grid.validate();
  params.validate();
  grid.check_cfl(params.d);
  if (static_cast<int>(initial_profile.size()) != grid.nx) {
    throw std::invalid_argument("initial profile size does not match grid");
  }

  Field field(grid);
  auto first = field.slice(0);
  std::copy(initial_profile.begin(), initial_profile.end(), first.begin());

  const double dt = grid.dt();
  const double dx = grid.dx();
  std::vector<double> lap(grid.nx);
  for (int k = 0; k < grid.nt; ++k) {
    const double t = grid.t(k);
    const double r = growth_rate(t, params);
    auto y = field.slice(k);
    auto next = field.slice(k + 1);
    laplacian(y, dx, lap);
    for (int i = 0; i < grid.nx; ++i) {
      double rhs = params.d * lap[i] + r * y[i] * (1.0 - y[i] / params.K_cap);
      if (extra_source) rhs += extra_source(grid.x(i), t);
      next[i] = y[i] + dt * rhs;
    }
    for (int i = 0; i < grid.nx; ++i) {
      if (!std::isfinite(next[i])) {
        std::ostringstream msg;
        msg << "forward solve diverged at step " << k + 1 << " (t = " << grid.t(k + 1)
            << "), node " << i;
        throw divergence_error(k + 1, msg.str());
      }
    }
  }
  return field;
}

Field solve_forward(const ParameterVector& q, std::span<const double> anchor_positions,
                    const SpaceTimeGrid& grid) {
  q.validate();
  const auto profile = interpolate_initial(q.psi_anchors, anchor_positions, grid);
  return solve_forward_profile(profile, q.params, grid);
}

ObsStencil obs_stencil(double x, double t, const SpaceTimeGrid& grid) {
  if (!(x >= grid.l && x <= grid.L && t >= grid.t0 && t <= grid.T)) {
    throw std::invalid_argument("sample point outside grid domain");
  }
  ObsStencil st;
  const double fx = (x - grid.l) / grid.dx();
  const double ft = (t - grid.t0) / grid.dt();
  st.ix = std::min(static_cast<int>(fx), grid.nx - 2);
  st.it = std::min(static_cast<int>(ft), grid.nt - 1);
  st.wx1 = fx - st.ix;
  st.wt1 = ft - st.it;
  return st;
}

std::vector<double> sample_observations(const Field& field, const ObservationSet& obs) {
  const SpaceTimeGrid& grid = field.grid;
  obs.validate(grid);
  std::vector<double> sampled(obs.nx() * obs.nk());
  for (std::size_t i = 0; i < obs.nx(); ++i) {
    for (std::size_t k = 0; k < obs.nk(); ++k) {
      const ObsStencil st = obs_stencil(obs.distances[i], obs.times[k], grid);
      const double v00 = field.at(st.ix, st.it);
      const double v10 = field.at(st.ix + 1, st.it);
      const double v01 = field.at(st.ix, st.it + 1);
      const double v11 = field.at(st.ix + 1, st.it + 1);
      sampled[i * obs.nk() + k] = (1.0 - st.wx1) * (1.0 - st.wt1) * v00 +
                                  st.wx1 * (1.0 - st.wt1) * v10 +
                                  (1.0 - st.wx1) * st.wt1 * v01 + st.wx1 * st.wt1 * v11;
    }
  }
  return sampled;
}

MisfitResult misfit(const ParameterVector& q, const ObservationSet& obs,
                    std::span<const double> anchor_positions, const SpaceTimeGrid& grid) {
  MisfitResult result{0.0, solve_forward(q, anchor_positions, grid)};
  const auto sampled = sample_observations(result.field, obs);
  double sum = 0.0;
  for (std::size_t idx = 0; idx < sampled.size(); ++idx) {
    const double r = sampled[idx] - obs.values[idx];
    sum += r * r;
  }
  result.J = misfit_scale(grid, obs) * sum;
  return result;
}

}  // namespace diffcal

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "diffcal/adjoint.hpp"
#include "diffcal/errors.hpp"
#include "diffcal/forward.hpp"

using namespace diffcal;

namespace {

const std::vector<double> anchor_positions = {1, 2, 3, 4, 5, 6};

ParameterVector table_vector() {
  ParameterVector q;
  q.params = LogisticParams{0.01, 25.0, 1.5, 0.375, 1.65};
  q.psi_anchors = {2.0, 1.5, 1.0, 0.6, 0.3, 0.1};
  return q;
}

SpaceTimeGrid reference_grid() { return SpaceTimeGrid{1.0, 6.0, 1.0, 24.0, 101, 2300}; }

ObservationSet make_data(const ParameterVector& q, const SpaceTimeGrid& grid) {
  ObservationSet obs;
  obs.distances = {1, 2, 3, 4, 5, 6};
  obs.times = {5, 6, 7, 8, 9, 10};
  obs.values.assign(36, 0.0);
  const Field f = solve_forward(q, anchor_positions, grid);
  obs.values = sample_observations(f, obs);
  return obs;
}

ParameterVector perturbed(const ParameterVector& base, std::mt19937_64& rng, double amount) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> flat = base.flatten();
  for (double& v : flat) v *= 1.0 + amount * u(rng);
  return ParameterVector::from_flat(flat);
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  return dot(a, b) / (norm2(a) * norm2(b));
}

// Space-time inner product with the quadrature weights the gradient
// assembly uses.
double weighted_inner(const Field& a, const Field& b, const SpaceTimeGrid& grid) {
  double s = 0.0;
  for (int k = 0; k <= grid.nt; ++k) {
    for (int i = 0; i < grid.nx; ++i) {
      s += grid.time_weight(k) * grid.space_weight(i) * a.at(i, k) * b.at(i, k);
    }
  }
  return s;
}

// Componentwise relative error with a small-component floor: the
// continuous-adjoint discretization bias scales with the overall
// gradient magnitude, so components below 2% of the dominant entry are
// measured against that scale (their own magnitude is not resolvable).
double max_componentwise_rel(std::span<const double> a, std::span<const double> b) {
  double b_max = 0.0;
  for (double v : b) b_max = std::max(b_max, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 2e-2 * b_max});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("source assembly") {
  const SpaceTimeGrid grid = reference_grid();
  const ParameterVector q = table_vector();
  const ObservationSet obs = make_data(q, grid);
  const Field f = solve_forward(q, anchor_positions, grid);

  SUBCASE("zero residuals give a zero source field") {
    const SourceField src = assemble_sources(f, obs, grid);
    for (double v : src.values) CHECK(v == 0.0);
  }

  SUBCASE("single node-aligned residual lands in one cell") {
    ObservationSet one;
    one.distances = {3.0};  // interior grid node (index 40)
    one.times = {7.0};      // grid time (index 600)
    const auto model = [&] {
      ObservationSet probe = one;
      probe.values = {0.0};
      return sample_observations(f, probe);
    }();
    one.values = {model[0] - 2.5};  // residual +2.5

    const SourceField src = assemble_sources(f, one, grid);
    const double scale = misfit_scale(grid, one);
    const double expected = scale * 2.0 * 2.5 / (grid.dx() * grid.dt());
    CHECK(src.at(40, 600) == doctest::Approx(expected).epsilon(1e-12));
    double total = 0.0;
    for (double v : src.values) total += std::abs(v);
    CHECK(total == doctest::Approx(std::abs(expected)).epsilon(1e-12));
  }

  SUBCASE("sources are linear in the residual") {
    ObservationSet obs1 = obs, obs2 = obs;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t idx = 0; idx < obs.values.size(); ++idx) {
      const double r = u(rng);
      obs1.values[idx] = obs.values[idx] - r;
      obs2.values[idx] = obs.values[idx] - 2.0 * r;
    }
    const SourceField s1 = assemble_sources(f, obs1, grid);
    const SourceField s2 = assemble_sources(f, obs2, grid);
    for (std::size_t i = 0; i < s1.values.size(); ++i) {
      CHECK(s2.values[i] == doctest::Approx(2.0 * s1.values[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("adjoint solve basics") {
  const SpaceTimeGrid grid = reference_grid();
  const ParameterVector q = table_vector();
  const Field f = solve_forward(q, anchor_positions, grid);

  SUBCASE("zero sources give zero adjoint") {
    const SourceField zero(grid);
    const AdjointField psi = solve_adjoint(f, q, zero, grid);
    for (double v : psi.values) CHECK(v == 0.0);
  }

  SUBCASE("terminal slice is zero even with active sources") {
    ObservationSet obs = make_data(q, grid);
    for (double& v : obs.values) v += 0.3;
    const SourceField src = assemble_sources(f, obs, grid);
    const AdjointField psi = solve_adjoint(f, q, src, grid);
    for (int i = 0; i < grid.nx; ++i) CHECK(psi.at(i, grid.nt) == 0.0);
    double total = 0.0;
    for (double v : psi.values) total += std::abs(v);
    CHECK(total > 0.0);
  }
}

TEST_CASE("discrete duality identity for pure diffusion") {
  // With the reaction switched off, <b, dy> must equal -<dpsi, Psi(t0)>:
  // the same misfit variation computed through the two dual routes.
  SpaceTimeGrid grid = reference_grid();
  ParameterVector q = table_vector();
  q.params.beta2 = 0.0;
  q.params.beta3 = 0.0;
  q.params.d = 0.03;

  ObservationSet obs = make_data(q, grid);
  for (double& v : obs.values) v *= 0.9;  // nonzero residuals

  const Field f = solve_forward(q, anchor_positions, grid);
  const SourceField src = assemble_sources(f, obs, grid);
  const AdjointField psi = solve_adjoint(f, q, src, grid);

  ParameterVector dq;
  dq.params = LogisticParams{0.0, 0.0, 0.0, 0.0, 0.0};
  dq.psi_anchors = {0.21, -0.13, 0.4, 0.02, -0.3, 0.11};
  const Field dy = solve_sensitivity(q, dq, anchor_positions, grid);

  const double lhs = weighted_inner(src, dy, grid);

  const auto interp = build_initial_interpolation(anchor_positions, grid);
  const auto dpsi = interp.apply(dq.psi_anchors);
  double rhs = 0.0;
  for (int i = 0; i < grid.nx; ++i) {
    rhs -= grid.space_weight(i) * dpsi[i] * psi.at(i, 0);
  }
  CHECK(std::abs(lhs - rhs) <= 1e-3 * std::abs(lhs));
}

TEST_CASE("gradient vanishes at the exact parameters on noiseless data") {
  const SpaceTimeGrid grid = reference_grid();
  const ParameterVector q = table_vector();
  const ObservationSet obs = make_data(q, grid);
  const auto res = gradient(q, obs, anchor_positions, grid);
  CHECK(res.J <= 1e-25);
  CHECK(norm2(res.gradient) <= 1e-8 * std::max(1.0, norm2(q.flatten())));
}

TEST_CASE("adjoint gradient agrees with central finite differences") {
  const SpaceTimeGrid grid = reference_grid();
  const ParameterVector q_exact = table_vector();
  const ObservationSet obs = make_data(q_exact, grid);

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 3; ++trial) {
    const ParameterVector q = perturbed(q_exact, rng, 0.08);
    const auto adj = gradient(q, obs, anchor_positions, grid);
    const auto fd = fd_gradient(q, obs, anchor_positions, grid, 1e-6);

    INFO("trial ", trial);
    CHECK(cosine(adj.gradient, fd) >= 0.999);
    CHECK(max_componentwise_rel(adj.gradient, fd) <= 1e-2);
  }
}

TEST_CASE("gradient is linear in the residual at fixed state") {
  const SpaceTimeGrid grid = reference_grid();
  const ParameterVector q_exact = table_vector();
  std::mt19937_64 rng(7);
  const ParameterVector q = perturbed(q_exact, rng, 0.05);

  // data1: residual rho; data2: residual c*rho (replace F by y - c(y-F))
  const Field f = solve_forward(q, anchor_positions, grid);
  ObservationSet obs = make_data(q_exact, grid);
  const auto y_model = sample_observations(f, obs);
  const double c = 3.7;
  ObservationSet obs_scaled = obs;
  for (std::size_t i = 0; i < obs.values.size(); ++i) {
    obs_scaled.values[i] = y_model[i] - c * (y_model[i] - obs.values[i]);
  }

  const auto g1 = gradient(q, obs, anchor_positions, grid);
  const auto g2 = gradient(q, obs_scaled, anchor_positions, grid);
  for (std::size_t j = 0; j < g1.gradient.size(); ++j) {
    CHECK(g2.gradient[j] == doctest::Approx(c * g1.gradient[j]).epsilon(1e-12));
  }
}

TEST_CASE("sensitivity solve") {
  const SpaceTimeGrid grid = reference_grid();
  const ParameterVector q_exact = table_vector();
  const ObservationSet obs = make_data(q_exact, grid);
  std::mt19937_64 rng(13);
  const ParameterVector q = perturbed(q_exact, rng, 0.05);

  SUBCASE("zero perturbation gives zero deviation") {
    ParameterVector dq;
    dq.params = LogisticParams{0.0, 0.0, 0.0, 0.0, 0.0};
    dq.psi_anchors.assign(6, 0.0);
    const Field dy = solve_sensitivity(q, dq, anchor_positions, grid);
    for (double v : dy.values) CHECK(v == 0.0);
  }

  SUBCASE("three gradient representations agree") {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
      // random unit direction, scaled per component magnitude
      std::vector<double> dir(q.dimension());
      const std::vector<double> flat = q.flatten();
      for (std::size_t j = 0; j < dir.size(); ++j) dir[j] = u(rng) * (1.0 + flat[j]);
      const double dn = norm2(dir);
      for (double& v : dir) v /= dn;

      const auto adj = gradient(q, obs, anchor_positions, grid);
      const double by_adjoint = dot(adj.gradient, dir);

      // linearized-misfit route: sum 2 scale (y-F) dy at the observations
      const ParameterVector dq = ParameterVector::from_flat(dir);
      const Field dy = solve_sensitivity(q, dq, anchor_positions, grid);
      const Field y = solve_forward(q, anchor_positions, grid);
      const auto y_obs = sample_observations(y, obs);
      const auto dy_obs = sample_observations(dy, obs);
      double by_sensitivity = 0.0;
      for (std::size_t i = 0; i < y_obs.size(); ++i) {
        by_sensitivity +=
            2.0 * misfit_scale(grid, obs) * (y_obs[i] - obs.values[i]) * dy_obs[i];
      }

      // secant route
      const double eps = 1e-5;
      std::vector<double> plus = flat, minus = flat;
      for (std::size_t j = 0; j < flat.size(); ++j) {
        plus[j] += eps * dir[j];
        minus[j] -= eps * dir[j];
      }
      const double Jp =
          misfit(ParameterVector::from_flat(plus), obs, anchor_positions, grid).J;
      const double Jm =
          misfit(ParameterVector::from_flat(minus), obs, anchor_positions, grid).J;
      const double by_secant = (Jp - Jm) / (2.0 * eps);

      INFO("trial ", trial, ": adjoint ", by_adjoint, ", sensitivity ", by_sensitivity,
           ", secant ", by_secant);
      const double ref = std::max({std::abs(by_adjoint), std::abs(by_sensitivity),
                                   std::abs(by_secant)});
      CHECK(std::abs(by_adjoint - by_sensitivity) <= 1e-2 * ref);
      CHECK(std::abs(by_adjoint - by_secant) <= 1e-2 * ref);
      CHECK(std::abs(by_sensitivity - by_secant) <= 1e-2 * ref);
    }
  }
}

TEST_CASE("fd_gradient oracle behaviour") {
  SUBCASE("exact on a quadratic functional") {
    // J(q) = sum_j c_j (q_j - a_j)^2 has gradient 2 c_j (q_j - a_j)
    const std::vector<double> c = {1.0, 0.2, 3.0, 0.5, 2.0, 1.0, 1.0, 0.1, 0.7, 1.3, 0.4};
    const std::vector<double> a = {0.1, 20.0, 1.0, 0.3, 1.2, 2.0, 1.0, 0.5, 0.2, 0.1, 0.05};
    auto fn = [&](const ParameterVector& q) {
      const auto flat = q.flatten();
      double J = 0.0;
      for (std::size_t j = 0; j < flat.size(); ++j) {
        J += c[j] * (flat[j] - a[j]) * (flat[j] - a[j]);
      }
      return J;
    };
    const ParameterVector q = table_vector();
    const auto flat = q.flatten();
    const double step = 1e-7;
    const auto fd = fd_gradient_of(fn, q, step);
    for (std::size_t j = 0; j < fd.size(); ++j) {
      const double exact = 2.0 * c[j] * (flat[j] - a[j]);
      CHECK(fd[j] == doctest::Approx(exact).epsilon(1e-6));
    }
  }

  SUBCASE("zero at the exact parameters on noiseless data") {
    const SpaceTimeGrid grid{1.0, 6.0, 1.0, 24.0, 51, 600};
    const ParameterVector q = table_vector();
    const ObservationSet obs = make_data(q, grid);
    const auto fd = fd_gradient(q, obs, anchor_positions, grid, 1e-6);
    const auto fd_half = fd_gradient(q, obs, anchor_positions, grid, 5e-7);
    double worst = 0.0, worst_half = 0.0;
    for (double v : fd) worst = std::max(worst, std::abs(v));
    for (double v : fd_half) worst_half = std::max(worst_half, std::abs(v));
    CHECK(worst <= 1e-5);
    // residual is pure truncation, so halving the step quarters it
    CHECK(worst_half <= 0.5 * worst);
  }

  SUBCASE("rejects a non-positive step") {
    const ParameterVector q = table_vector();
    CHECK_THROWS_AS(fd_gradient_of([](const ParameterVector&) { return 0.0; }, q, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("gradient components vary smoothly in q") {
  const SpaceTimeGrid grid = reference_grid();
  const ParameterVector q_exact = table_vector();
  const ObservationSet obs = make_data(q_exact, grid);
  std::mt19937_64 rng(41);
  const ParameterVector q = perturbed(q_exact, rng, 0.05);

  const auto g0 = gradient(q, obs, anchor_positions, grid);
  std::vector<double> flat = q.flatten();
  for (double& v : flat) v *= 1.0 + 1e-8;
  const auto g1 = gradient(ParameterVector::from_flat(flat), obs, anchor_positions, grid);

  double g_max = 0.0;
  for (double v : g0.gradient) g_max = std::max(g_max, std::abs(v));
  for (std::size_t j = 0; j < g0.gradient.size(); ++j) {
    const double denom = std::max(std::abs(g0.gradient[j]), 1e-6 * g_max);
    CHECK(std::abs(g1.gradient[j] - g0.gradient[j]) / denom <= 1e-4);
  }
}

TEST_CASE("observations at the terminal time keep FD agreement") {
  // the terminal adjoint slice is pinned to zero, so a measurement at
  // t = T has its source shifted one step down
  const SpaceTimeGrid grid = reference_grid();
  const ParameterVector q_exact = table_vector();
  ObservationSet obs;
  obs.distances = {1, 2, 3, 4, 5, 6};
  obs.times = {5.0, 12.0, grid.T};
  obs.values.assign(18, 0.0);
  obs.values = sample_observations(solve_forward(q_exact, anchor_positions, grid), obs);

  std::mt19937_64 rng(61);
  const ParameterVector q = perturbed(q_exact, rng, 0.08);
  const auto adj = gradient(q, obs, anchor_positions, grid);
  const auto fd = fd_gradient(q, obs, anchor_positions, grid, 1e-6);
  CHECK(cosine(adj.gradient, fd) >= 0.999);
  // the one-step shift costs O(dt) on the terminal observation's
  // contribution, so the envelope is looser than for interior schedules
  CHECK(max_componentwise_rel(adj.gradient, fd) <= 2e-2);
}

TEST_CASE("adjoint/secant discrepancy shrinks under refinement") {
  const ParameterVector q_exact = table_vector();
  std::mt19937_64 rng(53);
  const ParameterVector q = perturbed(q_exact, rng, 0.08);

  auto discrepancy = [&](const SpaceTimeGrid& grid) {
    const ObservationSet obs = make_data(q_exact, grid);
    const auto adj = gradient(q, obs, anchor_positions, grid);
    const auto fd = fd_gradient(q, obs, anchor_positions, grid, 1e-6);
    double num = 0.0;
    for (std::size_t j = 0; j < fd.size(); ++j) {
      num += (adj.gradient[j] - fd[j]) * (adj.gradient[j] - fd[j]);
    }
    return std::sqrt(num) / norm2(fd);
  };

  const SpaceTimeGrid coarse{1.0, 6.0, 1.0, 24.0, 101, 2300};
  const SpaceTimeGrid fine{1.0, 6.0, 1.0, 24.0, 201, 9200};  // dx/2, dt/4
  const double d_coarse = discrepancy(coarse);
  const double d_fine = discrepancy(fine);
  INFO("coarse ", d_coarse, " fine ", d_fine);
  CHECK(d_fine < d_coarse);
}

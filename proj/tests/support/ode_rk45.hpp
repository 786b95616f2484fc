#pragma once

// Adaptive Cash-Karp Runge-Kutta integrator used as an independent
// oracle for the PDE solver tests. Deliberately self-contained: it
// shares no code with the solvers it checks.

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

/// Integrates y' = f(t, y) from (t0, y0) to t_end with local error
/// control at tolerance tol (mixed absolute/relative).
inline double integrate_rk45(const std::function<double(double, double)>& f, double t0,
                             double y0, double t_end, double tol = 1e-10) {
  double t = t0;
  double y = y0;
  double h = (t_end - t0) / 100.0;
  const double h_min = (t_end - t0) * 1e-14;

  int guard = 0;
  while (t < t_end) {
    if (++guard > 10'000'000) throw std::runtime_error("rk45: too many steps");
    if (t + h > t_end) h = t_end - t;

    const double k1 = f(t, y);
    const double k2 = f(t + h / 5.0, y + h * (k1 / 5.0));
    const double k3 = f(t + 3.0 * h / 10.0, y + h * (3.0 * k1 / 40.0 + 9.0 * k2 / 40.0));
    const double k4 = f(t + 3.0 * h / 5.0,
                        y + h * (3.0 * k1 / 10.0 - 9.0 * k2 / 10.0 + 6.0 * k3 / 5.0));
    const double k5 = f(t + h, y + h * (-11.0 * k1 / 54.0 + 5.0 * k2 / 2.0 -
                                        70.0 * k3 / 27.0 + 35.0 * k4 / 27.0));
    const double k6 =
        f(t + 7.0 * h / 8.0,
          y + h * (1631.0 * k1 / 55296.0 + 175.0 * k2 / 512.0 + 575.0 * k3 / 13824.0 +
                   44275.0 * k4 / 110592.0 + 253.0 * k5 / 4096.0));

    const double y5 = y + h * (37.0 * k1 / 378.0 + 250.0 * k3 / 621.0 +
                               125.0 * k4 / 594.0 + 512.0 * k6 / 1771.0);
    const double y4 = y + h * (2825.0 * k1 / 27648.0 + 18575.0 * k3 / 48384.0 +
                               13525.0 * k4 / 55296.0 + 277.0 * k5 / 14336.0 + k6 / 4.0);

    const double err = std::abs(y5 - y4);
    const double scale = tol * (std::abs(y) + std::abs(h * k1) + 1e-30);
    if (err <= scale || h <= h_min) {
      t += h;
      y = y5;
    }
    const double factor = err > 0.0 ? 0.9 * std::pow(scale / err, 0.2) : 5.0;
    h *= std::min(5.0, std::max(0.1, factor));
    if (h < h_min) h = h_min;
  }
  return y;
}

}  // namespace oracle

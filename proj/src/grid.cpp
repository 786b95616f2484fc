#include "diffcal/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "diffcal/errors.hpp"

namespace diffcal {

void SpaceTimeGrid::validate() const {
  if (!(std::isfinite(l) && std::isfinite(L) && std::isfinite(t0) && std::isfinite(T))) {
    throw std::invalid_argument("grid bounds must be finite");
  }
  if (!(l < L)) throw std::invalid_argument("grid requires l < L");
  if (!(t0 < T)) throw std::invalid_argument("grid requires t0 < T");
  if (nx < 3) throw std::invalid_argument("grid requires nx >= 3");
  if (nt < 1) throw std::invalid_argument("grid requires nt >= 1");
}

void SpaceTimeGrid::check_cfl(double d) const {
  if (d <= 0.0) return;
  const double h = dx();
  const double max_dt = 0.5 * h * h / d;
  if (dt() > max_dt) {
    std::ostringstream msg;
    msg << "explicit scheme unstable: d*dt/dx^2 = " << d * dt() / (h * h)
        << " > 0.5; maximal admissible dt = " << max_dt;
    throw stability_error(dt(), max_dt, msg.str());
  }
}

double SpaceTimeGrid::space_weight(int i) const {
  return (i == 0 || i == nx - 1) ? 0.5 * dx() : dx();
}

double SpaceTimeGrid::time_weight(int k) const {
  return (k == 0 || k == nt) ? 0.5 * dt() : dt();
}

void laplacian(std::span<const double> y, double dx, std::span<double> out) {
  const std::size_t n = y.size();
  const double inv_dx2 = 1.0 / (dx * dx);
  out[0] = 2.0 * (y[1] - y[0]) * inv_dx2;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out[i] = (y[i - 1] - 2.0 * y[i] + y[i + 1]) * inv_dx2;
  }
  out[n - 1] = 2.0 * (y[n - 2] - y[n - 1]) * inv_dx2;
}

}  // namespace diffcal

#include "diffcal/csv.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

namespace diffcal {

namespace {

std::ostream& full_precision(std::ostream& os) {
  os.precision(std::numeric_limits<double>::max_digits10);
  return os;
}

}  // namespace

void write_field_csv(std::ostream& os, const Field& field) {
  full_precision(os) << "x,t,y\n";
  for (int i = 0; i < field.grid.nx; ++i) {
    for (int k = 0; k <= field.grid.nt; ++k) {
      os << field.grid.x(i) << ',' << field.grid.t(k) << ',' << field.at(i, k) << '\n';
    }
  }
}

void write_observations_csv(std::ostream& os, const ObservationSet& obs) {
  full_precision(os) << "x,t,F\n";
  for (std::size_t i = 0; i < obs.nx(); ++i) {
    for (std::size_t k = 0; k < obs.nk(); ++k) {
      os << obs.distances[i] << ',' << obs.times[k] << ',' << obs.value(i, k) << '\n';
    }
  }
}

void write_tt_trace_csv(std::ostream& os, const TTResult& result) {
  full_precision(os) << "sweep,evals,best_J\n";
  for (const auto& rec : result.trace) {
    os << rec.sweep << ',' << rec.evals << ',' << rec.best_J << '\n';
  }
}

void write_descent_trace_csv(std::ostream& os, const DescentTrace& trace) {
  full_precision(os) << "iter,J,grad_norm,alpha\n";
  for (std::size_t n = 0; n < trace.iterations.size(); ++n) {
    const auto& rec = trace.iterations[n];
    os << n << ',' << rec.J << ',' << rec.grad_norm << ',' << rec.alpha << '\n';
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace diffcal

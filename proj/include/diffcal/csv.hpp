#pragma once

#include <filesystem>
#include <ostream>

#include "diffcal/descent.hpp"
#include "diffcal/forward.hpp"
#include "diffcal/grid.hpp"
#include "diffcal/ttopt.hpp"

namespace diffcal {

/// header `x,t,y`, row-major over (node, step)
void write_field_csv(std::ostream& os, const Field& field);

/// header `x,t,F`
void write_observations_csv(std::ostream& os, const ObservationSet& obs);

/// header `sweep,evals,best_J`
void write_tt_trace_csv(std::ostream& os, const TTResult& result);

/// header `iter,J,grad_norm,alpha`
void write_descent_trace_csv(std::ostream& os, const DescentTrace& trace);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace diffcal

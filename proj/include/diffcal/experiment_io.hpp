#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "diffcal/pipeline.hpp"

namespace diffcal {

nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);

ExperimentSpec load_spec(const std::filesystem::path& path);
void save_spec(const ExperimentSpec& spec, const std::filesystem::path& path);

nlohmann::json to_json(const ParameterVector& q);
ParameterVector parameter_vector_from_json(const nlohmann::json& j);

nlohmann::json result_to_json(const InversionResult& result, const ExperimentSpec& spec);

/// Applies flat `a.b.c=value` overrides onto a spec JSON tree; values
/// parse as JSON scalars/arrays when possible, else as strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

ObservationSet observations_from_csv(const std::filesystem::path& path);

}  // namespace diffcal

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "diffcal/adjoint.hpp"
#include "diffcal/descent.hpp"
#include "diffcal/forward.hpp"
#include "diffcal/grid.hpp"
#include "diffcal/model.hpp"
#include "diffcal/ttopt.hpp"

namespace diffcal {

/// Everything needed to run one synthetic calibration experiment.
struct ExperimentSpec {
  int schema_version = 1;
  ParameterVector exact;
  std::vector<double> anchor_positions;
  SpaceTimeGrid grid;
  std::vector<double> obs_distances;
  std::vector<double> obs_times;
  double noise_sigma = 0.0;
  /// When set, synthetic data is generated on a dx/2, dt/4 grid so the
  /// inversion never sees its own discretization.
  bool inverse_crime_guard = false;
  std::uint64_t seed = 20240817ull;
  TTOptions ttopt;
  Box box;
  DescentSettings descent;
  /// descent.epsilon <= 0 selects the default 1e-10 * scale * sum F^2.
  double descent_epsilon_rel = 1e-10;

  void validate() const;
};

/// The reference experiment: hourly observations at distances 1..6
/// between hours 5 and 10, horizon 24 h, noiseless.
ExperimentSpec reference_spec();

ObservationSet generate_synthetic(const ExperimentSpec& spec);

enum class InversionMethod { tt, grad, combined };

std::string_view to_string(InversionMethod m);
InversionMethod inversion_method_from_string(std::string_view name);

struct TTStageResult {
  ParameterVector q;
  double J = 0.0;
  TTResult raw;
};

struct GradStageResult {
  ParameterVector q;
  double J = 0.0;
  DescentTrace trace;
};

struct InversionResult {
  InversionMethod method = InversionMethod::combined;
  std::optional<TTStageResult> tt;
  std::optional<GradStageResult> grad;
  ParameterVector q_final;
  double J_final = 0.0;
  /// Relative errors of (d, K_cap, beta1, beta2, beta3) against the
  /// spec's exact values.
  std::array<double, 5> scalar_rel_errors{};
  double E_psi = 0.0;  ///< L2-relative error of the anchor profile
  double E_r = 0.0;    ///< L2-relative error of r(t) on 200 uniform samples
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// ||predicted - exact||_2 / ||exact||_2 over a common sample grid.
/// Throws std::invalid_argument when exact is identically zero.
double relative_error(std::span<const double> predicted, std::span<const double> exact);

/// TT global stage followed (for method combined) by the gradient
/// stage started at the TT point; either stage alone via method tt /
/// grad (grad starts from the box center).
InversionResult invert(const ExperimentSpec& spec, const ObservationSet& data,
                       InversionMethod method);

/// Writes result.json plus the CSV curves (TT and descent traces,
/// r(t), psi, density profiles, observations) into the directory.
void export_report(const InversionResult& result, const ExperimentSpec& spec,
                   const ObservationSet& data, const std::filesystem::path& dir);

/// Batch misfit objective over flattened parameter vectors; batches
/// run concurrently on up to PDE_TTOPT_THREADS threads (default: the
/// machine core count).
BatchObjective make_misfit_objective(const ExperimentSpec& spec, const ObservationSet& data);

/// Resolved descent stopping threshold for this data set.
double default_epsilon(const ExperimentSpec& spec, const ObservationSet& data);

/// Evaluator concurrency cap from PDE_TTOPT_THREADS (machine core
/// count when unset).
unsigned evaluator_thread_cap();

}  // namespace diffcal

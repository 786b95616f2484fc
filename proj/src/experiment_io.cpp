#include "diffcal/experiment_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "diffcal/csv.hpp"

namespace diffcal {

using nlohmann::json;

json to_json(const ParameterVector& q) {
  return json{{"d", q.params.d},
              {"K_cap", q.params.K_cap},
              {"beta1", q.params.beta1},
              {"beta2", q.params.beta2},
              {"beta3", q.params.beta3},
              {"psi_anchors", q.psi_anchors}};
}

ParameterVector parameter_vector_from_json(const json& j) {
  ParameterVector q;
  q.params.d = j.at("d").get<double>();
  q.params.K_cap = j.at("K_cap").get<double>();
  q.params.beta1 = j.at("beta1").get<double>();
  q.params.beta2 = j.at("beta2").get<double>();
  q.params.beta3 = j.at("beta3").get<double>();
  q.psi_anchors = j.at("psi_anchors").get<std::vector<double>>();
  return q;
}

json to_json(const ExperimentSpec& spec) {
  return json{
      {"schema_version", spec.schema_version},
      {"exact", to_json(spec.exact)},
      {"anchor_positions", spec.anchor_positions},
      {"grid",
       {{"l", spec.grid.l},
        {"L", spec.grid.L},
        {"t0", spec.grid.t0},
        {"T", spec.grid.T},
        {"nx", spec.grid.nx},
        {"nt", spec.grid.nt}}},
      {"observations", {{"distances", spec.obs_distances}, {"times", spec.obs_times}}},
      {"noise_sigma", spec.noise_sigma},
      {"inverse_crime_guard", spec.inverse_crime_guard},
      {"seed", spec.seed},
      {"ttopt",
       {{"r_max", spec.ttopt.r_max},
        {"n", spec.ttopt.n},
        {"n_sweeps", spec.ttopt.n_sweeps},
        {"maxvol_tol", spec.ttopt.maxvol_tol},
        {"max_evals", spec.ttopt.max_evals}}},
      {"box", {{"lower", spec.box.lower}, {"upper", spec.box.upper}}},
      {"descent",
       {{"epsilon", spec.descent.epsilon},
        {"max_iter", spec.descent.max_iter},
        {"alpha_rule", std::string(to_string(spec.descent.alpha_rule))},
        {"backtracking", spec.descent.backtracking},
        {"backtrack_shrink", spec.descent.backtrack_shrink},
        {"max_backtrack", spec.descent.max_backtrack}}},
      {"descent_epsilon_rel", spec.descent_epsilon_rel}};
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec spec = reference_spec();
  if (j.contains("schema_version")) spec.schema_version = j.at("schema_version").get<int>();
  if (spec.schema_version != 1) {
    throw std::invalid_argument("unsupported spec schema_version");
  }
  if (j.contains("exact")) spec.exact = parameter_vector_from_json(j.at("exact"));
  if (j.contains("anchor_positions")) {
    spec.anchor_positions = j.at("anchor_positions").get<std::vector<double>>();
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (g.contains("l")) spec.grid.l = g.at("l").get<double>();
    if (g.contains("L")) spec.grid.L = g.at("L").get<double>();
    if (g.contains("t0")) spec.grid.t0 = g.at("t0").get<double>();
    if (g.contains("T")) spec.grid.T = g.at("T").get<double>();
    if (g.contains("nx")) spec.grid.nx = g.at("nx").get<int>();
    if (g.contains("nt")) spec.grid.nt = g.at("nt").get<int>();
  }
  if (j.contains("observations")) {
    const auto& o = j.at("observations");
    if (o.contains("distances")) {
      spec.obs_distances = o.at("distances").get<std::vector<double>>();
    }
    if (o.contains("times")) spec.obs_times = o.at("times").get<std::vector<double>>();
  }
  if (j.contains("noise_sigma")) spec.noise_sigma = j.at("noise_sigma").get<double>();
  if (j.contains("inverse_crime_guard")) {
    spec.inverse_crime_guard = j.at("inverse_crime_guard").get<bool>();
  }
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("ttopt")) {
    const auto& t = j.at("ttopt");
    if (t.contains("r_max")) spec.ttopt.r_max = t.at("r_max").get<int>();
    if (t.contains("n")) spec.ttopt.n = t.at("n").get<int>();
    if (t.contains("n_sweeps")) spec.ttopt.n_sweeps = t.at("n_sweeps").get<int>();
    if (t.contains("maxvol_tol")) spec.ttopt.maxvol_tol = t.at("maxvol_tol").get<double>();
    if (t.contains("max_evals")) spec.ttopt.max_evals = t.at("max_evals").get<long>();
  }
  if (j.contains("box")) {
    spec.box.lower = j.at("box").at("lower").get<std::vector<double>>();
    spec.box.upper = j.at("box").at("upper").get<std::vector<double>>();
  }
  if (j.contains("descent")) {
    const auto& d = j.at("descent");
    if (d.contains("epsilon")) spec.descent.epsilon = d.at("epsilon").get<double>();
    if (d.contains("max_iter")) spec.descent.max_iter = d.at("max_iter").get<long>();
    if (d.contains("alpha_rule")) {
      spec.descent.alpha_rule = alpha_rule_from_string(d.at("alpha_rule").get<std::string>());
    }
    if (d.contains("backtracking")) {
      spec.descent.backtracking = d.at("backtracking").get<bool>();
    }
    if (d.contains("backtrack_shrink")) {
      spec.descent.backtrack_shrink = d.at("backtrack_shrink").get<double>();
    }
    if (d.contains("max_backtrack")) {
      spec.descent.max_backtrack = d.at("max_backtrack").get<int>();
    }
  }
  if (j.contains("descent_epsilon_rel")) {
    spec.descent_epsilon_rel = j.at("descent_epsilon_rel").get<double>();
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open spec file " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("spec file " + path.string() + " is not valid JSON: " +
                                e.what());
  }
  return spec_from_json(j);
}

void save_spec(const ExperimentSpec& spec, const std::filesystem::path& path) {
  write_file(path, to_json(spec).dump(2) + "\n");
}

namespace {

json errors_block(const ParameterVector& q, const ExperimentSpec& spec) {
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  const LogisticParams& e = spec.exact.params;
  json out{{"d", rel(q.params.d, e.d)},
           {"K_cap", rel(q.params.K_cap, e.K_cap)},
           {"beta1", rel(q.params.beta1, e.beta1)},
           {"beta2", rel(q.params.beta2, e.beta2)},
           {"beta3", rel(q.params.beta3, e.beta3)}};
  return out;
}

}  // namespace

json result_to_json(const InversionResult& result, const ExperimentSpec& spec) {
  json j{{"schema_version", 1},
         {"method", std::string(to_string(result.method))},
         {"seed", result.seed},
         {"exact", to_json(spec.exact)}};

  if (result.tt) {
    const TTResult& raw = result.tt->raw;
    j["tt"] = json{{"q", to_json(result.tt->q)},
                   {"J", result.tt->J},
                   {"eval_count", raw.eval_count},
                   {"budget_exhausted", raw.budget_exhausted},
                   {"relative_errors", errors_block(result.tt->q, spec)},
                   {"hyperparameters",
                    {{"r_max", raw.options.r_max},
                     {"n", raw.options.n},
                     {"n_sweeps", raw.options.n_sweeps},
                     {"maxvol_tol", raw.options.maxvol_tol},
                     {"max_evals", raw.options.max_evals},
                     {"seed", raw.options.seed}}}};
  }
  if (result.grad) {
    j["gradient"] = json{{"q", to_json(result.grad->q)},
                         {"J", result.grad->J},
                         {"status", std::string(to_string(result.grad->trace.status))},
                         {"iterations", result.grad->trace.iterations.size()},
                         {"forward_solves", result.grad->trace.forward_solves},
                         {"adjoint_solves", result.grad->trace.adjoint_solves}};
  }
  j["final"] = json{{"q", to_json(result.q_final)},
                    {"J", result.J_final},
                    {"relative_errors", errors_block(result.q_final, spec)},
                    {"E_psi", result.E_psi},
                    {"E_r", result.E_r}};
  j["timing"] = json{{"wall_seconds", result.wall_seconds}};
  return j;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override must look like key.path=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &j;
  std::istringstream keys(path);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) {
    if (key.empty()) throw std::invalid_argument("empty key in override path: " + path);
    parts.push_back(key);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
  }
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // plain string
  (*node)[parts.back()] = parsed;
}

ObservationSet observations_from_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open observations file " + path.string());
  std::string line;
  if (!std::getline(is, line)) {
    throw std::invalid_argument("observations file " + path.string() + " is empty");
  }
  std::vector<double> xs, ts;
  std::map<std::pair<double, double>, double> cells;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string fx, ft, fv;
    if (!std::getline(row, fx, ',') || !std::getline(row, ft, ',') ||
        !std::getline(row, fv, ',')) {
      throw std::invalid_argument("malformed observations row: " + line);
    }
    const double x = std::stod(fx), t = std::stod(ft), v = std::stod(fv);
    if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    if (std::find(ts.begin(), ts.end(), t) == ts.end()) ts.push_back(t);
    cells[{x, t}] = v;
  }
  ObservationSet obs;
  obs.distances = xs;
  obs.times = ts;
  obs.values.resize(xs.size() * ts.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const auto it = cells.find({xs[i], ts[k]});
      if (it == cells.end()) {
        throw std::invalid_argument("observations file is not a complete (x,t) grid");
      }
      obs.values[i * ts.size() + k] = it->second;
    }
  }
  return obs;
}

void export_report(const InversionResult& result, const ExperimentSpec& spec,
                   const ObservationSet& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  write_file(dir / "result.json", result_to_json(result, spec).dump(2) + "\n");

  std::ostringstream obs_csv;
  write_observations_csv(obs_csv, data);
  write_file(dir / "observations.csv", obs_csv.str());

  if (result.tt) {
    std::ostringstream os;
    write_tt_trace_csv(os, result.tt->raw);
    write_file(dir / "trace_tt.csv", os.str());
  }
  if (result.grad) {
    std::ostringstream os;
    write_descent_trace_csv(os, result.grad->trace);
    write_file(dir / "trace_grad.csv", os.str());
  }

  {
    std::ostringstream os;
    os.precision(17);
    os << "t,r_exact,r_pred\n";
    const int n_samples = 200;
    for (int i = 0; i < n_samples; ++i) {
      const double t = spec.grid.t0 + (spec.grid.T - spec.grid.t0) * i / (n_samples - 1);
      os << t << ',' << growth_rate(t, spec.exact.params) << ','
         << growth_rate(t, result.q_final.params) << '\n';
    }
    write_file(dir / "r_curve.csv", os.str());
  }

  {
    std::ostringstream os;
    os.precision(17);
    os << "x,psi_exact,psi_pred\n";
    for (std::size_t i = 0; i < spec.anchor_positions.size(); ++i) {
      os << spec.anchor_positions[i] << ',' << spec.exact.psi_anchors[i] << ','
         << result.q_final.psi_anchors[i] << '\n';
    }
    write_file(dir / "psi_curve.csv", os.str());
  }

  {
    // Density profiles 1..5 hours after release, exact vs predicted.
    const Field exact_field = solve_forward(spec.exact, spec.anchor_positions, spec.grid);
    const Field pred_field = solve_forward(result.q_final, spec.anchor_positions, spec.grid);
    std::ostringstream os;
    os.precision(17);
    os << "hours_after,x,y_exact,y_pred\n";
    for (int hour = 1; hour <= 5; ++hour) {
      const double t = spec.grid.t0 + hour;
      if (t > spec.grid.T) break;
      const int k = static_cast<int>(std::lround((t - spec.grid.t0) / spec.grid.dt()));
      for (int i = 0; i < spec.grid.nx; ++i) {
        os << hour << ',' << spec.grid.x(i) << ',' << exact_field.at(i, k) << ','
           << pred_field.at(i, k) << '\n';
      }
    }
    write_file(dir / "density_curves.csv", os.str());
  }
}

}  // namespace diffcal

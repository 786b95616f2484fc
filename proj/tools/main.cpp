#include <CLI11.hpp>

#include <algorithm>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "diffcal/csv.hpp"
#include "diffcal/errors.hpp"
#include "diffcal/experiment_io.hpp"
#include "diffcal/pipeline.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string spec_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  bool have_seed = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_out = true) {
  cmd->add_option("--spec", opts.spec_path,
                  "Experiment spec file (JSON); defaults to the built-in reference setup")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides,
                  "Override a spec entry, e.g. --set ttopt.n=64 (beats the spec file)");
  if (with_out) {
    cmd->add_option("-o,--out", opts.out_dir, "Output directory (created if missing)");
  }
  auto* seed_opt = cmd->add_option("--seed", opts.seed, "Override the experiment seed");
  seed_opt->each([&opts](const std::string&) { opts.have_seed = true; });
}

diffcal::ExperimentSpec load_spec_with_overrides(const CommonOptions& opts) {
  json j;
  if (opts.spec_path.empty()) {
    j = diffcal::to_json(diffcal::reference_spec());
  } else {
    std::ifstream is(opts.spec_path);
    if (!is) throw std::invalid_argument("cannot open spec file " + opts.spec_path);
    try {
      is >> j;
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(std::string("spec file is not valid JSON: ") + e.what());
    }
  }
  for (const auto& assignment : opts.overrides) {
    diffcal::apply_override(j, assignment);
  }
  if (opts.have_seed) j["seed"] = opts.seed;
  return diffcal::spec_from_json(j);
}

fs::path ensure_out_dir(const CommonOptions& opts) {
  fs::path dir(opts.out_dir);
  fs::create_directories(dir);
  return dir;
}

void print_error_object(std::string_view type, const std::string& message) {
  json err{{"error", {{"type", std::string(type)}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
}

int cmd_simulate(const CommonOptions& opts) {
  const auto spec = load_spec_with_overrides(opts);
  const auto dir = ensure_out_dir(opts);
  const diffcal::Field field =
      diffcal::solve_forward(spec.exact, spec.anchor_positions, spec.grid);
  std::ostringstream os;
  diffcal::write_field_csv(os, field);
  diffcal::write_file(dir / "field.csv", os.str());
  std::cout << "wrote " << (dir / "field.csv").string() << " (" << spec.grid.nx << " x "
            << spec.grid.nt + 1 << " samples)\n";
  return 0;
}

int cmd_make_data(const CommonOptions& opts) {
  const auto spec = load_spec_with_overrides(opts);
  const auto dir = ensure_out_dir(opts);
  const auto obs = diffcal::generate_synthetic(spec);
  std::ostringstream os;
  diffcal::write_observations_csv(os, obs);
  diffcal::write_file(dir / "observations.csv", os.str());
  diffcal::save_spec(spec, dir / "spec_used.json");
  std::cout << "wrote " << (dir / "observations.csv").string() << " (" << obs.nx() << " x "
            << obs.nk() << " values)\n";
  return 0;
}

int cmd_invert(const CommonOptions& opts, const std::string& method_name,
               const std::string& data_path) {
  const auto spec = load_spec_with_overrides(opts);
  const auto method = diffcal::inversion_method_from_string(method_name);
  const auto dir = ensure_out_dir(opts);

  diffcal::ObservationSet data;
  if (data_path.empty()) {
    data = diffcal::generate_synthetic(spec);
  } else {
    data = diffcal::observations_from_csv(data_path);
    data.noise_sigma = spec.noise_sigma;
  }

  const auto result = diffcal::invert(spec, data, method);
  diffcal::export_report(result, spec, data, dir);

  std::ostringstream summary;
  summary.precision(6);
  summary << "method=" << diffcal::to_string(method) << "  J_final=" << result.J_final
          << "  E_psi=" << result.E_psi << "  E_r=" << result.E_r;
  std::cout << summary.str() << "\n";
  std::cout << "wrote " << (dir / "result.json").string() << "\n";

  if (result.grad && result.grad->trace.status == diffcal::DescentStatus::stalled) {
    print_error_object("stall", "gradient stage stalled before reaching the threshold");
    return 2;
  }
  return 0;
}

int cmd_grad_check(const CommonOptions& opts) {
  const auto spec = load_spec_with_overrides(opts);
  const auto data = diffcal::generate_synthetic(spec);

  // Random admissible probe near the exact values, clipped to the box.
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng]() {
    return (static_cast<double>(rng()) + 0.5) / 18446744073709551616.0;
  };
  std::vector<double> flat = spec.exact.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    flat[i] *= 1.0 + 0.1 * (2.0 * uniform() - 1.0);
    flat[i] = std::clamp(flat[i], spec.box.lower[i] + 1e-6, spec.box.upper[i] - 1e-6);
  }
  const auto q = diffcal::ParameterVector::from_flat(flat);

  const auto adj = diffcal::gradient(q, data, spec.anchor_positions, spec.grid);
  const auto fd = diffcal::fd_gradient(q, data, spec.anchor_positions, spec.grid, 1e-6);

  double dot = 0.0, na = 0.0, nf = 0.0, max_rel = 0.0, fd_max = 0.0;
  for (double v : fd) fd_max = std::max(fd_max, std::abs(v));
  for (std::size_t i = 0; i < fd.size(); ++i) {
    dot += adj.gradient[i] * fd[i];
    na += adj.gradient[i] * adj.gradient[i];
    nf += fd[i] * fd[i];
    const double denom =
        std::max({std::abs(adj.gradient[i]), std::abs(fd[i]), 1e-8 * fd_max});
    max_rel = std::max(max_rel, std::abs(adj.gradient[i] - fd[i]) / denom);
  }
  const double cosine = dot / (std::sqrt(na) * std::sqrt(nf));

  std::cout.precision(8);
  std::cout << "cosine_similarity=" << cosine << "\n";
  std::cout << "max_componentwise_rel_error=" << max_rel << "\n";
  const bool ok = cosine >= 0.999 && max_rel <= 1e-2;
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 2;
}

int cmd_benchmark_ttopt(const CommonOptions& opts) {
  const auto dir = ensure_out_dir(opts);
  std::uint64_t seed = opts.have_seed ? opts.seed : 20240817ull;
  json report;

  {  // separable quadratic, exact argmin known on-grid
    diffcal::ParameterBox box;
    box.bounds.lower = {0.0, 0.0, 0.0};
    box.bounds.upper = {1.0, 1.0, 1.0};
    box.n = 8;
    const std::vector<double> c = {2.0 / 7, 5.0 / 7, 1.0 / 7};
    auto objective = [&c](const std::vector<std::vector<double>>& pts) {
      std::vector<double> out(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
          s += (pts[i][j] - c[j]) * (pts[i][j] - c[j]);
        }
        out[i] = s;
      }
      return out;
    };
    diffcal::TTOptions options;
    options.n = box.n;
    options.seed = seed;
    const auto res = diffcal::tt_minimize(objective, box, options);
    report["separable"] = {{"J_best", res.J_best},
                           {"eval_count", res.eval_count},
                           {"q_best", res.q_best}};
    std::cout << "separable: J_best=" << res.J_best << " evals=" << res.eval_count << "\n";
  }

  {  // Rosenbrock on a 64-point grid
    diffcal::ParameterBox box;
    box.bounds.lower = {-2.0, -2.0};
    box.bounds.upper = {2.0, 2.0};
    box.n = 64;
    auto objective = [](const std::vector<std::vector<double>>& pts) {
      std::vector<double> out(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double x = pts[i][0], y = pts[i][1];
        out[i] = (1.0 - x) * (1.0 - x) + 100.0 * (y - x * x) * (y - x * x);
      }
      return out;
    };
    diffcal::TTOptions options;
    options.n = box.n;
    options.seed = seed;
    const auto res = diffcal::tt_minimize(objective, box, options);
    std::ostringstream os;
    diffcal::write_tt_trace_csv(os, res);
    diffcal::write_file(dir / "benchmark_rosenbrock_trace.csv", os.str());
    report["rosenbrock"] = {{"J_best", res.J_best},
                            {"eval_count", res.eval_count},
                            {"q_best", res.q_best}};
    std::cout << "rosenbrock: J_best=" << res.J_best << " evals=" << res.eval_count << "\n";
  }

  report["seed"] = seed;
  diffcal::write_file(dir / "benchmark_ttopt.json", report.dump(2) + "\n");
  std::cout << "wrote " << (dir / "benchmark_ttopt.json").string() << "\n";
  return 0;
}

std::map<std::string, std::vector<double>> read_csv_columns(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument(path.string() + " is empty");
  std::vector<std::string> names;
  {
    std::istringstream head(line);
    std::string name;
    while (std::getline(head, name, ',')) names.push_back(name);
  }
  std::map<std::string, std::vector<double>> cols;
  for (const auto& n : names) cols[n] = {};
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    for (const auto& n : names) {
      if (!std::getline(row, cell, ',')) {
        throw std::invalid_argument("short row in " + path.string());
      }
      cols[n].push_back(std::stod(cell));
    }
  }
  return cols;
}

int cmd_plot(const std::string& dir_name) {
  const fs::path dir(dir_name);
  namespace svg = diffcal::svg;

  {
    auto cols = read_csv_columns(dir / "r_curve.csv");
    svg::ChartSpec chart{"Growth rate r(t)", "t (hours)", "r"};
    std::vector<svg::Series> series{
        {"exact", cols["t"], cols["r_exact"], "#1f77b4", false, false},
        {"reconstructed", cols["t"], cols["r_pred"], "#d62728", true, false}};
    diffcal::write_file(dir / "r_t.svg", svg::line_chart(chart, series));
  }
  {
    auto cols = read_csv_columns(dir / "psi_curve.csv");
    svg::ChartSpec chart{"Initial density anchors", "x (distance)", "psi"};
    std::vector<svg::Series> series{
        {"exact", cols["x"], cols["psi_exact"], "#1f77b4", false, true},
        {"reconstructed", cols["x"], cols["psi_pred"], "#d62728", true, true}};
    diffcal::write_file(dir / "psi.svg", svg::line_chart(chart, series));
  }
  {
    auto cols = read_csv_columns(dir / "density_curves.csv");
    const std::vector<std::string> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd"};
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> exact, pred;
    for (std::size_t i = 0; i < cols["hours_after"].size(); ++i) {
      const int h = static_cast<int>(cols["hours_after"][i]);
      exact[h].first.push_back(cols["x"][i]);
      exact[h].second.push_back(cols["y_exact"][i]);
      pred[h].first.push_back(cols["x"][i]);
      pred[h].second.push_back(cols["y_pred"][i]);
    }
    std::vector<svg::Series> series;
    for (const auto& [h, xy] : exact) {
      const auto& color = palette[(h - 1) % palette.size()];
      series.push_back({std::to_string(h) + "h actual", xy.first, xy.second, color, false,
                        false});
      series.push_back({std::to_string(h) + "h predicted", pred[h].first, pred[h].second,
                        color, true, false});
    }
    svg::ChartSpec chart{"Density of influenced users", "x (distance)", "density"};
    diffcal::write_file(dir / "density.svg", svg::line_chart(chart, series));
  }
  std::cout << "wrote " << (dir / "r_t.svg").string() << ", " << (dir / "psi.svg").string()
            << ", " << (dir / "density.svg").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibration toolkit for the diffusive logistic information-spread model"};
  app.require_subcommand(1);

  CommonOptions sim_opts, data_opts, inv_opts, check_opts, bench_opts;
  std::string method = "combined";
  std::string data_path;
  std::string plot_dir = ".";

  auto* simulate = app.add_subcommand("simulate", "Forward solve at the exact parameters");
  add_common(simulate, sim_opts);

  auto* make_data = app.add_subcommand("make-data", "Generate synthetic observations");
  add_common(make_data, data_opts);

  auto* invert = app.add_subcommand("invert", "Run the inverse solver");
  add_common(invert, inv_opts);
  invert->add_option("--method", method, "tt | grad | combined")
      ->check(CLI::IsMember({"tt", "grad", "combined"}));
  invert->add_option("--data", data_path,
                     "observations.csv to invert (default: synthesize from the spec)")
      ->check(CLI::ExistingFile);

  auto* grad_check =
      app.add_subcommand("grad-check", "Compare the adjoint gradient against finite differences");
  add_common(grad_check, check_opts, false);

  auto* benchmark = app.add_subcommand("benchmark-ttopt", "Run the TT optimizer benchmarks");
  add_common(benchmark, bench_opts);

  auto* plot = app.add_subcommand("plot", "Render SVG charts from a result directory");
  plot->add_option("--dir", plot_dir, "Directory holding the CSV outputs of invert")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage / help text
    return code == 0 ? 0 : 1;     // any parse failure is a validation error
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_opts);
    if (make_data->parsed()) return cmd_make_data(data_opts);
    if (invert->parsed()) return cmd_invert(inv_opts, method, data_path);
    if (grad_check->parsed()) return cmd_grad_check(check_opts);
    if (benchmark->parsed()) return cmd_benchmark_ttopt(bench_opts);
    if (plot->parsed()) return cmd_plot(plot_dir);
  } catch (const diffcal::numerical_error& e) {
    print_error_object(e.kind(), e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    print_error_object("invalid-argument", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error_object("internal", e.what());
    return 1;
  }
  return 0;
}

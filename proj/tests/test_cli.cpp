#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "diffcal/experiment_io.hpp"
#include "diffcal/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli = DIFFCAL_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      std::string(cli) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  return {WEXITSTATUS(status), slurp(out), slurp(err)};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Coarse, fast experiment for the CLI round trips.
void write_tiny_spec(const fs::path& path, std::uint64_t seed = 7) {
  diffcal::ExperimentSpec spec = diffcal::reference_spec();
  spec.grid = diffcal::SpaceTimeGrid{1.0, 6.0, 1.0, 24.0, 41, 400};
  spec.ttopt.n = 8;
  spec.ttopt.n_sweeps = 2;
  spec.ttopt.r_max = 3;
  spec.descent.max_iter = 25;
  spec.seed = seed;
  diffcal::save_spec(spec, path);
}

int count_lines(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  const auto dir = fresh_dir("diffcal_cli_usage");
  CHECK(run("", dir).exit_code == 1);
  CHECK(run("--definitely-not-a-flag", dir).exit_code == 1);
  CHECK(run("invert --method nonsense", dir).exit_code == 1);
  const auto missing = run("simulate --spec /nonexistent/path.json", dir);
  CHECK(missing.exit_code == 1);
  fs::remove_all(dir);
}

TEST_CASE("simulate writes the full field grid") {
  const auto dir = fresh_dir("diffcal_cli_simulate");
  const fs::path spec_path = dir / "spec.json";
  write_tiny_spec(spec_path);
  const auto r = run("simulate --spec " + spec_path.string() + " -o " + dir.string(), dir);
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "field.csv"));
  CHECK(count_lines(dir / "field.csv") == 41 * 401 + 1);  // rows plus header
  fs::remove_all(dir);
}

TEST_CASE("numerical failures map to exit code 2 with an error object") {
  const auto dir = fresh_dir("diffcal_cli_cfl");
  // dt = 0.23 violates the explicit stability bound at d = 0.01
  const auto r = run("simulate --set grid.nt=100 -o " + dir.string(), dir);
  CHECK(r.exit_code == 2);
  const json err = json::parse(r.err);
  CHECK(err.at("error").at("type") == "cfl");
  CHECK(err.at("error").at("message").get<std::string>().find("admissible dt") !=
        std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("make-data then invert --data round trip") {
  const auto dir = fresh_dir("diffcal_cli_roundtrip");
  const fs::path spec_path = dir / "spec.json";
  write_tiny_spec(spec_path);

  const auto made =
      run("make-data --spec " + spec_path.string() + " -o " + dir.string(), dir);
  CHECK(made.exit_code == 0);
  REQUIRE(fs::exists(dir / "observations.csv"));
  CHECK(count_lines(dir / "observations.csv") == 37);

  const auto inv = run("invert --method tt --spec " + spec_path.string() + " --data " +
                           (dir / "observations.csv").string() + " -o " + dir.string(),
                       dir);
  CHECK(inv.exit_code == 0);
  REQUIRE(fs::exists(dir / "result.json"));

  std::ifstream is(dir / "result.json");
  json result;
  is >> result;
  CHECK(result.at("method") == "tt");
  CHECK(result.contains("tt"));
  CHECK(result.at("final").contains("relative_errors"));
  CHECK(result.at("final").at("relative_errors").contains("K_cap"));
  CHECK(result.at("final").contains("E_psi"));
  fs::remove_all(dir);
}

TEST_CASE("identical argv and seed give byte-identical results apart from timing") {
  const auto dir = fresh_dir("diffcal_cli_determinism");
  const fs::path spec_path = dir / "spec.json";
  write_tiny_spec(spec_path, 1234);

  const fs::path out1 = dir / "run1";
  const fs::path out2 = dir / "run2";
  const std::string args = "invert --method combined --spec " + spec_path.string();
  CHECK(run(args + " -o " + out1.string(), dir).exit_code == 0);
  CHECK(run(args + " -o " + out2.string(), dir).exit_code == 0);

  auto stripped = [](const fs::path& p) {
    std::ifstream is(p / "result.json");
    json j;
    is >> j;
    j.erase("timing");
    return j.dump();
  };
  CHECK(stripped(out1) == stripped(out2));

  // the CSV outputs carry no timing and must be byte-identical
  for (const char* name : {"observations.csv", "trace_tt.csv", "trace_grad.csv"}) {
    std::ifstream a(out1 / name), b(out2 / name);
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    INFO(name);
    CHECK(sa.str() == sb.str());
  }
  fs::remove_all(dir);
}

TEST_CASE("plot renders SVG charts from a result directory") {
  const auto dir = fresh_dir("diffcal_cli_plot");
  const fs::path spec_path = dir / "spec.json";
  write_tiny_spec(spec_path);
  CHECK(run("invert --method combined --spec " + spec_path.string() + " -o " +
                dir.string(),
            dir)
            .exit_code == 0);
  CHECK(run("plot --dir " + dir.string(), dir).exit_code == 0);
  for (const char* name : {"r_t.svg", "psi.svg", "density.svg"}) {
    INFO(name);
    REQUIRE(fs::exists(dir / name));
    std::ifstream is(dir / name);
    std::string head(5, '\0');
    is.read(head.data(), 5);
    CHECK(head == "<svg ");
  }
  fs::remove_all(dir);
}

TEST_CASE("grad-check passes at the reference resolution") {
  const auto dir = fresh_dir("diffcal_cli_gradcheck");
  const auto r = run("grad-check", dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("cosine_similarity=") != std::string::npos);
  CHECK(r.out.find("max_componentwise_rel_error=") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("benchmark-ttopt writes a summary") {
  const auto dir = fresh_dir("diffcal_cli_bench");
  const auto r = run("benchmark-ttopt -o " + dir.string() + " --seed 3", dir);
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "benchmark_ttopt.json"));
  std::ifstream is(dir / "benchmark_ttopt.json");
  json j;
  is >> j;
  CHECK(j.at("separable").at("J_best").get<double>() <= 1e-12);
  CHECK(j.at("rosenbrock").at("J_best").get<double>() <= 0.014);
  fs::remove_all(dir);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nmsk/config.hpp"
#include "nmsk/runner.hpp"

using namespace nmsk;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("nmsk_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kMinimalSolve = R"({
  "command": "solve",
  "model": {"alpha": [1.0], "mu": [[1.5]], "h": [0.0]}
})";

} // namespace

TEST_CASE("minimal solve config fills defaults") {
  const RunConfig cfg = parse_config(kMinimalSolve);
  CHECK(cfg.command == Command::solve);
  CHECK(cfg.model.species_count() == 1);
  CHECK(cfg.model.mu(0, 0) == 1.5);
  CHECK(cfg.solver.n_random == 8);
  CHECK(cfg.solver.tol == 1e-12);
  CHECK(cfg.solver.kkt_tol == 1e-10);
  CHECK(cfg.solver.boundary_tol == 1e-9);
  CHECK(cfg.solver.damping == 1.0);
  CHECK(cfg.mc.n_disorder == 200);
  CHECK(cfg.output.format == OutputFormat::csv);
}

TEST_CASE("validation errors name the field") {
  SUBCASE("alpha sum") {
    const char* text = R"({"command": "solve",
      "model": {"alpha": [0.3, 0.6], "mu": [[1,0],[0,1]], "h": [0,0]}})";
    CHECK_THROWS_WITH_AS(parse_config(text),
                         doctest::Contains("alpha"), ConfigError);
  }
  SUBCASE("asymmetric mu") {
    const char* text = R"({"command": "solve",
      "model": {"alpha": [0.5, 0.5], "mu": [[1,2],[3,1]], "h": [0,0]}})";
    CHECK_THROWS_WITH_AS(parse_config(text),
                         doctest::Contains("symmetric"), ConfigError);
  }
  SUBCASE("unknown key") {
    const char* text = R"({"command": "solve", "typo_section": 1,
      "model": {"alpha": [1.0], "mu": [[1.0]], "h": [0.0]}})";
    CHECK_THROWS_WITH_AS(parse_config(text),
                         doctest::Contains("typo_section"), ConfigError);
  }
  SUBCASE("unknown nested key") {
    const char* text = R"({"command": "solve",
      "model": {"alpha": [1.0], "mu": [[1.0]], "h": [0.0]},
      "solver": {"n_randm": 4}})";
    CHECK_THROWS_WITH_AS(parse_config(text),
                         doctest::Contains("n_randm"), ConfigError);
  }
  SUBCASE("malformed document") {
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  }
  SUBCASE("bad command") {
    const char* text = R"({"command": "fly",
      "model": {"alpha": [1.0], "mu": [[1.0]], "h": [0.0]}})";
    CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains("fly"),
                         ConfigError);
  }
  SUBCASE("scan without axes") {
    const char* text = R"({"command": "scan",
      "model": {"alpha": [1.0], "mu": [[1.0]], "h": [0.0]}})";
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
  SUBCASE("bad scan parameter") {
    const char* text = R"({"command": "scan",
      "model": {"alpha": [1.0], "mu": [[1.0]], "h": [0.0]},
      "scan": {"axes": [{"param": "mu[0][3]", "from": 0.5, "to": 1.5, "steps": 3}]}})";
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
}

TEST_CASE("echoed config round-trips") {
  const char* text = R"({
    "command": "scan",
    "model": {"alpha": [0.4, 0.6], "mu": [[2, 0.5], [0.5, 1]], "h": [0.1, 0.0]},
    "solver": {"n_random": 4, "seed": 99},
    "scan": {"axes": [{"param": "mu[0][1]", "from": 0.1, "to": 0.9, "steps": 5, "scale": "linear"}]},
    "mc": {"N": 10, "n_disorder": 50, "master_seed": 7},
    "output": {"format": "jsonl"}
  })";
  const RunConfig a = parse_config(text);
  const RunConfig b = parse_config(echo_config(a));
  CHECK(b.command == a.command);
  CHECK((b.model.mu - a.model.mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b.model.alpha - a.model.alpha).cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.solver.n_random == 4);
  CHECK(b.solver.seed == 99);
  CHECK(b.scan.size() == 1);
  CHECK(b.scan[0].steps == 5);
  CHECK(b.mc.master_seed == 7);
  CHECK(b.output.format == OutputFormat::jsonl);
  CHECK(echo_config(a) == echo_config(b));
}

TEST_CASE("solve run writes the expected summary") {
  const fs::path dir = fresh_dir("solve");
  RunConfig cfg = parse_config(R"({
    "command": "solve",
    "model": {"alpha": [1.0], "mu": [[0.5]], "h": [0.0]}
  })");
  cfg.output.dir = dir.string();
  RunOverrides quiet;
  quiet.quiet = true;
  REQUIRE(run(cfg, quiet) == 0);

  const std::string csv = read_file(dir / "summary.csv");
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "K,rho,pressure,grad_norm,kkt_ok,converged,iterations,phase,x_0");
  CHECK(row.find("paramagnetic") != std::string::npos);

  // pressure column = mu/4 + log 2, x = 0
  std::istringstream cells(row);
  std::string cell;
  std::getline(cells, cell, ','); // K
  std::getline(cells, cell, ','); // rho
  CHECK(std::stod(cell) == doctest::Approx(0.5).epsilon(1e-14));
  std::getline(cells, cell, ','); // pressure
  CHECK(std::stod(cell) ==
        doctest::Approx(0.125 + std::log(2.0)).epsilon(1e-12));

  CHECK(fs::exists(dir / "report.jsonl"));
  CHECK(fs::exists(dir / "manifest.json"));
  const std::string manifest = read_file(dir / "manifest.json");
  CHECK(manifest.find("\"partial\": false") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical summaries") {
  const char* text = R"({
    "command": "scan",
    "model": {"alpha": [1.0], "mu": [[1.0]], "h": [0.05]},
    "scan": {"axes": [{"param": "mu[0][0]", "from": 0.8, "to": 1.2, "steps": 9}]},
    "solver": {"seed": 31}
  })";
  RunOverrides quiet;
  quiet.quiet = true;
  const fs::path dir1 = fresh_dir("det1");
  const fs::path dir2 = fresh_dir("det2");
  RunConfig cfg1 = parse_config(text);
  cfg1.output.dir = dir1.string();
  RunConfig cfg2 = parse_config(text);
  cfg2.output.dir = dir2.string();
  REQUIRE(run(cfg1, quiet) == 0);
  REQUIRE(run(cfg2, quiet) == 0);
  CHECK(read_file(dir1 / "summary.csv") == read_file(dir2 / "summary.csv"));
  CHECK(read_file(dir1 / "report.jsonl") == read_file(dir2 / "report.jsonl"));
}

TEST_CASE("worker count does not change the results") {
  const char* text = R"({
    "command": "scan",
    "model": {"alpha": [0.5, 0.5], "mu": [[1.5, 0.3], [0.3, 0.8]], "h": [0.02, 0.0]},
    "scan": {"axes": [{"param": "h[1]", "from": 0.0, "to": 0.2, "steps": 6}]}
  })";
  RunOverrides one;
  one.quiet = true;
  one.workers = 1;
  RunOverrides four;
  four.quiet = true;
  four.workers = 4;
  const fs::path dir1 = fresh_dir("w1");
  const fs::path dir4 = fresh_dir("w4");
  RunConfig cfg1 = parse_config(text);
  cfg1.output.dir = dir1.string();
  RunConfig cfg4 = parse_config(text);
  cfg4.output.dir = dir4.string();
  REQUIRE(run(cfg1, one) == 0);
  REQUIRE(run(cfg4, four) == 0);
  CHECK(read_file(dir1 / "summary.csv") == read_file(dir4 / "summary.csv"));
}

TEST_CASE("manifest echo reproduces the run") {
  const fs::path dir1 = fresh_dir("mani1");
  const fs::path dir2 = fresh_dir("mani2");
  RunConfig cfg = parse_config(R"({
    "command": "exponents",
    "model": {"alpha": [1.0], "mu": [[1.0]], "h": [0.0]},
    "exponents": {"name": "beta", "window": {"from": 1e-3, "to": 1e-2, "points": 9}}
  })");
  cfg.output.dir = dir1.string();
  RunOverrides quiet;
  quiet.quiet = true;
  REQUIRE(run(cfg, quiet) == 0);

  // extract the embedded config from the manifest and re-run it elsewhere
  const std::string manifest = read_file(dir1 / "manifest.json");
  const auto begin = manifest.find("\"config\": {");
  REQUIRE(begin != std::string::npos);
  std::size_t depth = 0, start = manifest.find('{', begin), end = start;
  for (std::size_t i = start; i < manifest.size(); ++i) {
    if (manifest[i] == '{') ++depth;
    if (manifest[i] == '}' && --depth == 0) {
      end = i;
      break;
    }
  }
  RunConfig echoed = parse_config(manifest.substr(start, end - start + 1));
  echoed.output.dir = dir2.string();
  REQUIRE(run(echoed, quiet) == 0);
  CHECK(read_file(dir1 / "summary.csv") == read_file(dir2 / "summary.csv"));
}

TEST_CASE("jsonl summary format") {
  const fs::path dir = fresh_dir("jsonl");
  RunConfig cfg = parse_config(kMinimalSolve);
  cfg.output.dir = dir.string();
  cfg.output.format = OutputFormat::jsonl;
  RunOverrides quiet;
  quiet.quiet = true;
  REQUIRE(run(cfg, quiet) == 0);
  CHECK(fs::exists(dir / "summary.jsonl"));
  CHECK_FALSE(fs::exists(dir / "summary.csv"));
  const std::string line = read_file(dir / "summary.jsonl");
  CHECK(line.find("\"pressure\"") != std::string::npos);
}

TEST_CASE("indefinite model is a validation failure for solve") {
  const fs::path dir = fresh_dir("indef");
  RunConfig cfg = parse_config(R"({
    "command": "solve",
    "model": {"alpha": [0.5, 0.5], "mu": [[0.1, 2.0], [2.0, 0.1]], "h": [0, 0]}
  })");
  cfg.output.dir = dir.string();
  RunOverrides quiet;
  quiet.quiet = true;
  CHECK(run(cfg, quiet) == 2);
}

TEST_CASE("nishimori run emits one row per identity") {
  const fs::path dir = fresh_dir("nish");
  RunConfig cfg = parse_config(R"({
    "command": "nishimori",
    "model": {"alpha": [0.5, 0.5], "mu": [[1, 0.5], [0.5, 1]], "h": [0.3, 0.3]},
    "mc": {"N": 8, "n_disorder": 100, "master_seed": 11, "mode": "exact"}
  })");
  cfg.output.dir = dir.string();
  RunOverrides quiet;
  quiet.quiet = true;
  REQUIRE(run(cfg, quiet) == 0);
  const std::string csv = read_file(dir / "summary.csv");
  CHECK(csv.find("site_sq_minus_mean") != std::string::npos);
  CHECK(csv.find("overlap2_minus_mag2") != std::string::npos);
  int lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 6); // header + 5 identities
}

TEST_CASE("converge run tabulates sizes against the variational answer") {
  const fs::path dir = fresh_dir("conv");
  RunConfig cfg = parse_config(R"({
    "command": "converge",
    "model": {"alpha": [1.0], "mu": [[2.0]], "h": [0.2]},
    "mc": {"sweeps": 300, "therm": 60, "n_disorder": 20, "master_seed": 2,
           "n_list": [8, 12]}
  })");
  cfg.output.dir = dir.string();
  RunOverrides quiet;
  quiet.quiet = true;
  REQUIRE(run(cfg, quiet) == 0);
  const std::string csv = read_file(dir / "summary.csv");
  CHECK(csv.find("pressure_exact") != std::string::npos);
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 3); // header + two sizes
}

TEST_CASE("unreachable tolerances yield exit 3 and a partial manifest") {
  const fs::path dir = fresh_dir("partial");
  RunConfig cfg = parse_config(R"({
    "command": "solve",
    "model": {"alpha": [1.0], "mu": [[1.3]], "h": [0.2]},
    "solver": {"max_iter": 1, "n_random": 0, "kkt_tol": 1e-18}
  })");
  cfg.output.dir = dir.string();
  RunOverrides quiet;
  quiet.quiet = true;
  CHECK(run(cfg, quiet) == 3);
  const std::string manifest = read_file(dir / "manifest.json");
  CHECK(manifest.find("\"partial\": true") != std::string::npos);
}

TEST_CASE("mc run writes per-realization records") {
  const fs::path dir = fresh_dir("mc");
  RunConfig cfg = parse_config(R"({
    "command": "mc",
    "model": {"alpha": [1.0], "mu": [[1.2]], "h": [0.1]},
    "mc": {"N": 16, "sweeps": 400, "therm": 100, "n_disorder": 10, "master_seed": 3}
  })");
  cfg.output.dir = dir.string();
  RunOverrides quiet;
  quiet.quiet = true;
  REQUIRE(run(cfg, quiet) == 0);
  const std::string report = read_file(dir / "report.jsonl");
  int lines = 0;
  for (char c : report)
    if (c == '\n') ++lines;
  CHECK(lines == 10);
  const std::string csv = read_file(dir / "summary.csv");
  CHECK(csv.find("m_0") != std::string::npos);
  CHECK(csv.find("q_0") != std::string::npos);
  CHECK(csv.find("tau_int") != std::string::npos);
}

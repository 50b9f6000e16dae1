#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "nmsk/config.hpp"
#include "nmsk/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Multi-species Sherrington-Kirkpatrick solver on the Nishimori line: "
      "variational pressure, phase scans, critical exponents and finite-N "
      "Monte Carlo / exact-enumeration verification."};

  std::string config_path;
  app.add_option("config", config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);

  nmsk::RunOverrides overrides;
  std::string output_dir, format, name;
  std::uint64_t seed = 0;
  int workers = 0;
  double lambda = 0.0;
  auto* o_dir = app.add_option("--output-dir", output_dir, "output directory");
  auto* o_seed = app.add_option("--seed", seed, "master seed override");
  auto* o_workers =
      app.add_option("--workers", workers, "worker pool size")
          ->envname("NMSK_WORKERS");
  auto* o_format =
      app.add_option("--format", format, "summary format: csv or jsonl");
  auto* o_name =
      app.add_option("--name", name, "exponent name: beta, delta, lambda_line");
  auto* o_lambda =
      app.add_option("--lambda", lambda, "slope of the field line h = lambda (mu-1)");
  app.add_flag("--quiet", overrides.quiet, "suppress progress output");

  CLI11_PARSE(app, argc, argv);

  std::ifstream in(config_path);
  std::stringstream buffer;
  buffer << in.rdbuf();

  nmsk::RunConfig config;
  try {
    config = nmsk::parse_config(buffer.str());
  } catch (const nmsk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  if (o_dir->count()) overrides.output_dir = output_dir;
  if (o_seed->count()) overrides.seed = seed;
  if (o_workers->count()) overrides.workers = workers;
  if (o_format->count()) overrides.format = format;
  if (o_name->count()) overrides.exponent_name = name;
  if (o_lambda->count()) overrides.lambda = lambda;

  return nmsk::run(std::move(config), overrides);
}

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmsk/model.hpp"
#include "nmsk/variational.hpp"

namespace nmsk {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { solve, scan, exponents, mc, nishimori, converge };
enum class OutputFormat { csv, jsonl };

/// One scanned parameter: "mu[i][j]" (sets both (i,j) and (j,i)), "h[i]",
/// or "alpha[i]" (K = 2 only; the other entry absorbs the complement).
/// Grids with several axes take the Cartesian product, last axis fastest.
struct ScanAxis {
  std::string param;
  double from = 0.0;
  double to = 0.0;
  int steps = 1;          // number of grid points, >= 1
  bool log_scale = false; // geometric instead of linear spacing
};

struct ExponentOptions {
  std::string name = "beta"; // "beta" | "delta" | "lambda_line"
  double lambda = 1.0;       // line h = lambda (mu - 1), lambda_line only
  double window_from = 0.0;  // 0 -> per-exponent default window
  double window_to = 0.0;
  int window_points = 0;
};

struct McConfig {
  int N = 64;
  long sweeps = 2000;
  long therm = -1; // auto
  int n_disorder = 200;
  std::uint64_t master_seed = 1;
  std::string mode = "exact"; // "exact" | "mc" (nishimori command)
  std::vector<int> n_list;    // converge command
};

struct OutputOptions {
  std::string dir = ".";
  OutputFormat format = OutputFormat::csv;
};

struct RunConfig {
  Command command = Command::solve;
  ModelParams model;
  MaximizeConfig solver;
  std::vector<ScanAxis> scan;
  ExponentOptions exponents;
  McConfig mc;
  OutputOptions output;
};

/// Parse and validate a JSON config document.  Sections: model (required),
/// solver, scan, exponents, mc, output.  Defaults are filled; unknown keys
/// are hard errors naming the offending field; violated model invariants
/// are reported with the field name.  Throws ConfigError.
RunConfig parse_config(const std::string& text);

/// Serialize the effective configuration (all defaults made explicit).
/// parse_config(echo_config(c)) reproduces c; the manifest embeds this.
std::string echo_config(const RunConfig& config);

const char* command_name(Command c);

} // namespace nmsk

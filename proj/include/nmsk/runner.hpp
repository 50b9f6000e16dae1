#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nmsk/config.hpp"

namespace nmsk {

/// Command-line overrides applied on top of the parsed config before the
/// run; the manifest echoes the merged result.
struct RunOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed; // sets mc.master_seed and solver.seed
  std::optional<int> workers;
  std::optional<std::string> format;
  std::optional<std::string> exponent_name;
  std::optional<double> lambda;
  bool quiet = false;
};

/// Execute the configured command and write report.jsonl, summary.csv (or
/// summary.jsonl) and manifest.json into the output directory.
/// Returns 0 on success, 2 on validation errors, 3 when any work item
/// failed to converge (partial outputs are written, manifest flags
/// partial: true).
int run(RunConfig config, const RunOverrides& overrides = {});

} // namespace nmsk

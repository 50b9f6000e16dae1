#include "nmsk/runner.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "nmsk/criticality.hpp"
#include "nmsk/parallel.hpp"
#include "nmsk/simulate.hpp"
#include "nmsk/stats.hpp"

namespace nmsk {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Fixed scientific notation with 17 significant digits so that identical
// runs produce byte-identical tables.
std::string fmt_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

std::string csv_cell(const json& v) {
  if (v.is_number_float()) return fmt_sci(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<json>> rows;
};

void write_summary(const fs::path& dir, OutputFormat format,
                   const Table& table) {
  if (format == OutputFormat::csv) {
    std::ofstream out(dir / "summary.csv", std::ios::binary);
    for (std::size_t i = 0; i < table.header.size(); ++i)
      out << (i ? "," : "") << table.header[i];
    out << "\n";
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i)
        out << (i ? "," : "") << csv_cell(row[i]);
      out << "\n";
    }
  } else {
    std::ofstream out(dir / "summary.jsonl", std::ios::binary);
    for (const auto& row : table.rows) {
      json obj;
      for (std::size_t i = 0; i < row.size(); ++i)
        obj[table.header[i]] = row[i];
      out << obj.dump() << "\n";
    }
  }
}

void write_report(const fs::path& dir, const std::vector<json>& records) {
  std::ofstream out(dir / "report.jsonl", std::ios::binary);
  for (const json& rec : records) out << rec.dump() << "\n";
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

json report_to_json(const SolveReport& rep) {
  json maxima = json::array();
  for (const auto& [x, p] : rep.all_local_maxima)
    maxima.push_back({{"x", to_std(x)}, {"pressure", p}});
  return {{"x_star", to_std(rep.x_star)},
          {"pressure", rep.pressure},
          {"grad_norm", rep.grad_norm},
          {"hessian_eigs", to_std(rep.hessian_eigs)},
          {"kkt_ok", rep.kkt_ok},
          {"on_boundary", rep.on_boundary},
          {"rho", rep.rho},
          {"iterations", rep.iterations},
          {"converged", rep.converged},
          {"multistart_count", rep.multistart_count},
          {"all_local_maxima", maxima}};
}

struct GridPoint {
  ModelParams params;
  std::vector<double> axis_values;
};

std::vector<double> axis_values(const ScanAxis& axis) {
  std::vector<double> values(axis.steps);
  if (axis.steps == 1) {
    values[0] = axis.from;
    return values;
  }
  for (int i = 0; i < axis.steps; ++i) {
    const double t = static_cast<double>(i) / (axis.steps - 1);
    values[i] = axis.log_scale
                    ? std::exp(std::log(axis.from) +
                               (std::log(axis.to) - std::log(axis.from)) * t)
                    : axis.from + (axis.to - axis.from) * t;
  }
  return values;
}

void apply_axis(ModelParams& params, const std::string& name, double value) {
  const auto index = [&](std::size_t pos) {
    const std::size_t end = name.find(']', pos);
    return std::stoi(name.substr(pos + 1, end - pos - 1));
  };
  if (name.rfind("mu[", 0) == 0) {
    const int i = index(2);
    const int j = index(name.find('[', 3));
    params.mu(i, j) = params.mu(j, i) = value;
  } else if (name.rfind("h[", 0) == 0) {
    params.h[index(1)] = value;
  } else { // alpha[i], K == 2
    const int i = index(5);
    if (!(value > 0.0) || !(value < 1.0))
      throw ConfigError("scan: alpha values must lie in (0, 1)");
    params.alpha[i] = value;
    params.alpha[1 - i] = 1.0 - value;
  }
}

std::vector<GridPoint> expand_grid(const ModelParams& base,
                                   const std::vector<ScanAxis>& axes) {
  std::vector<std::vector<double>> values;
  long total = 1;
  for (const ScanAxis& a : axes) {
    values.push_back(axis_values(a));
    total *= a.steps;
  }
  std::vector<GridPoint> grid;
  grid.reserve(total);
  for (long idx = 0; idx < total; ++idx) {
    GridPoint point{base, {}};
    long rem = idx;
    // last axis fastest
    for (long a = static_cast<long>(axes.size()) - 1; a >= 0; --a) {
      const long n = axes[a].steps;
      const double v = values[a][rem % n];
      rem /= n;
      point.axis_values.insert(point.axis_values.begin(), v);
    }
    for (std::size_t a = 0; a < axes.size(); ++a)
      apply_axis(point.params, axes[a].param, point.axis_values[a]);
    point.params = ModelParams::make(point.params.alpha, point.params.mu,
                                     point.params.h);
    grid.push_back(std::move(point));
  }
  return grid;
}

const char* phase_name(const PhasePoint& p) {
  if (!p.delta_psd) return "indefinite";
  return p.phase == Phase::paramagnetic ? "paramagnetic" : "ordered";
}

struct CommandOutput {
  Table summary;
  std::vector<json> records;
  bool partial = false;
};

CommandOutput run_solve(const RunConfig& cfg) {
  CommandOutput out;
  const int K = cfg.model.species_count();
  out.summary.header = {"K", "rho", "pressure", "grad_norm",
                        "kkt_ok", "converged", "iterations", "phase"};
  for (int r = 0; r < K; ++r)
    out.summary.header.push_back("x_" + std::to_string(r));

  const EffectiveInteraction eff = build_effective(cfg.model);
  SolveReport rep;
  try {
    rep = maximize(cfg.model, eff, cfg.solver);
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    out.partial = true;
    return out;
  }
  const bool para = rep.x_star.cwiseAbs().maxCoeff() <= 1e-8;
  std::vector<json> row = {K,
                           rep.rho,
                           rep.pressure,
                           rep.grad_norm,
                           rep.kkt_ok,
                           rep.converged,
                           rep.iterations,
                           para ? "paramagnetic" : "ordered"};
  for (int r = 0; r < K; ++r) row.push_back(rep.x_star[r]);
  out.summary.rows.push_back(std::move(row));
  out.records.push_back(report_to_json(rep));
  out.partial = !rep.converged;
  return out;
}

CommandOutput run_scan(const RunConfig& cfg, int workers) {
  CommandOutput out;
  const int K = cfg.model.species_count();
  out.summary.header = {"index"};
  for (const ScanAxis& a : cfg.scan) out.summary.header.push_back(a.param);
  out.summary.header.insert(out.summary.header.end(),
                            {"rho", "psd", "phase", "pressure"});
  for (int r = 0; r < K; ++r)
    out.summary.header.push_back("x_" + std::to_string(r));

  const std::vector<GridPoint> grid = expand_grid(cfg.model, cfg.scan);
  std::vector<std::optional<PhasePoint>> points(grid.size());
  std::vector<std::string> errors(grid.size());
  parallel_for(
      static_cast<long>(grid.size()),
      [&](long i) {
        try {
          points[i] = phase_point(grid[i].params, cfg.solver);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      },
      workers);

  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<json> row = {static_cast<long>(i)};
    for (double v : grid[i].axis_values) row.push_back(v);
    json record = {{"index", i}, {"axis_values", grid[i].axis_values}};
    if (!points[i]) {
      out.partial = true;
      row.insert(row.end(), {0.0, false, "error", 0.0});
      for (int r = 0; r < K; ++r) row.push_back(0.0);
      record["error"] = errors[i];
    } else {
      const PhasePoint& p = *points[i];
      row.push_back(p.rho);
      row.push_back(p.delta_psd);
      row.push_back(phase_name(p));
      row.push_back(p.pressure);
      for (int r = 0; r < K; ++r)
        row.push_back(p.delta_psd ? p.x_star[r] : 0.0);
      record["rho"] = p.rho;
      record["psd"] = p.delta_psd;
      record["phase"] = phase_name(p);
      record["pressure"] = p.pressure;
      if (p.delta_psd) record["x_star"] = to_std(p.x_star);
    }
    out.summary.rows.push_back(std::move(row));
    out.records.push_back(std::move(record));
  }
  return out;
}

CommandOutput run_exponents(const RunConfig& cfg) {
  CommandOutput out;
  const ExponentOptions& opt = cfg.exponents;

  double from = opt.window_from, to = opt.window_to;
  int points = opt.window_points;
  if (from <= 0.0 || to <= 0.0) {
    if (opt.name == "beta") {
      from = 1e-4;
      to = 1e-2;
    } else if (opt.name == "delta") {
      from = 1e-6;
      to = 1e-3;
    } else {
      from = 1e-5;
      to = 1e-3;
    }
  }
  if (points <= 0)
    points = static_cast<int>(std::lround(8.0 * std::log10(to / from))) + 1;

  const std::vector<double> control = log_grid(from, to, points);
  ExponentFit fit;
  std::string control_name;
  if (opt.name == "beta") {
    std::vector<double> mu;
    for (double c : control) mu.push_back(1.0 + c);
    fit = fit_beta(mu);
    control_name = "mu";
  } else if (opt.name == "delta") {
    fit = fit_delta(control);
    control_name = "h";
  } else {
    std::vector<double> mu;
    for (double c : control) mu.push_back(1.0 + c);
    fit = fit_lambda_line(opt.lambda, mu);
    control_name = "mu";
  }

  out.summary.header = {control_name, "xbar"};
  for (const auto& [c, x] : fit.points) {
    const double ctrl = control_name == "mu" ? 1.0 + c : c;
    out.summary.rows.push_back({ctrl, x});
    out.records.push_back({{"control", ctrl}, {"xbar", x}});
  }
  out.records.push_back({{"fit", fit.exponent_name},
                         {"slope", fit.fitted_slope},
                         {"stderr", fit.stderr_slope},
                         {"lambda", opt.lambda},
                         {"window", {fit.window.first, fit.window.second}},
                         {"n_points", fit.points.size()}});
  return out;
}

CommandOutput run_mc(const RunConfig& cfg, int workers) {
  CommandOutput out;
  const int K = cfg.model.species_count();
  const LatticeSpec lattice = LatticeSpec::build(cfg.mc.N, cfg.model.alpha);

  struct Slot {
    MCRun run;
    std::uint64_t seed;
  };
  std::vector<Slot> slots(cfg.mc.n_disorder);
  parallel_for(
      cfg.mc.n_disorder,
      [&](long k) {
        const std::uint64_t seed = mix_seed(cfg.mc.master_seed, k);
        const DisorderRealization real =
            sample_disorder(cfg.model, lattice, seed);
        slots[k] = {mc_run(real, lattice, cfg.mc.sweeps, cfg.mc.therm,
                           mix_seed(seed, 2718)),
                    seed};
      },
      workers);

  for (std::size_t k = 0; k < slots.size(); ++k) {
    const MCRun& run = slots[k].run;
    out.records.push_back({{"index", k},
                           {"seed", slots[k].seed},
                           {"mean_m", to_std(run.mean_m)},
                           {"mean_q", to_std(run.mean_q)},
                           {"tau_int", run.tau_int},
                           {"sweeps", run.sweeps_used},
                           {"therm", run.therm_used}});
  }

  out.summary.header = {"observable", "mean", "stderr", "n_disorder",
                        "n_sweeps", "n_therm"};
  std::vector<double> col(slots.size());
  const auto add_row = [&](const std::string& name, auto getter) {
    for (std::size_t k = 0; k < slots.size(); ++k) col[k] = getter(slots[k].run);
    const MeanStderr ms = jackknife_mean(col);
    out.summary.rows.push_back({name, ms.mean, ms.stderr_,
                                cfg.mc.n_disorder, slots[0].run.sweeps_used,
                                slots[0].run.therm_used});
  };
  for (int r = 0; r < K; ++r)
    add_row("m_" + std::to_string(r),
            [r](const MCRun& run) { return run.mean_m[r]; });
  for (int r = 0; r < K; ++r)
    add_row("q_" + std::to_string(r),
            [r](const MCRun& run) { return run.mean_q[r]; });
  add_row("tau_int", [](const MCRun& run) { return run.tau_int; });
  return out;
}

CommandOutput run_nishimori(const RunConfig& cfg, int workers) {
  CommandOutput out;
  const LatticeSpec lattice = LatticeSpec::build(cfg.mc.N, cfg.model.alpha);
  McOptions opts;
  opts.sweeps = cfg.mc.sweeps;
  opts.therm = cfg.mc.therm;
  opts.master_seed = cfg.mc.master_seed;
  opts.workers = workers;
  const GibbsMode mode =
      cfg.mc.mode == "exact" ? GibbsMode::exact : GibbsMode::mc;
  const std::vector<MCEstimate> estimates =
      nishimori_checks(cfg.model, lattice, cfg.mc.n_disorder, mode, opts);

  out.summary.header = {"observable", "mean", "stderr", "zscore",
                        "n_disorder"};
  for (const MCEstimate& est : estimates) {
    out.summary.rows.push_back(
        {est.observable, est.mean, est.stderr_, est.zscore(), est.n_disorder});
    out.records.push_back({{"observable", est.observable},
                           {"mean", est.mean},
                           {"stderr", est.stderr_},
                           {"zscore", est.zscore()},
                           {"n_disorder", est.n_disorder},
                           {"n_sweeps", est.n_sweeps},
                           {"n_therm", est.n_therm}});
  }
  return out;
}

CommandOutput run_converge(const RunConfig& cfg, int workers) {
  CommandOutput out;
  const int K = cfg.model.species_count();
  McOptions opts;
  opts.sweeps = cfg.mc.sweeps;
  opts.therm = cfg.mc.therm;
  opts.n_disorder = cfg.mc.n_disorder;
  opts.master_seed = cfg.mc.master_seed;
  opts.workers = workers;
  const ConvergenceTable table =
      thermodynamic_convergence(cfg.model, cfg.mc.n_list, opts);

  out.summary.header = {"N"};
  for (int r = 0; r < K; ++r) {
    const std::string sr = std::to_string(r);
    out.summary.header.push_back("m_" + sr);
    out.summary.header.push_back("stderr_" + sr);
    out.summary.header.push_back("xbar_" + sr);
    out.summary.header.push_back("absdiff_" + sr);
  }
  out.summary.header.push_back("pressure_exact");
  out.summary.header.push_back("pressure_limit");

  for (const ConvergenceRow& row : table.rows) {
    std::vector<json> cells = {row.N};
    json record = {{"N", row.N},
                   {"mean_m", to_std(row.mean_m)},
                   {"stderr_m", to_std(row.stderr_m)},
                   {"x_star", to_std(table.x_star)},
                   {"pressure_limit", table.pressure_infinity}};
    for (int r = 0; r < K; ++r) {
      cells.push_back(row.mean_m[r]);
      cells.push_back(row.stderr_m[r]);
      cells.push_back(table.x_star[r]);
      cells.push_back(std::abs(row.mean_m[r] - table.x_star[r]));
    }
    cells.push_back(row.pressure_exact);
    cells.push_back(table.pressure_infinity);
    if (std::isfinite(row.pressure_exact))
      record["pressure_exact"] = row.pressure_exact;
    out.summary.rows.push_back(std::move(cells));
    out.records.push_back(std::move(record));
  }
  return out;
}

} // namespace

int run(RunConfig cfg, const RunOverrides& o) {
  if (o.output_dir) cfg.output.dir = *o.output_dir;
  if (o.seed) {
    cfg.mc.master_seed = *o.seed;
    cfg.solver.seed = *o.seed;
  }
  if (o.format) {
    if (*o.format == "csv") cfg.output.format = OutputFormat::csv;
    else if (*o.format == "jsonl") cfg.output.format = OutputFormat::jsonl;
    else {
      std::cerr << "error: --format must be csv or jsonl\n";
      return 2;
    }
  }
  if (o.exponent_name) cfg.exponents.name = *o.exponent_name;
  if (o.lambda) cfg.exponents.lambda = *o.lambda;
  if (cfg.exponents.name != "beta" && cfg.exponents.name != "delta" &&
      cfg.exponents.name != "lambda_line") {
    std::cerr << "error: exponent name must be beta, delta or lambda_line\n";
    return 2;
  }
  const int workers = default_workers(o.workers.value_or(0));

  const auto t0 = std::chrono::steady_clock::now();
  CommandOutput output;
  try {
    switch (cfg.command) {
      case Command::solve: output = run_solve(cfg); break;
      case Command::scan: output = run_scan(cfg, workers); break;
      case Command::exponents: output = run_exponents(cfg); break;
      case Command::mc: output = run_mc(cfg, workers); break;
      case Command::nishimori: output = run_nishimori(cfg, workers); break;
      case Command::converge: output = run_converge(cfg, workers); break;
    }
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    output.partial = true;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const fs::path dir(cfg.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << dir << "\n";
    return 2;
  }

  write_report(dir, output.records);
  write_summary(dir, cfg.output.format, output.summary);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  json manifest = {{"command", command_name(cfg.command)},
                   {"config", json::parse(echo_config(cfg))},
                   {"code_version", NMSK_VERSION},
                   {"master_seed", cfg.mc.master_seed},
                   {"wall_time_s", wall},
                   {"workers", workers},
                   {"partial", output.partial}};
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }

  if (!o.quiet) {
    const char* summary_name =
        cfg.output.format == OutputFormat::csv ? "summary.csv" : "summary.jsonl";
    std::cout << command_name(cfg.command) << ": " << output.summary.rows.size()
              << " rows -> " << (dir / summary_name).string() << "\n";
  }
  return output.partial ? 3 : 0;
}

} // namespace nmsk

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nmsk/model.hpp"
#include "nmsk/variational.hpp"

namespace nmsk {

enum class Phase { paramagnetic, ordered };

/// One point of a phase-diagram scan.  When delta_psd is false the solver
/// was not run (the variational principle needs Δ ⪰ 0) and only rho is
/// meaningful; the scan continues past such points.
struct PhasePoint {
  ModelParams params;
  double rho = 0.0;
  OrderParameter x_star;
  double pressure = 0.0;
  Phase phase = Phase::paramagnetic;
  bool delta_psd = true;
};

/// Solve and label one parameter point: paramagnetic when
/// ||x_star||_inf <= 1e-8, ordered otherwise.
PhasePoint phase_point(const ModelParams& params,
                       const MaximizeConfig& config = {});

/// phase_point over a whole grid; output order equals input order and
/// non-semidefinite points are recorded in-row without stopping the scan.
std::vector<PhasePoint> phase_scan(const std::vector<ModelParams>& grid,
                                   const MaximizeConfig& config = {});

/// Result of a critical-exponent fit: log-log least-squares slope of the
/// response against the control parameter over the given window.
struct ExponentFit {
  std::string exponent_name;  // "beta", "delta" or "lambda_line"
  double fitted_slope = 0.0;
  double stderr_slope = 0.0;
  std::pair<double, double> window; // control-parameter range used
  std::vector<std::pair<double, double>> points; // (control, response)
};

/// Stable branch x̄(mu,h) of the single-species consistency equation
/// x = E_z tanh(z√(mu·x+h) + mu·x+h), solved by bisection on [0,1].
/// Bisection (not fixed-point iteration) keeps full accuracy near the
/// critical point where the contraction rate degrades.
double scalar_magnetization(double mu, double h, double xtol = 1e-13);

/// x̄ vs (mu-1) at h = 0 for a window of mu in (1, 1.2]; slope -> 1.
ExponentFit fit_beta(const std::vector<double>& mu_window);

/// x̄ vs h at mu = 1 for a window of h in (0, 1e-2]; slope -> 1/2.
ExponentFit fit_delta(const std::vector<double>& h_window);

/// x̄ vs (mu-1) along the line h = lambda·(mu-1), window of mu in
/// (1, 1.05]; slope -> 1/2.  lambda must be positive.
ExponentFit fit_lambda_line(double lambda,
                            const std::vector<double>& mu_window);

/// Log-spaced grid helper: n points from a to b inclusive, a,b > 0.
std::vector<double> log_grid(double a, double b, int n);

} // namespace nmsk

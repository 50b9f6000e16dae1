#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nmsk/model.hpp"

namespace nmsk {

/// Candidate magnetization vector, one nonnegative entry per species.
using OrderParameter = Eigen::VectorXd;

struct NotPositiveSemidefiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FixedPointOptions {
  double damping = 1.0;     // in (0,1]; halved automatically on oscillation
  double tol = 1e-12;       // sup-norm tolerance on the iterate increment
  long max_iter = 200000;
};

struct MaximizeConfig {
  int n_random = 8;            // random multistart points in [0,1]^K
  double tol = 1e-12;          // fixed-point iterate tolerance
  double kkt_tol = 1e-10;      // tolerance on ||Δ(x - T(x))|| and gradient
  double boundary_tol = 1e-9;  // x_r below this counts as on the boundary
  double damping = 1.0;
  long max_iter = 200000;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull; // multistart RNG seed
};

/// Outcome of a fixed-point solve or a full maximization.
struct SolveReport {
  OrderParameter x_star;
  double pressure = 0.0;
  double grad_norm = 0.0;          // sup-norm of the gradient at x_star
  Eigen::VectorXd hessian_eigs;    // ascending
  bool kkt_ok = false;
  std::vector<bool> on_boundary;   // per coordinate
  double rho = 0.0;                // ρ(α̂⁻¹Δ) of the instance
  long iterations = 0;
  bool converged = false;
  int multistart_count = 0;
  std::vector<std::pair<OrderParameter, double>> all_local_maxima;
};

/// Variational pressure
///   p̄(x) = (1-x, Δ(1-x))/4 - (x, Δx)/2 + Σ_r α_r ψ((α̂⁻¹Δx + h)_r).
/// Requires x >= 0 componentwise; throws std::domain_error if any ψ
/// argument falls below -1e-15.
double variational_pressure(const ModelParams& params,
                            const EffectiveInteraction& eff,
                            const OrderParameter& x);

/// Consistency map T(x;h), componentwise E_z tanh(z√Q_r + Q_r) with
/// Q = α̂⁻¹Δx + h.  Output lies in [0,1)^K.
Eigen::VectorXd consistency_map(const ModelParams& params,
                                const EffectiveInteraction& eff,
                                const OrderParameter& x);

/// Gradient of the variational pressure: (Δ/2)[T(x;h) - x].
Eigen::VectorXd gradient(const ModelParams& params,
                         const EffectiveInteraction& eff,
                         const OrderParameter& x);

/// Hessian  -Δ/2 + ½ Δ D(x,h) α̂⁻¹ Δ  with
/// D(x,h) = diag{ E_z (1 - tanh²(z√Q_r + Q_r))² }.  Symmetrized.
Eigen::MatrixXd hessian(const ModelParams& params,
                        const EffectiveInteraction& eff,
                        const OrderParameter& x);

/// Damped fixed-point iteration x_{n+1} = (1-d) x_n + d T(x_n;h),
/// projected onto the nonnegative orthant.  Non-convergence after
/// max_iter is reported via converged = false, not thrown.
SolveReport solve_fixed_point(const ModelParams& params,
                              const EffectiveInteraction& eff,
                              const OrderParameter& x0,
                              const FixedPointOptions& opts = {});

/// Global maximization of the variational pressure over the nonnegative
/// orthant: multistart (0, 1, T(1;h), n_random uniform points in [0,1]^K),
/// each start running the damped fixed-point solve followed by a projected
/// gradient-ascent polish with backtracking line search.  Returns the
/// highest-pressure terminal point; distinct terminal points (pairwise
/// sup-distance > 10·tol) are listed in all_local_maxima, sorted by
/// pressure with lexicographic tie-break on x.
///
/// Throws NotPositiveSemidefiniteError when Δ is indefinite and
/// NonConvergenceError when no start converges.
SolveReport maximize(const ModelParams& params,
                     const EffectiveInteraction& eff,
                     const MaximizeConfig& config = {});

/// Stationarity modulo Ker Δ: true iff ||Δ(x - T(x;h))|| <= tol·||Δ||.
/// This is the correct test when Δ is singular; it reduces to the plain
/// fixed-point condition when Δ ≻ 0.
bool kernel_stationarity_check(const ModelParams& params,
                               const EffectiveInteraction& eff,
                               const OrderParameter& x, double tol);

} // namespace nmsk

#include "nmsk/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "nmsk/quadrature.hpp"

namespace nmsk {

namespace {

constexpr double kArgClamp = -1e-15;
constexpr double kMinDamping = 1.0 / 64.0;

void check_order_parameter(const EffectiveInteraction& eff,
                           const OrderParameter& x) {
  if (x.size() != eff.delta.rows())
    throw std::invalid_argument("order parameter: wrong dimension");
  for (Eigen::Index r = 0; r < x.size(); ++r)
    if (x[r] < kArgClamp)
      throw std::domain_error("order parameter: negative component");
}

// Q = alpha^-1 Delta x + h, with rounding-level negatives clamped to 0.
Eigen::VectorXd field_argument(const ModelParams& params,
                               const EffectiveInteraction& eff,
                               const OrderParameter& x) {
  check_order_parameter(eff, x);
  Eigen::VectorXd q = eff.alpha_inv_delta * x + params.h;
  for (Eigen::Index r = 0; r < q.size(); ++r) {
    if (q[r] < 0.0) {
      if (q[r] < kArgClamp)
        throw std::domain_error("variational: negative psi argument");
      q[r] = 0.0;
    }
  }
  return q;
}

struct Terminal {
  OrderParameter x;
  double pressure;
  bool converged;
  long iterations;
};

} // namespace

double variational_pressure(const ModelParams& params,
                            const EffectiveInteraction& eff,
                            const OrderParameter& x) {
  const Eigen::VectorXd q = field_argument(params, eff, x);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(x.size());
  const Eigen::VectorXd om = one - x;
  double value = 0.25 * om.dot(eff.delta * om) - 0.5 * x.dot(eff.delta * x);
  for (Eigen::Index r = 0; r < x.size(); ++r)
    value += params.alpha[r] * psi(q[r]).value;
  return value;
}

Eigen::VectorXd consistency_map(const ModelParams& params,
                                const EffectiveInteraction& eff,
                                const OrderParameter& x) {
  const Eigen::VectorXd q = field_argument(params, eff, x);
  Eigen::VectorXd t(q.size());
  for (Eigen::Index r = 0; r < q.size(); ++r) t[r] = expect_tanh(q[r]);
  return t;
}

Eigen::VectorXd gradient(const ModelParams& params,
                         const EffectiveInteraction& eff,
                         const OrderParameter& x) {
  return 0.5 * (eff.delta * (consistency_map(params, eff, x) - x));
}

Eigen::MatrixXd hessian(const ModelParams& params,
                        const EffectiveInteraction& eff,
                        const OrderParameter& x) {
  const Eigen::VectorXd q = field_argument(params, eff, x);
  Eigen::VectorXd d(q.size());
  for (Eigen::Index r = 0; r < q.size(); ++r) d[r] = expect_sech4(q[r]);
  Eigen::MatrixXd hess =
      -0.5 * eff.delta +
      0.5 * eff.delta * d.asDiagonal() * eff.alpha_inv_delta;
  return 0.5 * (hess + hess.transpose()).eval();
}

SolveReport solve_fixed_point(const ModelParams& params,
                              const EffectiveInteraction& eff,
                              const OrderParameter& x0,
                              const FixedPointOptions& opts) {
  if (!(opts.damping > 0.0) || opts.damping > 1.0)
    throw std::invalid_argument("solve_fixed_point: damping must be in (0,1]");
  if (!(opts.tol > 0.0))
    throw std::invalid_argument("solve_fixed_point: tol must be positive");
  const auto K = eff.delta.rows();

  OrderParameter x = x0.cwiseMax(0.0);
  double damping = opts.damping;
  Eigen::VectorXd prev_dx = Eigen::VectorXd::Zero(K);
  bool have_prev = false;
  std::vector<int> flips(K, 0);

  long n = 0;
  bool converged = false;
  while (n < opts.max_iter) {
    const Eigen::VectorXd t = consistency_map(params, eff, x);
    OrderParameter x_next =
        ((1.0 - damping) * x + damping * t).cwiseMax(0.0);
    const Eigen::VectorXd dx = x_next - x;
    ++n;
    if (dx.cwiseAbs().maxCoeff() <= opts.tol) {
      x = x_next;
      converged = true;
      break;
    }

    // Oscillation guard: three per-coordinate sign flips of the increment
    // halve the damping.
    if (have_prev) {
      bool halved = false;
      for (Eigen::Index r = 0; r < K; ++r) {
        if (dx[r] * prev_dx[r] < 0.0 && ++flips[r] >= 3) halved = true;
      }
      if (halved && damping > kMinDamping) {
        damping = std::max(0.5 * damping, kMinDamping);
        std::fill(flips.begin(), flips.end(), 0);
      }
    }

    // Geometric extrapolation of the linearly convergent tail.  The plain
    // step criterion above still decides convergence, so an overshoot only
    // costs a few extra iterations.
    if (have_prev && n % 8 == 0) {
      bool ok = true;
      OrderParameter ext = x_next;
      for (Eigen::Index r = 0; r < K && ok; ++r) {
        if (std::abs(prev_dx[r]) < 1e-300) {
          if (std::abs(dx[r]) > 1e-300) ok = false;
          continue;
        }
        const double ratio = dx[r] / prev_dx[r];
        if (ratio < -0.5 || ratio > 0.99999) {
          ok = false;
          break;
        }
        ext[r] += dx[r] * ratio / (1.0 - ratio);
      }
      if (ok && (ext - x_next).cwiseAbs().maxCoeff() <= 1.0) {
        x = ext.cwiseMax(0.0);
        have_prev = false;
        continue;
      }
    }

    prev_dx = dx;
    have_prev = true;
    x = x_next;
  }

  SolveReport report;
  report.x_star = x;
  report.pressure = variational_pressure(params, eff, x);
  const Eigen::VectorXd g = gradient(params, eff, x);
  report.grad_norm = g.cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hs(hessian(params, eff, x),
                                                    Eigen::EigenvaluesOnly);
  report.hessian_eigs = hs.eigenvalues();
  report.rho = eff.rho;
  report.iterations = n;
  report.converged = converged;
  report.multistart_count = 1;
  report.on_boundary.resize(K);
  report.kkt_ok = true;
  const double kkt_tol = 1e-10;
  for (Eigen::Index r = 0; r < K; ++r) {
    report.on_boundary[r] = x[r] <= 1e-9;
    if (report.on_boundary[r] ? g[r] > kkt_tol : std::abs(g[r]) > kkt_tol)
      report.kkt_ok = false;
  }
  report.all_local_maxima.emplace_back(x, report.pressure);
  return report;
}

namespace {

// Projected gradient ascent with Armijo backtracking; returns iterations.
long polish(const ModelParams& params, const EffectiveInteraction& eff,
            OrderParameter& x, double kkt_tol) {
  long iters = 0;
  double p = variational_pressure(params, eff, x);
  for (; iters < 200; ++iters) {
    const Eigen::VectorXd g = gradient(params, eff, x);
    Eigen::VectorXd dir = g;
    for (Eigen::Index r = 0; r < x.size(); ++r)
      if (x[r] <= 0.0 && g[r] < 0.0) dir[r] = 0.0;
    if (dir.cwiseAbs().maxCoeff() <= 0.25 * kkt_tol) break;

    double step = 1.0;
    bool moved = false;
    while (step > 1e-16) {
      OrderParameter trial = (x + step * dir).cwiseMax(0.0);
      const double pt = variational_pressure(params, eff, trial);
      if (pt > p && pt >= p + 1e-4 * g.dot(trial - x)) {
        x = trial;
        p = pt;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return iters;
}

// True when a short probe along the top Hessian direction finds higher
// pressure, i.e. the stationary point is a saddle, not a local maximum.
bool is_saddle(const ModelParams& params, const EffectiveInteraction& eff,
               const OrderParameter& x, double pressure) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hs(hessian(params, eff, x));
  const Eigen::VectorXd w = hs.eigenvectors().col(x.size() - 1);
  const double eps = 1e-4;
  for (int sgn = -1; sgn <= 1; sgn += 2) {
    const OrderParameter probe = (x + sgn * eps * w).cwiseMax(0.0);
    if (variational_pressure(params, eff, probe) > pressure + 1e-13)
      return true;
  }
  return false;
}

} // namespace

SolveReport maximize(const ModelParams& params,
                     const EffectiveInteraction& eff,
                     const MaximizeConfig& config) {
  if (!eff.psd_flag)
    throw NotPositiveSemidefiniteError(
        "maximize: effective interaction is not positive semi-definite");
  const auto K = eff.delta.rows();

  std::vector<OrderParameter> starts;
  starts.push_back(Eigen::VectorXd::Zero(K));
  starts.push_back(Eigen::VectorXd::Ones(K));
  starts.push_back(consistency_map(params, eff, Eigen::VectorXd::Ones(K)));
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int k = 0; k < config.n_random; ++k) {
    Eigen::VectorXd s(K);
    for (Eigen::Index r = 0; r < K; ++r) s[r] = uniform(rng);
    starts.push_back(std::move(s));
  }

  const FixedPointOptions fp_opts{config.damping, config.tol, config.max_iter};
  std::vector<Terminal> terminals;
  long total_iterations = 0;
  for (const OrderParameter& s : starts) {
    SolveReport rep = solve_fixed_point(params, eff, s, fp_opts);
    OrderParameter x = rep.x_star;
    total_iterations += rep.iterations;
    total_iterations += polish(params, eff, x, config.kkt_tol);
    const double polished = variational_pressure(params, eff, x);
    // settle back onto the consistency equation after the polish; at a
    // local maximum the map contracts, so this is a handful of iterations
    SolveReport settled = solve_fixed_point(params, eff, x, fp_opts);
    total_iterations += settled.iterations;
    if (settled.converged &&
        settled.pressure >=
            polished - 1e-12 * std::max(1.0, std::abs(polished))) {
      x = settled.x_star;
    }
    const double p = variational_pressure(params, eff, x);
    const Eigen::VectorXd g = gradient(params, eff, x);
    const bool stationary = rep.converged || settled.converged ||
                            g.cwiseAbs().maxCoeff() <= config.kkt_tol;
    terminals.push_back({std::move(x), p, stationary, rep.iterations});
  }

  bool any_converged = false;
  for (const Terminal& t : terminals) any_converged |= t.converged;
  if (!any_converged)
    throw NonConvergenceError("maximize: no start converged");

  // Deduplicate terminal points (same point up to 10*tol), keeping the
  // highest pressure representative of each cluster.
  std::vector<Terminal> distinct;
  for (const Terminal& t : terminals) {
    bool merged = false;
    for (Terminal& d : distinct) {
      if ((t.x - d.x).cwiseAbs().maxCoeff() <= 10.0 * config.tol) {
        if (t.pressure > d.pressure) d = t;
        d.converged = d.converged || t.converged;
        merged = true;
        break;
      }
    }
    if (!merged) distinct.push_back(t);
  }

  const auto lex_less = [](const Terminal& a, const Terminal& b) {
    return std::lexicographical_compare(a.x.data(), a.x.data() + a.x.size(),
                                        b.x.data(), b.x.data() + b.x.size());
  };
  std::sort(distinct.begin(), distinct.end(),
            [&](const Terminal& a, const Terminal& b) {
              if (a.pressure != b.pressure) return a.pressure > b.pressure;
              return lex_less(a, b);
            });
  // Pressure ties are resolved within a few-ulp band towards the
  // lexicographically smallest point; candidates whose true pressures
  // differ by less than the evaluation noise would otherwise be ranked
  // by rounding accident.
  double pmax = distinct.front().pressure;
  double band = 16.0 * std::numeric_limits<double>::epsilon() *
                std::max(1.0, std::abs(pmax));
  std::size_t best_idx = 0;
  for (std::size_t i = 1; i < distinct.size(); ++i) {
    if (distinct[i].pressure >= pmax - band &&
        lex_less(distinct[i], distinct[best_idx]))
      best_idx = i;
  }
  std::rotate(distinct.begin(), distinct.begin() + best_idx,
              distinct.begin() + best_idx + 1);
  const Terminal& best = distinct.front();

  SolveReport report;
  report.x_star = best.x;
  report.pressure = variational_pressure(params, eff, best.x);
  const Eigen::VectorXd g = gradient(params, eff, best.x);
  report.grad_norm = g.cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hs(
      hessian(params, eff, best.x), Eigen::EigenvaluesOnly);
  report.hessian_eigs = hs.eigenvalues();
  report.rho = eff.rho;
  report.iterations = total_iterations;
  report.converged = best.converged;
  report.multistart_count = static_cast<int>(starts.size());
  report.on_boundary.resize(K);
  report.kkt_ok = true;
  for (Eigen::Index r = 0; r < K; ++r) {
    report.on_boundary[r] = best.x[r] <= config.boundary_tol;
    if (report.on_boundary[r] ? g[r] > config.kkt_tol
                              : std::abs(g[r]) > config.kkt_tol)
      report.kkt_ok = false;
  }

  for (std::size_t i = 0; i < distinct.size(); ++i) {
    if (i > 0 && is_saddle(params, eff, distinct[i].x, distinct[i].pressure))
      continue;
    report.all_local_maxima.emplace_back(distinct[i].x, distinct[i].pressure);
  }
  return report;
}

bool kernel_stationarity_check(const ModelParams& params,
                               const EffectiveInteraction& eff,
                               const OrderParameter& x, double tol) {
  const Eigen::VectorXd residual =
      eff.delta * (x - consistency_map(params, eff, x));
  return residual.norm() <= tol * eff.delta_norm;
}

} // namespace nmsk

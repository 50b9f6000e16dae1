#include "nmsk/criticality.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nmsk/quadrature.hpp"

namespace nmsk {

namespace {

constexpr double kPhaseTol = 1e-8;

// Least squares y = a + b x; returns (b, stderr of b).
std::pair<double, double> slope_fit(const std::vector<double>& xs,
                                    const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  if (xs.size() < 3) throw std::invalid_argument("fit: need >= 3 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double b = sxy / sxx;
  const double a = my - b * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - a - b * xs[i];
    ss += r * r;
  }
  return {b, std::sqrt(ss / (n - 2.0) / sxx)};
}

ExponentFit loglog_fit(std::string name,
                       std::vector<std::pair<double, double>> points) {
  std::vector<double> lx, ly;
  lx.reserve(points.size());
  ly.reserve(points.size());
  double lo = points.front().first, hi = points.front().first;
  for (const auto& [c, r] : points) {
    lx.push_back(std::log(c));
    ly.push_back(std::log(r));
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  const auto [slope, err] = slope_fit(lx, ly);
  ExponentFit fit;
  fit.exponent_name = std::move(name);
  fit.fitted_slope = slope;
  fit.stderr_slope = err;
  fit.window = {lo, hi};
  fit.points = std::move(points);
  return fit;
}

} // namespace

double scalar_magnetization(double mu, double h, double xtol) {
  if (!(mu >= 0.0) || !(h >= 0.0))
    throw std::invalid_argument("scalar_magnetization: mu, h must be >= 0");
  const auto f = [&](double x) { return x - expect_tanh(mu * x + h); };
  double lo, hi = 1.0;
  if (h == 0.0) {
    if (mu <= 1.0) return 0.0;
    // the ordered branch lies above ~(mu-1)/mu^2; shrink until bracketed
    lo = 0.5 * (mu - 1.0) / (mu * mu);
    while (lo > 1e-300 && f(lo) >= 0.0) lo *= 0.5;
    if (lo <= 1e-300) return 0.0;
  } else {
    lo = 0.0;
  }
  double flo = f(lo);
  while (hi - lo > xtol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (flo * fm < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

PhasePoint phase_point(const ModelParams& params,
                       const MaximizeConfig& config) {
  PhasePoint point;
  point.params = params;
  const EffectiveInteraction eff = build_effective(params);
  point.rho = eff.rho;
  if (!eff.psd_flag) {
    point.delta_psd = false;
    point.pressure = std::numeric_limits<double>::quiet_NaN();
    return point;
  }
  const SolveReport report = maximize(params, eff, config);
  point.x_star = report.x_star;
  point.pressure = report.pressure;
  point.phase = report.x_star.cwiseAbs().maxCoeff() <= kPhaseTol
                    ? Phase::paramagnetic
                    : Phase::ordered;
  return point;
}

std::vector<PhasePoint> phase_scan(const std::vector<ModelParams>& grid,
                                   const MaximizeConfig& config) {
  std::vector<PhasePoint> out;
  out.reserve(grid.size());
  for (const ModelParams& params : grid) out.push_back(phase_point(params, config));
  return out;
}

ExponentFit fit_beta(const std::vector<double>& mu_window) {
  if (mu_window.empty()) throw std::invalid_argument("fit_beta: empty window");
  std::vector<std::pair<double, double>> points;
  for (double mu : mu_window) {
    if (!(mu > 1.0) || mu > 1.2)
      throw std::invalid_argument("fit_beta: window must lie in (1, 1.2]");
    points.emplace_back(mu - 1.0, scalar_magnetization(mu, 0.0));
  }
  return loglog_fit("beta", std::move(points));
}

ExponentFit fit_delta(const std::vector<double>& h_window) {
  if (h_window.empty()) throw std::invalid_argument("fit_delta: empty window");
  std::vector<std::pair<double, double>> points;
  for (double h : h_window) {
    if (!(h > 0.0) || h > 1e-2)
      throw std::invalid_argument("fit_delta: window must lie in (0, 1e-2]");
    points.emplace_back(h, scalar_magnetization(1.0, h));
  }
  return loglog_fit("delta", std::move(points));
}

ExponentFit fit_lambda_line(double lambda,
                            const std::vector<double>& mu_window) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("fit_lambda_line: lambda must be positive");
  if (mu_window.empty())
    throw std::invalid_argument("fit_lambda_line: empty window");
  std::vector<std::pair<double, double>> points;
  for (double mu : mu_window) {
    if (!(mu > 1.0) || mu > 1.05)
      throw std::invalid_argument(
          "fit_lambda_line: window must lie in (1, 1.05]");
    points.emplace_back(mu - 1.0,
                        scalar_magnetization(mu, lambda * (mu - 1.0)));
  }
  return loglog_fit("lambda_line", std::move(points));
}

std::vector<double> log_grid(double a, double b, int n) {
  if (!(a > 0.0) || !(b > a) || n < 2)
    throw std::invalid_argument("log_grid: need 0 < a < b, n >= 2");
  std::vector<double> grid(n);
  const double la = std::log(a), lb = std::log(b);
  for (int i = 0; i < n; ++i)
    grid[i] = std::exp(la + (lb - la) * i / (n - 1));
  return grid;
}

} // namespace nmsk

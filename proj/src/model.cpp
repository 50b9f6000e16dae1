#include "nmsk/model.hpp"

#include <cmath>
#include <stdexcept>

namespace nmsk {

namespace {
constexpr double kSumTol = 1e-12;
constexpr double kSymTol = 1e-12;
constexpr double kPsdBand = 1e-10;    // relative eigenvalue band for Δ ⪰ 0
constexpr double kKernelBand = 1e-10; // relative threshold for Ker Δ
} // namespace

ModelParams ModelParams::make(Eigen::VectorXd alpha, Eigen::MatrixXd mu,
                              Eigen::VectorXd h) {
  const auto K = alpha.size();
  if (K < 1) throw std::invalid_argument("alpha: at least one species");
  if (mu.rows() != K || mu.cols() != K)
    throw std::invalid_argument("mu: must be K x K");
  if (h.size() != K) throw std::invalid_argument("h: must have K entries");

  for (Eigen::Index r = 0; r < K; ++r) {
    if (!(alpha[r] > 0.0) || alpha[r] > 1.0)
      throw std::invalid_argument("alpha: entries must lie in (0, 1]");
    if (!(h[r] >= 0.0)) throw std::invalid_argument("h: entries must be >= 0");
  }
  if (std::abs(alpha.sum() - 1.0) > kSumTol)
    throw std::invalid_argument("alpha: must sum to 1");

  const double mu_scale = std::max(1.0, mu.cwiseAbs().maxCoeff());
  if ((mu - mu.transpose()).cwiseAbs().maxCoeff() > kSymTol * mu_scale)
    throw std::invalid_argument("mu: must be symmetric");
  mu = 0.5 * (mu + mu.transpose()).eval();
  if (mu.minCoeff() < 0.0)
    throw std::invalid_argument("mu: entries must be >= 0");

  return ModelParams{std::move(alpha), std::move(mu), std::move(h)};
}

EffectiveInteraction build_effective(const ModelParams& params) {
  const auto K = params.alpha.size();
  const Eigen::VectorXd& a = params.alpha;

  EffectiveInteraction eff;
  eff.alpha = a;
  eff.delta = a.asDiagonal() * params.mu * a.asDiagonal();
  eff.delta = 0.5 * (eff.delta + eff.delta.transpose()).eval();
  eff.alpha_inv_delta = a.cwiseInverse().asDiagonal() * eff.delta;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(eff.delta);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("build_effective: eigen solve failed");
  eff.delta_eigs = solver.eigenvalues();
  eff.delta_eigvecs = solver.eigenvectors();
  eff.delta_norm = eff.delta_eigs.cwiseAbs().maxCoeff();

  const double top = eff.delta_eigs[K - 1];
  eff.psd_flag = eff.delta_eigs[0] >= -kPsdBand * std::max(top, 0.0);
  for (Eigen::Index i = 0; i < K; ++i) {
    if (eff.delta_eigs[i] <= kKernelBand * eff.delta_norm)
      eff.kernel_basis.push_back(eff.delta_eigvecs.col(i));
  }
  eff.pd_flag = eff.psd_flag && eff.kernel_basis.empty();

  // rho(alpha^-1 Delta) via the symmetric similar matrix
  // alpha^{-1/2} Delta alpha^{-1/2}.
  const Eigen::VectorXd inv_sqrt = a.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd sym =
      inv_sqrt.asDiagonal() * eff.delta * inv_sqrt.asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sym_solver(sym,
                                                            Eigen::EigenvaluesOnly);
  eff.rho = sym_solver.eigenvalues().cwiseAbs().maxCoeff();
  return eff;
}

double spectral_radius(const EffectiveInteraction& eff,
                       const ModelParams& params) {
  if (eff.alpha.size() != params.alpha.size() ||
      (eff.alpha - params.alpha).cwiseAbs().maxCoeff() > 0.0)
    throw std::invalid_argument("spectral_radius: eff built from other params");
  return eff.rho;
}

} // namespace nmsk

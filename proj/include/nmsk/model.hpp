#pragma once

#include <Eigen/Dense>
#include <vector>

namespace nmsk {

/// Parameters of the multi-species model: K species with form factors
/// alpha (summing to 1), a symmetric nonnegative matrix mu of coupling
/// means, and nonnegative field means h.  On the Nishimori line every
/// random coupling/field has variance equal to its mean, so these three
/// objects determine the model completely (inverse temperature absorbed).
struct ModelParams {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd mu;
  Eigen::VectorXd h;

  int species_count() const { return static_cast<int>(alpha.size()); }

  /// Validate invariants (alpha in (0,1] summing to 1 within 1e-12,
  /// mu symmetric within 1e-12 with nonnegative entries, h >= 0) and
  /// symmetrize mu.  Throws std::invalid_argument on violation.
  static ModelParams make(Eigen::VectorXd alpha, Eigen::MatrixXd mu,
                          Eigen::VectorXd h);
};

/// The effective interaction matrix Δ with Δ_rs = α_r μ_rs α_s, plus the
/// cached spectral data every downstream consumer needs.  Immutable after
/// construction and safe to share across threads.
struct EffectiveInteraction {
  Eigen::MatrixXd delta;            // α̂ μ α̂, symmetric, entrywise >= 0
  Eigen::MatrixXd alpha_inv_delta;  // α̂⁻¹ Δ (row r = delta row r / α_r)
  bool psd_flag = false;            // Δ ⪰ 0 up to a relative 1e-10 band
  bool pd_flag = false;             // Δ ≻ 0 (no kernel)
  std::vector<Eigen::VectorXd> kernel_basis; // orthonormal basis of Ker Δ

  Eigen::VectorXd delta_eigs;       // eigenvalues of Δ, ascending
  Eigen::MatrixXd delta_eigvecs;    // matching orthonormal eigenvectors
  double delta_norm = 0.0;          // spectral norm of Δ
  double rho = 0.0;                 // ρ(α̂⁻¹Δ), see spectral_radius()

  Eigen::VectorXd alpha;            // copy of the form factors
};

/// Build Δ from validated parameters; the eigendecomposition is computed
/// once here and cached in the result.  An indefinite Δ is reported via
/// psd_flag = false (not an exception): callers decide how to proceed.
EffectiveInteraction build_effective(const ModelParams& params);

/// ρ(α̂⁻¹Δ), computed as the largest-magnitude eigenvalue of the symmetric
/// similar matrix α̂^{-1/2} Δ α̂^{-1/2}.
double spectral_radius(const EffectiveInteraction& eff,
                       const ModelParams& params);

} // namespace nmsk

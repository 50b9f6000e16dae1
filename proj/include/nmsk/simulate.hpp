#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nmsk/model.hpp"
#include "nmsk/variational.hpp"

namespace nmsk {

/// Partition of N spins into K contiguous species blocks, sizes rounded
/// from N·α_r by the largest-remainder method (|N_r - N·α_r| <= 1).
struct LatticeSpec {
  int total = 0;
  std::vector<int> sizes;
  std::vector<int> species_of; // spin index -> species, contiguous blocks

  static LatticeSpec build(int N, const Eigen::VectorXd& alpha);
};

/// One sampled set of couplings and fields on the Nishimori line:
///   J̃_ij ~ N(μ_rs/2N, μ_rs/2N)  i.i.d. per ordered pair (i,j), diagonal
///   included, with (r,s) the species of (i,j);  h̃_i ~ N(h_r, h_r).
/// field_var_scale != 1 moves the fields off the line (negative control).
struct DisorderRealization {
  int n = 0;
  Eigen::MatrixXd couplings; // ordered-pair J̃, n x n
  Eigen::VectorXd fields;    // h̃ per spin
  std::uint64_t seed = 0;
};

DisorderRealization sample_disorder(const ModelParams& params,
                                    const LatticeSpec& lattice,
                                    std::uint64_t seed,
                                    double field_var_scale = 1.0);

/// Exact Gibbs observables of one realization by summation over all 2^N
/// configurations (N <= 20).  pair_means is filled only when with_pairs.
struct ExactStats {
  double pressure = 0.0;          // p_N = (1/N) log Σ_σ e^{-H(σ)}
  Eigen::VectorXd site_means;     // ⟨σ_i⟩
  Eigen::MatrixXd pair_means;     // ⟨σ_i σ_j⟩, diagonal 1
  Eigen::VectorXd species_mag;    // ⟨m_r⟩
  Eigen::MatrixXd species_mag2;   // ⟨m_r m_s⟩
  bool has_pairs = false;
};

ExactStats exact_enumerate(const DisorderRealization& realization,
                           const LatticeSpec& lattice,
                           bool with_pairs = true);

/// Metropolis estimates from two independent chains sharing one disorder
/// realization; overlaps are measured across the chains.  therm < 0
/// selects automatic thermalization (10x the integrated autocorrelation
/// time estimated from a pilot run).
struct MCRun {
  Eigen::VectorXd mean_m;   // ⟨m_r⟩, averaged over both chains
  Eigen::VectorXd mean_q;   // ⟨q_r⟩ across chains
  Eigen::MatrixXd mean_mm;  // ⟨m_r m_s⟩
  Eigen::MatrixXd mean_qq;  // ⟨q_r q_s⟩
  double tau_int = 0.0;     // autocorrelation of the global magnetization
  long sweeps_used = 0;
  long therm_used = 0;

  bool has_site_stats = false;               // filled when requested:
  std::array<Eigen::VectorXd, 2> site_mean;  // per-chain ⟨σ_i⟩ estimates
  std::array<Eigen::MatrixXd, 2> pair_mean;  // per-chain ⟨σ_iσ_j⟩ estimates
};

/// visit_counts, when given and N <= 24, receives per-state visit counts
/// of chain 0 over the measurement sweeps (bit i of the state index set
/// when spin i is up) for comparisons against the exact Gibbs weights.
MCRun mc_run(const DisorderRealization& realization,
             const LatticeSpec& lattice, long sweeps, long therm,
             std::uint64_t seed, bool with_site_stats = false,
             std::vector<long>* visit_counts = nullptr);

/// A disorder-averaged observable with its across-realization standard
/// error (jackknife over realizations, the outer level of averaging).
struct MCEstimate {
  std::string observable;
  double mean = 0.0;
  double stderr_ = 0.0;
  int n_disorder = 0;
  long n_sweeps = 0;
  long n_therm = 0;

  double zscore() const;
};

enum class GibbsMode { exact, mc };

struct McOptions {
  long sweeps = 2000;
  long therm = -1; // auto
  int n_disorder = 200;
  std::uint64_t master_seed = 1;
  int workers = 0; // 0 = default pool size
};

/// Disorder-average residuals of the five Nishimori identities
///   E⟨σ_i⟩² = E⟨σ_i⟩,   E⟨σ_iσ_j⟩² = E⟨σ_iσ_j⟩,
///   E⟨σ_i⟩⟨σ_iσ_j⟩ = E⟨σ_i⟩⟨σ_j⟩,   E⟨q_s⟩ = E⟨m_s⟩,
///   E⟨q_r q_s⟩ = E⟨m_r m_s⟩,
/// each reported as (lhs - rhs) averaged within the realization and then
/// across n_disorder realizations.  In mc mode the squared/product Gibbs
/// averages are estimated by cross-replica products, which are unbiased.
/// field_var_scale != 1 provides the off-line negative control.
std::vector<MCEstimate> nishimori_checks(const ModelParams& params,
                                         const LatticeSpec& lattice,
                                         int n_disorder, GibbsMode mode,
                                         const McOptions& opts = {},
                                         double field_var_scale = 1.0);

/// Pressure-variance decay across system sizes, against the bound
/// Var(p_N) <= 8C/N with C = (1,Δ1)/2 + (α̂h,1), plus the Gibbs+disorder
/// fluctuation of the species magnetizations.  Exact enumeration (N <= 20).
struct ConcentrationRow {
  int N = 0;
  double var_p = 0.0;
  double var_p_stderr = 0.0;
  double bound = 0.0;          // 8C/N
  Eigen::VectorXd mag_fluct;   // E⟨(m_r - E⟨m_r⟩)²⟩ per species
};

std::vector<ConcentrationRow> concentration_checks(
    const ModelParams& params, const std::vector<int>& N_list,
    int n_disorder, std::uint64_t master_seed, int workers = 0);

/// Finite-N magnetizations against the variational maximizer, and exact
/// small-N pressures against the limiting value.
struct ConvergenceRow {
  int N = 0;
  Eigen::VectorXd mean_m;
  Eigen::VectorXd stderr_m;
  double pressure_exact = 0.0; // NaN when N > 20
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  OrderParameter x_star;
  double pressure_infinity = 0.0;
};

ConvergenceTable thermodynamic_convergence(const ModelParams& params,
                                           const std::vector<int>& N_list,
                                           const McOptions& opts = {});

} // namespace nmsk

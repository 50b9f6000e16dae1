#include "nmsk/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nmsk/parallel.hpp"
#include "nmsk/quadrature.hpp"
#include "nmsk/stats.hpp"

namespace nmsk {

namespace {

// Symmetric pair couplings S_ij = J_ij + J_ji (i != j) plus the constant
// diagonal contribution sum_i J_ii; H(σ) = -Σ_{i<j} S_ij σ_iσ_j - Σ h̃_iσ_i - c0.
struct PairCouplings {
  Eigen::MatrixXd S;
  double c0 = 0.0;
};

PairCouplings pair_couplings(const DisorderRealization& real) {
  PairCouplings pc;
  pc.S = real.couplings + real.couplings.transpose();
  pc.S.diagonal().setZero();
  pc.c0 = real.couplings.diagonal().sum();
  return pc;
}

double initial_energy(const PairCouplings& pc, const Eigen::VectorXd& fields,
                      const std::vector<int>& spin) {
  const auto n = fields.size();
  double e = -pc.c0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j)
      e -= pc.S(i, j) * spin[i] * spin[j];
    e -= fields[i] * spin[i];
  }
  return e;
}

// Local fields F_k = Σ_{j != k} S_kj σ_j + h̃_k; flip cost is 2 σ_k F_k.
Eigen::VectorXd local_fields(const PairCouplings& pc,
                             const Eigen::VectorXd& fields,
                             const std::vector<int>& spin) {
  const auto n = fields.size();
  Eigen::VectorXd F = fields;
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != k) F[k] += pc.S(k, j) * spin[j];
  return F;
}

void apply_flip(const PairCouplings& pc, std::vector<int>& spin,
                Eigen::VectorXd& F, int k) {
  spin[k] = -spin[k];
  const double step = 2.0 * spin[k];
  const auto n = F.size();
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != k) F[j] += step * pc.S(j, k);
}

// Integrated autocorrelation time with the self-consistent window
// W = smallest t with t >= 6 tau(t).
double integrated_autocorrelation(const std::vector<double>& series) {
  const auto n = static_cast<long>(series.size());
  if (n < 8) return 0.5;
  double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= n;
  if (var <= 0.0) return 0.5;
  double tau = 0.5;
  for (long t = 1; t < n / 2; ++t) {
    double c = 0.0;
    for (long i = 0; i + t < n; ++i)
      c += (series[i] - mean) * (series[i + t] - mean);
    c /= (n - t) * var;
    if (c <= 0.0) break;
    tau += c;
    if (t >= 6.0 * tau) break;
  }
  return tau;
}

} // namespace

LatticeSpec LatticeSpec::build(int N, const Eigen::VectorXd& alpha) {
  if (N < 1) throw std::invalid_argument("LatticeSpec: N must be >= 1");
  const auto K = alpha.size();
  LatticeSpec spec;
  spec.total = N;
  spec.sizes.resize(K);

  // largest-remainder rounding of N * alpha_r
  std::vector<double> frac(K);
  int assigned = 0;
  for (Eigen::Index r = 0; r < K; ++r) {
    const double target = N * alpha[r];
    spec.sizes[r] = static_cast<int>(std::floor(target));
    frac[r] = target - spec.sizes[r];
    assigned += spec.sizes[r];
  }
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return frac[a] > frac[b]; });
  for (int k = 0; k < N - assigned; ++k) ++spec.sizes[order[k % K]];

  spec.species_of.reserve(N);
  for (Eigen::Index r = 0; r < K; ++r)
    spec.species_of.insert(spec.species_of.end(), spec.sizes[r],
                           static_cast<int>(r));
  return spec;
}

DisorderRealization sample_disorder(const ModelParams& params,
                                    const LatticeSpec& lattice,
                                    std::uint64_t seed,
                                    double field_var_scale) {
  const int n = lattice.total;
  DisorderRealization real;
  real.n = n;
  real.seed = seed;
  real.couplings.resize(n, n);
  real.fields.resize(n);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double hr = params.h[lattice.species_of[i]];
    real.fields[i] = hr + std::sqrt(hr * field_var_scale) * normal(rng);
  }
  for (int i = 0; i < n; ++i) {
    const int r = lattice.species_of[i];
    for (int j = 0; j < n; ++j) {
      const double m = params.mu(r, lattice.species_of[j]) / (2.0 * n);
      real.couplings(i, j) = m + std::sqrt(m) * normal(rng);
    }
  }
  return real;
}

ExactStats exact_enumerate(const DisorderRealization& realization,
                           const LatticeSpec& lattice, bool with_pairs) {
  const int n = realization.n;
  if (n > 20)
    throw std::invalid_argument("exact_enumerate: N must be <= 20");
  const int K = static_cast<int>(lattice.sizes.size());
  const PairCouplings pc = pair_couplings(realization);
  const std::uint64_t states = 1ull << n;

  // Pass 1: log-weights -H over the Gray-code walk, tracking the maximum.
  std::vector<double> logw(states);
  std::vector<int> spin(n, 1);
  Eigen::VectorXd F = local_fields(pc, realization.fields, spin);
  double energy = initial_energy(pc, realization.fields, spin);
  logw[0] = -energy;
  double top = logw[0];
  for (std::uint64_t idx = 1; idx < states; ++idx) {
    const int k = std::countr_zero(idx);
    energy += 2.0 * spin[k] * F[k];
    apply_flip(pc, spin, F, k);
    logw[idx] = -energy;
    top = std::max(top, logw[idx]);
  }

  // Pass 2: Gibbs sums with weights exp(-H - top).
  ExactStats stats;
  stats.site_means = Eigen::VectorXd::Zero(n);
  stats.species_mag = Eigen::VectorXd::Zero(K);
  stats.species_mag2 = Eigen::MatrixXd::Zero(K, K);
  stats.has_pairs = with_pairs;
  if (with_pairs) stats.pair_means = Eigen::MatrixXd::Zero(n, n);

  std::fill(spin.begin(), spin.end(), 1);
  std::vector<double> species_sum(K, 0.0);
  for (int i = 0; i < n; ++i) species_sum[lattice.species_of[i]] += 1.0;

  double z = 0.0;
  Eigen::VectorXd m(K);
  for (std::uint64_t idx = 0; idx < states; ++idx) {
    if (idx > 0) {
      const int k = std::countr_zero(idx);
      spin[k] = -spin[k];
      species_sum[lattice.species_of[k]] += 2.0 * spin[k];
    }
    const double w = std::exp(logw[idx] - top);
    z += w;
    for (int i = 0; i < n; ++i) stats.site_means[i] += w * spin[i];
    for (int r = 0; r < K; ++r) m[r] = species_sum[r] / lattice.sizes[r];
    stats.species_mag += w * m;
    stats.species_mag2 += w * (m * m.transpose());
    if (with_pairs) {
      for (int i = 0; i < n; ++i) {
        const double ws = w * spin[i];
        for (int j = i + 1; j < n; ++j)
          stats.pair_means(i, j) += ws * spin[j];
      }
    }
  }

  stats.pressure = (top + std::log(z)) / n;
  stats.site_means /= z;
  stats.species_mag /= z;
  stats.species_mag2 /= z;
  if (with_pairs) {
    stats.pair_means /= z;
    stats.pair_means = (stats.pair_means + stats.pair_means.transpose()).eval();
    stats.pair_means.diagonal().setOnes();
  }
  return stats;
}

MCRun mc_run(const DisorderRealization& realization,
             const LatticeSpec& lattice, long sweeps, long therm,
             std::uint64_t seed, bool with_site_stats,
             std::vector<long>* visit_counts) {
  const int n = realization.n;
  const int K = static_cast<int>(lattice.sizes.size());
  if (sweeps <= std::max<long>(therm, 0))
    throw std::invalid_argument("mc_run: need sweeps > therm");
  if (visit_counts) {
    if (n > 24)
      throw std::invalid_argument("mc_run: visit counts need N <= 24");
    visit_counts->assign(1ull << n, 0);
  }
  const PairCouplings pc = pair_couplings(realization);

  struct Chain {
    std::mt19937_64 rng;
    std::uniform_real_distribution<double> uni{0.0, 1.0};
    std::vector<int> spin;
    Eigen::VectorXd F;
    std::vector<double> species_sum;
  };
  std::array<Chain, 2> chains;
  for (int c = 0; c < 2; ++c) {
    Chain& ch = chains[c];
    ch.rng.seed(mix_seed(seed, static_cast<std::uint64_t>(c)));
    ch.spin.resize(n);
    for (int i = 0; i < n; ++i) ch.spin[i] = ch.rng() & 1 ? 1 : -1;
    ch.F = local_fields(pc, realization.fields, ch.spin);
    ch.species_sum.assign(K, 0.0);
    for (int i = 0; i < n; ++i)
      ch.species_sum[lattice.species_of[i]] += ch.spin[i];
  }

  const auto sweep = [&](Chain& ch) {
    for (int k = 0; k < n; ++k) {
      const double dE = 2.0 * ch.spin[k] * ch.F[k];
      if (dE <= 0.0 || ch.uni(ch.rng) < std::exp(-dE)) {
        apply_flip(pc, ch.spin, ch.F, k);
        ch.species_sum[lattice.species_of[k]] += 2.0 * ch.spin[k];
      }
    }
  };

  long therm_used = therm;
  if (therm < 0) {
    // pilot run to estimate the autocorrelation time; burn 10x that
    // (the pilot sweeps count towards the burn-in)
    long pilot = std::min<long>(200, std::max<long>(sweeps / 4, 16));
    pilot = std::min(pilot, sweeps - 1);
    std::vector<double> series;
    series.reserve(pilot);
    for (long s = 0; s < pilot; ++s) {
      sweep(chains[0]);
      sweep(chains[1]);
      double mag = 0.0;
      for (int i = 0; i < n; ++i) mag += chains[0].spin[i];
      series.push_back(mag / n);
    }
    const double tau = integrated_autocorrelation(series);
    const long target = std::min<long>(
        std::max<long>(std::lround(10.0 * tau), 10), sweeps / 2);
    const long extra = std::max<long>(target - pilot, 0);
    for (long s = 0; s < extra; ++s) {
      sweep(chains[0]);
      sweep(chains[1]);
    }
    therm_used = pilot + extra;
  } else {
    for (long s = 0; s < therm_used; ++s) {
      sweep(chains[0]);
      sweep(chains[1]);
    }
  }

  const long measure = sweeps - therm_used;
  MCRun run;
  run.mean_m = Eigen::VectorXd::Zero(K);
  run.mean_q = Eigen::VectorXd::Zero(K);
  run.mean_mm = Eigen::MatrixXd::Zero(K, K);
  run.mean_qq = Eigen::MatrixXd::Zero(K, K);
  run.has_site_stats = with_site_stats;
  if (with_site_stats) {
    for (int c = 0; c < 2; ++c) {
      run.site_mean[c] = Eigen::VectorXd::Zero(n);
      run.pair_mean[c] = Eigen::MatrixXd::Zero(n, n);
    }
  }

  std::vector<double> mag_series;
  mag_series.reserve(measure);
  Eigen::VectorXd m0(K), m1(K), q(K);
  for (long s = 0; s < measure; ++s) {
    sweep(chains[0]);
    sweep(chains[1]);
    for (int r = 0; r < K; ++r) {
      m0[r] = chains[0].species_sum[r] / lattice.sizes[r];
      m1[r] = chains[1].species_sum[r] / lattice.sizes[r];
      q[r] = 0.0;
    }
    for (int i = 0; i < n; ++i)
      q[lattice.species_of[i]] += chains[0].spin[i] * chains[1].spin[i];
    for (int r = 0; r < K; ++r) q[r] /= lattice.sizes[r];

    run.mean_m += 0.5 * (m0 + m1);
    run.mean_q += q;
    run.mean_mm += 0.5 * (m0 * m0.transpose() + m1 * m1.transpose());
    run.mean_qq += q * q.transpose();
    mag_series.push_back(m0.dot(Eigen::VectorXd::Ones(K)) / K);

    if (visit_counts) {
      std::uint64_t state = 0;
      for (int i = 0; i < n; ++i)
        if (chains[0].spin[i] > 0) state |= 1ull << i;
      ++(*visit_counts)[state];
    }

    if (with_site_stats) {
      for (int c = 0; c < 2; ++c) {
        const auto& spin = chains[c].spin;
        for (int i = 0; i < n; ++i) {
          run.site_mean[c][i] += spin[i];
          for (int j = i + 1; j < n; ++j)
            run.pair_mean[c](i, j) += spin[i] * spin[j];
        }
      }
    }
  }

  run.mean_m /= measure;
  run.mean_q /= measure;
  run.mean_mm /= measure;
  run.mean_qq /= measure;
  if (with_site_stats) {
    for (int c = 0; c < 2; ++c) {
      run.site_mean[c] /= measure;
      run.pair_mean[c] /= measure;
      run.pair_mean[c] =
          (run.pair_mean[c] + run.pair_mean[c].transpose()).eval();
      run.pair_mean[c].diagonal().setOnes();
    }
  }
  run.tau_int = integrated_autocorrelation(mag_series);
  run.sweeps_used = measure;
  run.therm_used = therm_used;
  return run;
}

double MCEstimate::zscore() const {
  if (stderr_ <= 0.0) return mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return mean / stderr_;
}

std::vector<MCEstimate> nishimori_checks(const ModelParams& params,
                                         const LatticeSpec& lattice,
                                         int n_disorder, GibbsMode mode,
                                         const McOptions& opts,
                                         double field_var_scale) {
  if (mode == GibbsMode::exact && lattice.total > 20)
    throw std::invalid_argument("nishimori_checks: exact mode needs N <= 20");
  const int n = lattice.total;
  const int K = static_cast<int>(lattice.sizes.size());

  constexpr int kIdentities = 5;
  std::vector<std::array<double, kIdentities>> residuals(n_disorder);

  parallel_for(
      n_disorder,
      [&](long k) {
        const std::uint64_t seed = mix_seed(opts.master_seed, k);
        const DisorderRealization real =
            sample_disorder(params, lattice, seed, field_var_scale);
        // per-replica site/pair means: exact mode uses the same Gibbs
        // means twice, mc mode uses the two independent chains so that
        // products of Gibbs averages stay unbiased
        Eigen::VectorXd s0, s1;
        Eigen::MatrixXd p0, p1;
        if (mode == GibbsMode::exact) {
          const ExactStats st = exact_enumerate(real, lattice, true);
          s0 = s1 = st.site_means;
          p0 = p1 = st.pair_means;
        } else {
          const MCRun run = mc_run(real, lattice, opts.sweeps, opts.therm,
                                   mix_seed(seed, 77), true);
          s0 = run.site_mean[0];
          s1 = run.site_mean[1];
          p0 = run.pair_mean[0];
          p1 = run.pair_mean[1];
        }

        double r1 = 0.0;
        for (int i = 0; i < n; ++i)
          r1 += s0[i] * s1[i] - 0.5 * (s0[i] + s1[i]);
        r1 /= n;

        double r2 = 0.0, r3 = 0.0;
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j) {
            r2 += p0(i, j) * p1(i, j) - 0.5 * (p0(i, j) + p1(i, j));
            r3 += 0.5 * (s0[i] * p1(i, j) + s1[i] * p0(i, j)) -
                  0.5 * (s0[i] * s1[j] + s1[i] * s0[j]);
            r3 += 0.5 * (s0[j] * p1(i, j) + s1[j] * p0(i, j)) -
                  0.5 * (s0[j] * s1[i] + s1[j] * s0[i]);
          }
        }
        r2 /= n * (n - 1) / 2;
        r3 /= n * (n - 1);

        // species aggregates: overlaps from cross-replica products
        double r4 = 0.0, r5 = 0.0;
        int offset_r = 0;
        for (int r = 0; r < K; ++r) {
          double qs = 0.0, ms = 0.0;
          for (int i = offset_r; i < offset_r + lattice.sizes[r]; ++i) {
            qs += s0[i] * s1[i];
            ms += 0.5 * (s0[i] + s1[i]);
          }
          r4 += qs / lattice.sizes[r] - ms / lattice.sizes[r];
          int offset_s = 0;
          for (int s = 0; s < K; ++s) {
            double qq = 0.0, mm = 0.0;
            for (int i = offset_r; i < offset_r + lattice.sizes[r]; ++i) {
              for (int j = offset_s; j < offset_s + lattice.sizes[s]; ++j) {
                const double pij0 = i == j ? 1.0 : p0(i, j);
                const double pij1 = i == j ? 1.0 : p1(i, j);
                qq += pij0 * pij1;
                mm += 0.5 * (pij0 + pij1);
              }
            }
            const double norm = double(lattice.sizes[r]) * lattice.sizes[s];
            r5 += (qq - mm) / norm;
            offset_s += lattice.sizes[s];
          }
          offset_r += lattice.sizes[r];
        }
        r4 /= K;
        r5 /= K * K;
        residuals[k] = {r1, r2, r3, r4, r5};
      },
      opts.workers);

  static const char* names[kIdentities] = {
      "site_sq_minus_mean", "pair_sq_minus_mean", "site_pair_cross",
      "overlap_minus_mag", "overlap2_minus_mag2"};
  std::vector<MCEstimate> out;
  std::vector<double> column(n_disorder);
  for (int id = 0; id < kIdentities; ++id) {
    for (int k = 0; k < n_disorder; ++k) column[k] = residuals[k][id];
    const MeanStderr ms = jackknife_mean(column);
    MCEstimate est;
    est.observable = names[id];
    est.mean = ms.mean;
    est.stderr_ = ms.stderr_;
    est.n_disorder = n_disorder;
    est.n_sweeps = mode == GibbsMode::mc ? opts.sweeps : 0;
    est.n_therm = mode == GibbsMode::mc ? opts.therm : 0;
    out.push_back(std::move(est));
  }
  return out;
}

std::vector<ConcentrationRow> concentration_checks(
    const ModelParams& params, const std::vector<int>& N_list, int n_disorder,
    std::uint64_t master_seed, int workers) {
  const int K = params.species_count();
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(K);
  const Eigen::MatrixXd delta =
      params.alpha.asDiagonal() * params.mu * params.alpha.asDiagonal();
  const double C =
      0.5 * one.dot(delta * one) + params.alpha.cwiseProduct(params.h).sum();

  std::vector<ConcentrationRow> rows;
  for (int N : N_list) {
    if (N > 20)
      throw std::invalid_argument("concentration_checks: N must be <= 20");
    const LatticeSpec lattice = LatticeSpec::build(N, params.alpha);
    std::vector<double> pressures(n_disorder);
    Eigen::MatrixXd mag(n_disorder, K), mag2(n_disorder, K);
    parallel_for(
        n_disorder,
        [&](long k) {
          const std::uint64_t seed =
              mix_seed(master_seed ^ (0xabcdull * N), k);
          const DisorderRealization real =
              sample_disorder(params, lattice, seed);
          const ExactStats st = exact_enumerate(real, lattice, false);
          pressures[k] = st.pressure;
          for (int r = 0; r < K; ++r) {
            mag(k, r) = st.species_mag[r];
            mag2(k, r) = st.species_mag2(r, r);
          }
        },
        workers);

    ConcentrationRow row;
    row.N = N;
    const MeanStderr var = jackknife_variance(pressures);
    row.var_p = var.mean;
    row.var_p_stderr = var.stderr_;
    row.bound = 8.0 * C / N;
    row.mag_fluct.resize(K);
    for (int r = 0; r < K; ++r) {
      const double em = mag.col(r).mean();
      row.mag_fluct[r] = mag2.col(r).mean() - em * em;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ConvergenceTable thermodynamic_convergence(const ModelParams& params,
                                           const std::vector<int>& N_list,
                                           const McOptions& opts) {
  ConvergenceTable table;
  const EffectiveInteraction eff = build_effective(params);
  const SolveReport report = maximize(params, eff);
  table.x_star = report.x_star;
  table.pressure_infinity = report.pressure;
  const int K = params.species_count();

  for (int N : N_list) {
    const LatticeSpec lattice = LatticeSpec::build(N, params.alpha);
    Eigen::MatrixXd mag(opts.n_disorder, K);
    std::vector<double> pressures(opts.n_disorder,
                                  std::numeric_limits<double>::quiet_NaN());
    const bool exact_ok = N <= 20;
    parallel_for(
        opts.n_disorder,
        [&](long k) {
          const std::uint64_t seed =
              mix_seed(opts.master_seed ^ (0x5151ull * N), k);
          const DisorderRealization real =
              sample_disorder(params, lattice, seed);
          const MCRun run = mc_run(real, lattice, opts.sweeps, opts.therm,
                                   mix_seed(seed, 99));
          for (int r = 0; r < K; ++r) mag(k, r) = run.mean_m[r];
          if (exact_ok)
            pressures[k] = exact_enumerate(real, lattice, false).pressure;
        },
        opts.workers);

    ConvergenceRow row;
    row.N = N;
    row.mean_m.resize(K);
    row.stderr_m.resize(K);
    std::vector<double> col(opts.n_disorder);
    for (int r = 0; r < K; ++r) {
      for (int k = 0; k < opts.n_disorder; ++k) col[k] = mag(k, r);
      const MeanStderr ms = jackknife_mean(col);
      row.mean_m[r] = ms.mean;
      row.stderr_m[r] = ms.stderr_;
    }
    row.pressure_exact =
        exact_ok ? jackknife_mean(pressures).mean
                 : std::numeric_limits<double>::quiet_NaN();
    table.rows.push_back(std::move(row));
  }
  return table;
}

} // namespace nmsk

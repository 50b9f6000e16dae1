#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nmsk/quadrature.hpp"
#include "nmsk/simulate.hpp"
#include "nmsk/stats.hpp"

using namespace nmsk;

namespace {

ModelParams k1(double mu, double h = 0.0) {
  return ModelParams::make((Eigen::VectorXd(1) << 1.0).finished(),
                           (Eigen::MatrixXd(1, 1) << mu).finished(),
                           (Eigen::VectorXd(1) << h).finished());
}

ModelParams k2_test() {
  return ModelParams::make(
      (Eigen::VectorXd(2) << 0.5, 0.5).finished(),
      (Eigen::MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished(),
      (Eigen::VectorXd(2) << 0.3, 0.3).finished());
}

// Straight O(2^N N^2) Gibbs summation, recomputing every energy from
// scratch; the production enumerator walks a Gray code instead.
double direct_pressure(const DisorderRealization& real) {
  const int n = real.n;
  std::vector<double> logw(1ull << n);
  double top = -1e300;
  for (std::uint64_t s = 0; s < (1ull << n); ++s) {
    double e = 0.0;
    std::vector<int> spin(n);
    for (int i = 0; i < n; ++i) spin[i] = (s >> i) & 1 ? 1 : -1;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) e += real.couplings(i, j) * spin[i] * spin[j];
      e += real.fields[i] * spin[i];
    }
    logw[s] = e;
    top = std::max(top, e);
  }
  double z = 0.0;
  for (double l : logw) z += std::exp(l - top);
  return (top + std::log(z)) / n;
}

} // namespace

TEST_CASE("lattice rounding follows the largest remainder") {
  const Eigen::VectorXd alpha = (Eigen::VectorXd(3) << 0.2, 0.3, 0.5).finished();
  for (int N : {7, 10, 13, 64, 101}) {
    CAPTURE(N);
    const LatticeSpec spec = LatticeSpec::build(N, alpha);
    int total = 0;
    for (int r = 0; r < 3; ++r) {
      CHECK(std::abs(spec.sizes[r] - N * alpha[r]) <= 1.0);
      total += spec.sizes[r];
    }
    CHECK(total == N);
    REQUIRE(static_cast<int>(spec.species_of.size()) == N);
    for (int i = 1; i < N; ++i)
      CHECK(spec.species_of[i] >= spec.species_of[i - 1]);
  }
}

TEST_CASE("degenerate parameters sample exact zeros") {
  const ModelParams params = k1(0.0, 0.0);
  const LatticeSpec lattice = LatticeSpec::build(6, params.alpha);
  const DisorderRealization real = sample_disorder(params, lattice, 12);
  CHECK(real.couplings.cwiseAbs().maxCoeff() == 0.0);
  CHECK(real.fields.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("field statistics match the tied mean and variance") {
  const ModelParams params = k1(1.0, 0.5);
  const LatticeSpec lattice = LatticeSpec::build(1000, params.alpha);
  double sum = 0.0, sq = 0.0;
  const long draws = 1000L * 1000L;
  for (int k = 0; k < 1000; ++k) {
    const DisorderRealization real =
        sample_disorder(params, lattice, mix_seed(17, k));
    for (int i = 0; i < 1000; ++i) {
      sum += real.fields[i];
      sq += real.fields[i] * real.fields[i];
    }
  }
  const double mean = sum / draws;
  const double var = sq / draws - mean * mean;
  // mean of 1e6 N(0.5, 0.5) draws has stderr sqrt(0.5)/1000
  CHECK(std::abs(mean - 0.5) <= 3.0 * std::sqrt(0.5) / 1000.0);
  // variance estimate stderr ~ var * sqrt(2/1e6)
  CHECK(std::abs(var - 0.5) <= 3.0 * 0.5 * std::sqrt(2.0 / draws));
}

TEST_CASE("coupling statistics at mu = 2, N = 100") {
  const ModelParams params = k1(2.0);
  const LatticeSpec lattice = LatticeSpec::build(100, params.alpha);
  const double expected = 2.0 / 200.0; // mu / 2N
  double sum = 0.0, sq = 0.0;
  const long draws = 100L * 100 * 100;
  for (int k = 0; k < 100; ++k) {
    const DisorderRealization real =
        sample_disorder(params, lattice, mix_seed(23, k));
    sum += real.couplings.sum();
    sq += real.couplings.squaredNorm();
  }
  const double mean = sum / draws;
  const double var = sq / draws - mean * mean;
  CHECK(std::abs(mean - expected) <= 3.0 * std::sqrt(expected / draws));
  CHECK(std::abs(var - expected) <= 3.0 * expected * std::sqrt(2.0 / draws));
}

TEST_CASE("single spin enumerates in closed form") {
  const ModelParams params = k1(0.0, 0.7);
  const LatticeSpec lattice = LatticeSpec::build(1, params.alpha);
  const DisorderRealization real = sample_disorder(params, lattice, 5);
  const double field = real.fields[0];
  const ExactStats stats = exact_enumerate(real, lattice);
  CHECK(stats.pressure == doctest::Approx(log2cosh(field)).epsilon(1e-14));
  CHECK(stats.site_means[0] ==
        doctest::Approx(std::tanh(field)).epsilon(1e-14));
  CHECK(stats.species_mag[0] ==
        doctest::Approx(std::tanh(field)).epsilon(1e-14));
}

TEST_CASE("two spins against the four-configuration oracle") {
  const ModelParams params = k1(1.5, 0.4);
  const LatticeSpec lattice = LatticeSpec::build(2, params.alpha);
  const DisorderRealization real = sample_disorder(params, lattice, 77);
  const double j = real.couplings(0, 1) + real.couplings(1, 0);
  const double c = real.couplings(0, 0) + real.couplings(1, 1);
  const double h1 = real.fields[0], h2 = real.fields[1];

  double z = 0.0, s1 = 0.0, s2 = 0.0, s12 = 0.0;
  for (int a : {-1, 1}) {
    for (int b : {-1, 1}) {
      const double w = std::exp(c + j * a * b + h1 * a + h2 * b);
      z += w;
      s1 += w * a;
      s2 += w * b;
      s12 += w * a * b;
    }
  }
  const ExactStats stats = exact_enumerate(real, lattice);
  CHECK(stats.pressure == doctest::Approx(std::log(z) / 2.0).epsilon(1e-13));
  CHECK(stats.site_means[0] == doctest::Approx(s1 / z).epsilon(1e-13));
  CHECK(stats.site_means[1] == doctest::Approx(s2 / z).epsilon(1e-13));
  CHECK(stats.pair_means(0, 1) == doctest::Approx(s12 / z).epsilon(1e-13));
}

TEST_CASE("enumerator agrees with the direct transcription at N = 10") {
  const ModelParams params = k2_test();
  const LatticeSpec lattice = LatticeSpec::build(10, params.alpha);
  for (int k = 0; k < 3; ++k) {
    const DisorderRealization real =
        sample_disorder(params, lattice, mix_seed(31, k));
    const ExactStats stats = exact_enumerate(real, lattice, false);
    CHECK(stats.pressure ==
          doctest::Approx(direct_pressure(real)).epsilon(1e-12));
  }
}

TEST_CASE("flipping all fields flips the magnetizations") {
  const ModelParams params = k1(1.0, 0.5);
  const LatticeSpec lattice = LatticeSpec::build(8, params.alpha);
  DisorderRealization real = sample_disorder(params, lattice, 8);
  const ExactStats before = exact_enumerate(real, lattice);
  real.fields = -real.fields;
  const ExactStats after = exact_enumerate(real, lattice);
  CHECK(after.pressure == doctest::Approx(before.pressure).epsilon(1e-13));
  for (int i = 0; i < 8; ++i)
    CHECK(after.site_means[i] ==
          doctest::Approx(-before.site_means[i]).epsilon(1e-12));
}

TEST_CASE("gauge transformation leaves the pressure invariant") {
  const ModelParams params = k2_test();
  const LatticeSpec lattice = LatticeSpec::build(10, params.alpha);
  DisorderRealization real = sample_disorder(params, lattice, 55);
  const double before = exact_enumerate(real, lattice, false).pressure;

  std::mt19937_64 rng(99);
  std::vector<int> eps(10);
  for (int i = 0; i < 10; ++i) eps[i] = rng() & 1 ? 1 : -1;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) real.couplings(i, j) *= eps[i] * eps[j];
    real.fields[i] *= eps[i];
  }
  const double after = exact_enumerate(real, lattice, false).pressure;
  CHECK(std::abs(after - before) <= 1e-12);
}

TEST_CASE("decoupled spins are sampled exactly") {
  const ModelParams params = k1(0.0, 0.6);
  const LatticeSpec lattice = LatticeSpec::build(12, params.alpha);
  const DisorderRealization real = sample_disorder(params, lattice, 13);
  const ExactStats stats = exact_enumerate(real, lattice);
  for (int i = 0; i < 12; ++i)
    CHECK(stats.site_means[i] ==
          doctest::Approx(std::tanh(real.fields[i])).epsilon(1e-13));

  const MCRun mc = mc_run(real, lattice, 20000, 1000, 3, true);
  for (int i = 0; i < 12; ++i) {
    const double est = 0.5 * (mc.site_mean[0][i] + mc.site_mean[1][i]);
    CHECK(std::abs(est - std::tanh(real.fields[i])) <= 0.05);
  }
}

TEST_CASE("chains agree with enumeration across disorder") {
  const ModelParams params = k2_test();
  const LatticeSpec lattice = LatticeSpec::build(12, params.alpha);
  const int reps = 20;
  std::vector<double> diffs;
  for (int k = 0; k < reps; ++k) {
    const DisorderRealization real =
        sample_disorder(params, lattice, mix_seed(7, k));
    const ExactStats ex = exact_enumerate(real, lattice, false);
    const MCRun mc = mc_run(real, lattice, 8000, 1000, mix_seed(71, k));
    for (int r = 0; r < 2; ++r)
      diffs.push_back(mc.mean_m[r] - ex.species_mag[r]);
  }
  const MeanStderr ms = jackknife_mean(diffs);
  CHECK(std::abs(ms.mean) <= 3.0 * ms.stderr_);
}

TEST_CASE("stationary distribution matches the Gibbs weights") {
  const ModelParams params = k1(1.0, 0.3);
  const LatticeSpec lattice = LatticeSpec::build(8, params.alpha);
  const DisorderRealization real = sample_disorder(params, lattice, 321);

  // exact probabilities in visit-count state order (bit i = spin i up)
  std::vector<double> prob(256);
  double top = -1e300;
  for (int s = 0; s < 256; ++s) {
    double e = 0.0;
    int spin[8];
    for (int i = 0; i < 8; ++i) spin[i] = (s >> i) & 1 ? 1 : -1;
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) e += real.couplings(i, j) * spin[i] * spin[j];
      e += real.fields[i] * spin[i];
    }
    prob[s] = e;
    top = std::max(top, e);
  }
  double z = 0.0;
  for (double& p : prob) {
    p = std::exp(p - top);
    z += p;
  }
  for (double& p : prob) p /= z;

  std::vector<long> counts;
  mc_run(real, lattice, 2000000, 2000, 987, false, &counts);
  long total = 0;
  for (long c : counts) total += c;
  double tv = 0.0;
  for (int s = 0; s < 256; ++s)
    tv += std::abs(static_cast<double>(counts[s]) / total - prob[s]);
  tv /= 2.0;
  CHECK(tv <= 0.02);
}

TEST_CASE("identity residuals vanish on the line at N = 10") {
  const ModelParams params = k2_test();
  const LatticeSpec lattice = LatticeSpec::build(10, params.alpha);
  McOptions opts;
  opts.master_seed = 4243;
  const std::vector<MCEstimate> est =
      nishimori_checks(params, lattice, 400, GibbsMode::exact, opts);
  REQUIRE(est.size() == 5);
  for (const MCEstimate& e : est) {
    CAPTURE(e.observable);
    CHECK(std::abs(e.zscore()) <= 4.0);
  }
}

TEST_CASE("identities hold under the chain sampler too") {
  const ModelParams params = k2_test();
  const LatticeSpec lattice = LatticeSpec::build(8, params.alpha);
  McOptions opts;
  opts.master_seed = 515;
  opts.sweeps = 4000;
  opts.therm = 500;
  const std::vector<MCEstimate> est =
      nishimori_checks(params, lattice, 300, GibbsMode::mc, opts);
  for (const MCEstimate& e : est) {
    CAPTURE(e.observable);
    CHECK(std::abs(e.zscore()) <= 4.0);
  }
}

TEST_CASE("degenerate ensemble has exactly zero residuals") {
  const ModelParams params = ModelParams::make(
      (Eigen::VectorXd(2) << 0.5, 0.5).finished(),
      Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2));
  const LatticeSpec lattice = LatticeSpec::build(8, params.alpha);
  const std::vector<MCEstimate> est =
      nishimori_checks(params, lattice, 10, GibbsMode::exact);
  for (const MCEstimate& e : est) {
    CAPTURE(e.observable);
    CHECK(e.mean == 0.0);
    CHECK(e.stderr_ == 0.0);
  }
}

TEST_CASE("doubled field variance breaks the identities") {
  const ModelParams params = k2_test();
  const LatticeSpec lattice = LatticeSpec::build(10, params.alpha);
  McOptions opts;
  opts.master_seed = 4243;
  const std::vector<MCEstimate> est =
      nishimori_checks(params, lattice, 400, GibbsMode::exact, opts, 2.0);
  double worst = 0.0;
  for (const MCEstimate& e : est) worst = std::max(worst, std::abs(e.zscore()));
  CHECK(worst > 5.0);
}

TEST_CASE("degenerate model concentrates trivially") {
  const ModelParams params = k1(0.0, 0.0);
  const std::vector<ConcentrationRow> rows =
      concentration_checks(params, {8, 12}, 50, 1);
  for (const ConcentrationRow& row : rows) {
    CHECK(row.var_p == 0.0);
    CHECK(row.bound == 0.0);
  }
  const LatticeSpec lattice = LatticeSpec::build(8, params.alpha);
  const DisorderRealization real = sample_disorder(params, lattice, 3);
  CHECK(exact_enumerate(real, lattice, false).pressure ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("pressure variance decays inside the bound") {
  const ModelParams params = k2_test();
  const std::vector<ConcentrationRow> rows =
      concentration_checks(params, {8, 12, 16}, 800, 99);
  REQUIRE(rows.size() == 3);
  for (const ConcentrationRow& row : rows) {
    CAPTURE(row.N);
    CHECK(row.var_p <= row.bound);
    for (int r = 0; r < 2; ++r) CHECK(row.mag_fluct[r] >= 0.0);
  }
  CHECK(rows[1].var_p < rows[0].var_p);
  CHECK(rows[2].var_p < rows[1].var_p);
  CHECK(rows[1].mag_fluct[0] < rows[0].mag_fluct[0]);
  CHECK(rows[2].mag_fluct[0] < rows[1].mag_fluct[0]);
}

TEST_CASE("free spins reproduce the one-body magnetization at any size") {
  // with mu = 0 the chain average must match 2 psi'(h) - 1 directly
  const ModelParams params = k1(0.0, 0.4);
  McOptions opts;
  opts.sweeps = 3000;
  opts.therm = 300;
  opts.n_disorder = 150;
  opts.master_seed = 7;
  const ConvergenceTable table =
      thermodynamic_convergence(params, {32, 64}, opts);
  const double target = 2.0 * psi(0.4).first - 1.0;
  CHECK(table.x_star[0] == doctest::Approx(target).epsilon(1e-9));
  for (const ConvergenceRow& row : table.rows) {
    CAPTURE(row.N);
    CHECK(std::abs(row.mean_m[0] - target) <= 3.0 * row.stderr_m[0]);
  }
}

TEST_CASE("magnetization rises with the field") {
  // first correlation inequality, on chain estimates at fixed N
  const int N = 64;
  const int n_disorder = 100;
  double prev = -1.0;
  for (double h : {0.1, 0.3, 0.6}) {
    const ModelParams params = k1(1.0, h);
    const LatticeSpec lattice = LatticeSpec::build(N, params.alpha);
    std::vector<double> ms(n_disorder);
    for (int k = 0; k < n_disorder; ++k) {
      const DisorderRealization real =
          sample_disorder(params, lattice, mix_seed(1000 + k, k));
      ms[k] = mc_run(real, lattice, 1500, 200, mix_seed(2000 + k, k)).mean_m[0];
    }
    const MeanStderr est = jackknife_mean(ms);
    CAPTURE(h);
    CHECK(est.mean > prev + 3.0 * est.stderr_);
    prev = est.mean;
  }
}

TEST_CASE("enumeration rejects oversized systems") {
  const ModelParams params = k1(1.0);
  const LatticeSpec lattice = LatticeSpec::build(21, params.alpha);
  const DisorderRealization real = sample_disorder(params, lattice, 1);
  CHECK_THROWS_AS(exact_enumerate(real, lattice), std::invalid_argument);
}

TEST_CASE("runs are reproducible from the seed") {
  const ModelParams params = k2_test();
  const LatticeSpec lattice = LatticeSpec::build(10, params.alpha);
  const DisorderRealization a = sample_disorder(params, lattice, 42);
  const DisorderRealization b = sample_disorder(params, lattice, 42);
  CHECK((a.couplings - b.couplings).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.fields - b.fields).cwiseAbs().maxCoeff() == 0.0);
  const MCRun ra = mc_run(a, lattice, 500, 50, 9);
  const MCRun rb = mc_run(b, lattice, 500, 50, 9);
  CHECK((ra.mean_m - rb.mean_m).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ra.mean_q - rb.mean_q).cwiseAbs().maxCoeff() == 0.0);
}

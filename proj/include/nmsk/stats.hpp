#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace nmsk {

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Jackknife (leave-one-out) estimate of the sample mean and its error.
inline MeanStderr jackknife_mean(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return {x.empty() ? 0.0 : x[0], 0.0};
  double sum = 0.0;
  for (double v : x) sum += v;
  const double full = sum / n;
  double ss = 0.0;
  for (double v : x) {
    const double loo = (sum - v) / (n - 1.0);
    ss += (loo - full) * (loo - full);
  }
  return {full, std::sqrt((n - 1.0) / n * ss)};
}

/// Jackknife estimate of the population variance of x and its error.
/// Centered sums keep the estimate exact (0) for constant samples.
inline MeanStderr jackknife_variance(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 3) return {0.0, 0.0};
  bool constant = true;
  for (double v : x) constant = constant && v == x[0];
  if (constant) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double full = ss / (n - 1.0);

  // leave-one-out variances from the centered residuals:
  //   ss_loo(i) = ss - c_i^2 * n/(n-1)
  std::vector<double> loo(x.size());
  double mean_loo = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = x[i] - mean;
    loo[i] = (ss - c * c * n / (n - 1.0)) / (n - 2.0);
    mean_loo += loo[i];
  }
  mean_loo /= n;
  double spread = 0.0;
  for (double v : loo) spread += (v - mean_loo) * (v - mean_loo);
  return {full, std::sqrt((n - 1.0) / n * spread)};
}

/// splitmix64 step; the standard way to spawn independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Deterministic per-work-item seed derived from a master seed; item k
/// gets the same stream no matter which worker runs it.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t k) {
  std::uint64_t s = master ^ (0x2545f4914f6cdd1dull * (k + 1));
  return splitmix64(s);
}

} // namespace nmsk

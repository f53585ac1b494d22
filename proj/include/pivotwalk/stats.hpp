#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace pivotwalk {

inline constexpr double kWilsonZ95 = 1.959963984540054;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval for k successes out of n.
Interval wilson_interval(std::size_t k, std::size_t n, double z = kWilsonZ95);

// One point of an empirical deviation curve P(X_n <= r n).
struct DeviationPoint {
  long n = 0;
  std::size_t trials = 0;
  std::size_t events = 0;
  double p = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  bool censored = false;  // no event observed
};

DeviationPoint deviation_point(long n, std::size_t trials, std::size_t events);

struct DecayFit {
  double r = 0.0;
  double kappa_hat = 0.0;
  double intercept = 0.0;
  double stderr = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  long n0 = 0;
  long n1 = 0;
  std::size_t points = 0;    // uncensored points in the window
  std::size_t censored = 0;  // zero-event points skipped
  bool flagged = false;      // the 95% interval does not exclude 0
};

// Weighted least squares of -log p_n against n over the window [n0, n1], with
// delta-method weights events / (1 - p). The slope is kappa_hat; its standard
// error is scaled by the residual variance but never below the sampling noise.
DecayFit decay_fit(const std::vector<DeviationPoint>& series, double r, long n0 = 0,
                   long n1 = std::numeric_limits<long>::max());

// Law of the pivot increment U: P(U = 1) = up, P(U = -j) = down[j - 1]; the
// last entry of down also carries the lumped tail beyond it.
struct ULaw {
  std::string name;
  double up = 0.0;
  std::vector<double> down;
  double lumped = 0.0;  // mass moved onto the last entry of down

  double total() const;
  double mean() const;  // by summation over the stored terms
};

// P(U = -j) = (2d - 3) / (d (2d - 2)^j), P(U = 1) = (d - 1) / d.
ULaw free_u_law(int d, double tail = 1e-12);
// P(U = -j) = 9 / 10^(j + 1), P(U = 1) = 9 / 10.
ULaw simple_u_law(double tail = 1e-12);
// P(U = -j) = (1 - 7 eta) (7 eta)^j, P(U = 1) = 1 - 7 eta.
ULaw refined_u_law(double eta, double tail = 1e-12);

// tail[i] = P(U_1 + ... + U_n >= i) for i = 0..n, by exact convolution. Values
// that can no longer climb back to 1 are pooled, which leaves these tails exact.
std::vector<double> u_sum_tail(const ULaw& law, int n);

struct DominationRow {
  int i = 0;
  double law_tail = 0.0;        // P(U_1 + ... + U_n >= i)
  double empirical_tail = 0.0;  // P^(A_n >= i)
  double sigma = 0.0;
};

struct DominationReport {
  std::string law;
  int n = 0;
  std::size_t samples = 0;
  double k_sigma = 3.0;
  std::vector<DominationRow> rows;
  double worst_excess = 0.0;  // max over i of law - empirical - k sigma
  int worst_i = 0;
  bool pass = true;
};

// Passes iff P^(A_n >= i) >= P(sum U >= i) - k sigma for every i >= 1, with
// sigma the binomial standard deviation of the empirical tail under the law.
DominationReport domination_check(const std::vector<long>& A_n, const ULaw& law, int n, double k_sigma = 3.0);

struct MeanEstimate {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double stderr = 0.0;
};

// Percentile bootstrap of the mean, deterministic in the seed.
MeanEstimate bootstrap_mean(const std::vector<double>& values, std::uint64_t seed, int resamples = 1000,
                            double level = 0.95);

}  // namespace pivotwalk

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pivotwalk/errors.hpp"
#include "pivotwalk/stats.hpp"

using namespace pivotwalk;

TEST(Wilson, FrozenValues) {
  auto a = wilson_interval(0, 10);
  EXPECT_DOUBLE_EQ(a.lo, 0.0);
  EXPECT_NEAR(a.hi, 0.2775327998628892, 1e-12);
  auto b = wilson_interval(5, 10);
  EXPECT_NEAR(b.lo, 0.236593090512564, 1e-12);
  EXPECT_NEAR(b.hi, 0.7634069094874361, 1e-12);
  auto c = wilson_interval(37, 200);
  EXPECT_NEAR(c.lo, 0.13730192800616042, 1e-12);
  EXPECT_NEAR(c.hi, 0.2445706276115175, 1e-12);
  auto d = wilson_interval(10, 10);
  EXPECT_DOUBLE_EQ(d.hi, 1.0);
  EXPECT_THROW(wilson_interval(3, 2), InputError);
}

TEST(Wilson, IntervalContainsEstimate) {
  for (std::size_t n : {1u, 7u, 100u, 5000u})
    for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 13)) {
      const auto ci = wilson_interval(k, n);
      const double p = static_cast<double>(k) / static_cast<double>(n);
      EXPECT_LE(ci.lo, p + 1e-15);
      EXPECT_GE(ci.hi, p - 1e-15);
      EXPECT_GE(ci.lo, 0.0);
      EXPECT_LE(ci.hi, 1.0);
    }
}

namespace {

std::vector<DeviationPoint> synthetic(double kappa, long n1, std::size_t trials) {
  std::vector<DeviationPoint> s;
  for (long n = 1; n <= n1; ++n) {
    const auto events = static_cast<std::size_t>(std::llround(std::exp(-kappa * n) * static_cast<double>(trials)));
    s.push_back(deviation_point(n, trials, events));
  }
  return s;
}

}  // namespace

TEST(DecayFit, ExactExponential) {
  const auto f = decay_fit(synthetic(0.3, 30, 1'000'000'000'000'000ULL), 0.25);
  EXPECT_NEAR(f.kappa_hat, 0.3, 1e-6);
  EXPECT_FALSE(f.flagged);
  EXPECT_EQ(f.points, 30u);
  EXPECT_EQ(f.censored, 0u);
  EXPECT_EQ(f.n0, 1);
  EXPECT_EQ(f.n1, 30);
  EXPECT_GT(f.ci_lo, 0.0);
}

TEST(DecayFit, ConstantSeriesIsFlagged) {
  std::vector<DeviationPoint> s;
  for (long n = 1; n <= 20; ++n) s.push_back(deviation_point(n, 1000, 400));
  const auto f = decay_fit(s, 0.1);
  EXPECT_NEAR(f.kappa_hat, 0.0, 1e-12);
  EXPECT_TRUE(f.flagged);
}

TEST(DecayFit, CensoredPointsAreSkippedAndCounted) {
  auto s = synthetic(0.5, 40, 100000);
  std::size_t zeros = 0;
  for (const auto& d : s) zeros += d.events == 0;
  ASSERT_GT(zeros, 0u);
  const auto f = decay_fit(s, 0.25);
  EXPECT_EQ(f.censored, zeros);
  EXPECT_EQ(f.points + f.censored, s.size());
  EXPECT_NEAR(f.kappa_hat, 0.5, 0.05);
}

TEST(DecayFit, WindowAndTooFewPoints) {
  const auto s = synthetic(0.3, 30, 1'000'000'000ULL);
  const auto f = decay_fit(s, 0.25, 10, 20);
  EXPECT_EQ(f.n0, 10);
  EXPECT_EQ(f.n1, 20);
  EXPECT_EQ(f.points, 11u);
  EXPECT_THROW(decay_fit(s, 0.25, 10, 11), FitError);
  std::vector<DeviationPoint> zeros;
  for (long n = 1; n <= 10; ++n) zeros.push_back(deviation_point(n, 100, 0));
  EXPECT_THROW(decay_fit(zeros, 0.25), FitError);
}

TEST(ULaw, FreeGroupLaw) {
  const auto u = free_u_law(3);
  EXPECT_DOUBLE_EQ(u.up, 2.0 / 3.0);
  for (std::size_t j = 1; j <= 10; ++j) EXPECT_NEAR(u.down[j - 1], std::pow(4.0, -static_cast<double>(j)), 1e-15);
  EXPECT_NEAR(u.total(), 1.0, 1e-15);
  EXPECT_NEAR(u.mean(), 2.0 / 9.0, 1e-10);
  EXPECT_LT(u.lumped, 1e-12);
  // E U = (2d - 5)(d - 1) / ((2d - 3) d) for every d
  for (int d : {4, 5, 8}) {
    const auto v = free_u_law(d);
    EXPECT_NEAR(v.total(), 1.0, 1e-14);
    EXPECT_NEAR(v.mean(), (2.0 * d - 5) * (d - 1) / ((2.0 * d - 3) * d), 1e-10) << d;
  }
  EXPECT_THROW(free_u_law(2), InputError);
}

TEST(ULaw, SimpleAndRefinedLaws) {
  const auto s = simple_u_law();
  EXPECT_DOUBLE_EQ(s.up, 0.9);
  EXPECT_NEAR(s.down[0], 0.09, 1e-15);
  EXPECT_NEAR(s.total(), 1.0, 1e-15);
  EXPECT_NEAR(s.mean(), 0.9 - 1.0 / 9.0, 1e-10);

  const double eta = 0.01;
  const auto r = refined_u_law(eta);
  EXPECT_NEAR(r.up, 0.93, 1e-15);
  EXPECT_NEAR(r.down[0], 0.93 * 0.07, 1e-15);
  EXPECT_NEAR(r.total(), 1.0, 1e-14);
  // summing j (1 - 7 eta)(7 eta)^j gives (1 - 21 eta + 49 eta^2) / (1 - 7 eta)
  EXPECT_NEAR(r.mean(), (1 - 21 * eta + 49 * eta * eta) / (1 - 7 * eta), 1e-10);
  EXPECT_THROW(refined_u_law(1.0 / 7.0), InputError);
  EXPECT_THROW(refined_u_law(0.0), InputError);
}

TEST(ULaw, SumTailsAgainstExactEnumeration) {
  // frozen from exact rational enumeration of the n-fold sums
  const auto f2 = u_sum_tail(free_u_law(3), 2);
  const std::vector<double> e2{0.7777777777777778, 0.4444444444444444, 0.4444444444444444};
  for (std::size_t i = 0; i < e2.size(); ++i) EXPECT_NEAR(f2[i], e2[i], 1e-12);
  const auto f5 = u_sum_tail(free_u_law(3), 5);
  const std::vector<double> e5{0.7373971193415638, 0.6409465020576132, 0.4403292181069959,
                               0.3786008230452675, 0.13168724279835392, 0.13168724279835392};
  for (std::size_t i = 0; i < e5.size(); ++i) EXPECT_NEAR(f5[i], e5[i], 1e-12);
  const auto s4 = u_sum_tail(simple_u_law(), 4);
  const std::vector<double> e4{0.9867744, 0.944784, 0.91854, 0.6561, 0.6561};
  for (std::size_t i = 0; i < e4.size(); ++i) EXPECT_NEAR(s4[i], e4[i], 1e-12);
}

TEST(ULaw, SumTailIsMonotoneAndTopIsAllUps) {
  const auto law = free_u_law(3);
  const auto t = u_sum_tail(law, 100);
  EXPECT_NEAR(t[100], std::pow(2.0 / 3.0, 100), 1e-25);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LE(t[i], t[i - 1] + 1e-15);
}

namespace {

long draw_sum(const ULaw& law, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  long s = 0;
  for (int k = 0; k < n; ++k) {
    double x = u(rng);
    if (x < law.up) {
      ++s;
      continue;
    }
    x -= law.up;
    std::size_t j = 0;
    while (j + 1 < law.down.size() && x >= law.down[j]) x -= law.down[j++];
    s -= static_cast<long>(j + 1);
  }
  return s;
}

}  // namespace

TEST(Domination, SamplesFromTheLawItselfPass) {
  const auto law = free_u_law(3);
  std::mt19937_64 rng(11);
  std::vector<long> a;
  for (int t = 0; t < 4000; ++t) a.push_back(std::max(0L, draw_sum(law, 30, rng)));
  const auto rep = domination_check(a, law, 30);
  EXPECT_TRUE(rep.pass) << rep.worst_excess << " at " << rep.worst_i;
  EXPECT_EQ(rep.rows.size(), 30u);
}

TEST(Domination, SmallerCountsFail) {
  const auto law = free_u_law(3);
  std::mt19937_64 rng(12);
  std::vector<long> a;
  for (int t = 0; t < 4000; ++t) a.push_back(std::max(0L, draw_sum(law, 30, rng) - 3));
  const auto rep = domination_check(a, law, 30);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.worst_excess, 0.0);
  EXPECT_THROW(domination_check({}, law, 3), InputError);
  EXPECT_THROW(domination_check({-1}, law, 3), InputError);
}

TEST(Bootstrap, DeterministicAndCentred) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(2.0, 1.0);
  std::vector<double> v;
  for (int i = 0; i < 2000; ++i) v.push_back(g(rng));
  const auto a = bootstrap_mean(v, 9);
  const auto b = bootstrap_mean(v, 9);
  EXPECT_EQ(a.lo, b.lo);
  EXPECT_EQ(a.hi, b.hi);
  EXPECT_LE(a.lo, a.mean);
  EXPECT_GE(a.hi, a.mean);
  // percentile interval width close to 2 z stderr
  EXPECT_NEAR(a.hi - a.lo, 2 * kWilsonZ95 * a.stderr, 0.3 * 2 * kWilsonZ95 * a.stderr);
  const auto c = bootstrap_mean(std::vector<double>(50, 3.0), 1);
  EXPECT_EQ(c.lo, 3.0);
  EXPECT_EQ(c.hi, 3.0);
  EXPECT_THROW(bootstrap_mean({}, 1), InputError);
}

#include "pivotwalk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "pivotwalk/errors.hpp"
#include "pivotwalk/rng.hpp"

namespace pivotwalk {

Interval wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  if (k > n) throw InputError("more successes than trials");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1 + z2 / nn;
  const double centre = (p + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

DeviationPoint deviation_point(long n, std::size_t trials, std::size_t events) {
  DeviationPoint d;
  d.n = n;
  d.trials = trials;
  d.events = events;
  d.p = trials ? static_cast<double>(events) / static_cast<double>(trials) : 0.0;
  const auto ci = wilson_interval(events, trials);
  d.lo = ci.lo;
  d.hi = ci.hi;
  d.censored = events == 0;
  return d;
}

DecayFit decay_fit(const std::vector<DeviationPoint>& series, double r, long n0, long n1) {
  DecayFit f;
  f.r = r;
  std::vector<double> x, y, w;
  for (const auto& d : series) {
    if (d.n < n0 || d.n > n1) continue;
    if (d.events == 0 || d.trials == 0) {
      ++f.censored;
      continue;
    }
    const double T = static_cast<double>(d.trials);
    const double p = static_cast<double>(d.events) / T;
    x.push_back(static_cast<double>(d.n));
    y.push_back(-std::log(p));
    w.push_back(static_cast<double>(d.events) / std::max(1 - p, 0.5 / T));
  }
  f.points = x.size();
  if (f.points < 3) throw FitError("decay fit needs at least three uncensored points");
  f.n0 = static_cast<long>(*std::min_element(x.begin(), x.end()));
  f.n1 = static_cast<long>(*std::max_element(x.begin(), x.end()));

  const double sw = std::accumulate(w.begin(), w.end(), 0.0);
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += w[i] * x[i];
    ym += w[i] * y[i];
  }
  xm /= sw;
  ym /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
  }
  if (!(sxx > 0)) throw FitError("decay fit window has a single n");
  f.kappa_hat = sxy / sxx;
  f.intercept = ym - f.kappa_hat * xm;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.intercept - f.kappa_hat * x[i];
    rss += w[i] * e * e;
  }
  const double dof = static_cast<double>(x.size() - 2);
  const double s2 = dof > 0 ? rss / dof : 1.0;
  f.stderr = std::sqrt(std::max(s2, 1.0) / sxx);
  const double t = dof > 0 ? boost::math::quantile(boost::math::students_t(dof), 0.975) : kWilsonZ95;
  f.ci_lo = f.kappa_hat - t * f.stderr;
  f.ci_hi = f.kappa_hat + t * f.stderr;
  if (!std::isfinite(f.kappa_hat)) throw FitError("decay fit produced a non-finite slope");
  f.flagged = f.ci_lo <= 0.0;
  return f;
}

double ULaw::total() const { return up + std::accumulate(down.begin(), down.end(), 0.0); }

double ULaw::mean() const {
  double m = up;
  for (std::size_t j = 0; j < down.size(); ++j) m -= static_cast<double>(j + 1) * down[j];
  return m;
}

namespace {

// Geometric tail c q^j for j >= 1, cut where the remaining mass is below tail.
ULaw geometric_law(std::string name, double up, double c, double q, double tail) {
  ULaw u;
  u.name = std::move(name);
  u.up = up;
  double rest = 1.0 - up;
  for (int j = 1;; ++j) {
    const double p = c * std::pow(q, j);
    rest -= p;
    u.down.push_back(p);
    if (rest < tail || j > 100000) break;
  }
  u.lumped = std::max(rest, 0.0);
  u.down.back() += u.lumped;
  return u;
}

}  // namespace

ULaw free_u_law(int d, double tail) {
  if (d < 3) throw InputError("the free-group law needs d >= 3");
  const double dd = d;
  return geometric_law("free(d=" + std::to_string(d) + ")", (dd - 1) / dd, (2 * dd - 3) / dd, 1 / (2 * dd - 2), tail);
}

ULaw simple_u_law(double tail) { return geometric_law("simple", 0.9, 0.9, 0.1, tail); }

ULaw refined_u_law(double eta, double tail) {
  if (!(eta > 0) || 7 * eta >= 1) throw InputError("the refined law needs 0 < 7 eta < 1");
  return geometric_law("refined(eta=" + std::to_string(eta) + ")", 1 - 7 * eta, 1 - 7 * eta, 7 * eta, tail);
}

std::vector<double> u_sum_tail(const ULaw& law, int n) {
  if (n < 0) throw InputError("negative number of increments");
  // index v + n + 1 holds the value v in [-n, n]; index 0 pools everything below -n
  const std::size_t width = 2 * static_cast<std::size_t>(n) + 2;
  std::vector<double> p(width, 0.0), q(width);
  p[static_cast<std::size_t>(n) + 1] = 1.0;
  for (int step = 0; step < n; ++step) {
    std::fill(q.begin(), q.end(), 0.0);
    q[0] = p[0];
    for (std::size_t k = 1; k < width; ++k) {
      if (p[k] == 0.0) continue;
      if (k + 1 < width) q[k + 1] += p[k] * law.up;
      for (std::size_t j = 0; j < law.down.size(); ++j) {
        const std::size_t drop = j + 1;
        q[k > drop ? k - drop : 0] += p[k] * law.down[j];
      }
    }
    std::swap(p, q);
  }
  std::vector<double> tail(static_cast<std::size_t>(n) + 1, 0.0);
  double acc = 0.0;
  for (int i = n; i >= 0; --i) {
    acc += p[static_cast<std::size_t>(i + n + 1)];
    tail[static_cast<std::size_t>(i)] = acc;
  }
  return tail;
}

DominationReport domination_check(const std::vector<long>& A_n, const ULaw& law, int n, double k_sigma) {
  DominationReport rep;
  rep.law = law.name;
  rep.n = n;
  rep.samples = A_n.size();
  rep.k_sigma = k_sigma;
  if (A_n.empty()) throw InputError("domination check without samples");
  const auto tail = u_sum_tail(law, n);
  const double T = static_cast<double>(A_n.size());
  std::vector<std::size_t> at_least(static_cast<std::size_t>(n) + 2, 0);
  for (long a : A_n) {
    if (a < 0) throw InputError("negative pivot count");
    ++at_least[static_cast<std::size_t>(std::min<long>(a, n + 1))];
  }
  for (int i = n; i >= 0; --i) at_least[static_cast<std::size_t>(i)] += at_least[static_cast<std::size_t>(i) + 1];
  rep.worst_excess = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= n; ++i) {
    DominationRow row;
    row.i = i;
    row.law_tail = tail[static_cast<std::size_t>(i)];
    row.empirical_tail = static_cast<double>(at_least[static_cast<std::size_t>(i)]) / T;
    row.sigma = std::sqrt(row.law_tail * (1 - row.law_tail) / T);
    const double excess = row.law_tail - row.empirical_tail - k_sigma * row.sigma;
    if (excess > rep.worst_excess) {
      rep.worst_excess = excess;
      rep.worst_i = i;
    }
    if (excess > 1e-12) rep.pass = false;
    rep.rows.push_back(row);
  }
  return rep;
}

MeanEstimate bootstrap_mean(const std::vector<double>& values, std::uint64_t seed, int resamples, double level) {
  if (values.empty()) throw InputError("bootstrap of an empty sample");
  MeanEstimate m;
  const double n = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.stderr = values.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  auto rng = stream_rng(seed, 0, Stream::bootstrap);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[pick(rng)];
    means.push_back(s / n);
  }
  std::sort(means.begin(), means.end());
  const double a = (1 - level) / 2;
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::clamp(q * static_cast<double>(resamples - 1), 0.0,
                                                         static_cast<double>(resamples - 1)));
    return means[idx];
  };
  m.lo = at(a);
  m.hi = at(1 - a);
  return m;
}

}  // namespace pivotwalk

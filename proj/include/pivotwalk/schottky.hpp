#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pivotwalk/errors.hpp"
#include "pivotwalk/free_group.hpp"
#include "pivotwalk/geometry.hpp"
#include "pivotwalk/halfplane.hpp"
#include "pivotwalk/parallel.hpp"

namespace pivotwalk {

// How a set was obtained by ping-pong; zero fields mean "not constructed".
struct PingPongInfo {
  int n = 0;
  int m = 0;
  long p = 0;
  double K = 0.0;
  double K_min = 0.0;
  // Each element is a product of this many support elements (1 for direct input).
  long support_power = 1;
};

template <SpaceModel Space>
struct SchottkySet {
  using Isometry = typename Space::Isometry;

  std::vector<Isometry> elements;
  // Human-readable expression of each element in terms of the inputs.
  std::vector<std::string> expressions;
  double eta = 0.0;
  double C = 0.0;
  double D = 0.0;

  // Certification record.
  std::size_t trials = 0;
  std::string sampler;
  double worst_bad_fraction = 0.0;
  double translation_min = 0.0;
  PingPongInfo construction;

  std::size_t size() const { return elements.size(); }
};

template <class Point>
struct SchottkyWitness {
  Point x;
  Point y;
  // Indices of elements s with (x, s y)_o > C, and of those with (x, s^-1 y)_o > C.
  std::vector<std::size_t> bad_forward;
  std::vector<std::size_t> bad_inverse;
};

template <class Point>
struct VerificationReport {
  std::size_t trials = 0;
  double worst_bad_fraction = 0.0;
  double worst_forward = 0.0;
  double worst_inverse = 0.0;
  // Smallest C at which every sampled pair passes at the requested eta.
  double required_C = -std::numeric_limits<double>::infinity();
  std::vector<SchottkyWitness<Point>> witnesses;
  double translation_min = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> short_elements;
  std::string sampler;

  bool fraction_ok(double eta) const { return trials > 0 && worst_bad_fraction <= eta + 1e-12; }
  bool translation_ok() const { return short_elements.empty(); }
  bool passes(double eta) const { return fraction_ok(eta) && translation_ok(); }
};

struct VerifyOptions {
  // Used for required_C only; the bad fractions do not depend on it.
  double eta = 0.0;
  unsigned threads = 1;
  std::size_t max_witnesses = 8;
};

template <class S>
concept PairSampler = requires(const S& s, std::size_t i) {
  { s.size() } -> std::convertible_to<std::size_t>;
  s.pair(i);
  { s.description() } -> std::convertible_to<std::string>;
};

// Every ordered pair of reduced words of length <= radius.
class ExhaustiveTreeSampler {
 public:
  ExhaustiveTreeSampler(const FreeGroupSpace& space, int radius) : radius_(radius), words_(space.ball(radius)) {}
  std::size_t size() const { return words_.size() * words_.size(); }
  std::pair<Word, Word> pair(std::size_t i) const { return {words_[i / words_.size()], words_[i % words_.size()]}; }
  std::string description() const {
    return "exhaustive tree pairs, radius " + std::to_string(radius_) + " (" + std::to_string(size()) + " pairs)";
  }
  int radius() const { return radius_; }

 private:
  int radius_;
  std::vector<Word> words_;
};

inline std::mt19937_64 pair_rng(std::uint64_t seed, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(static_cast<std::uint64_t>(i) >> 32)};
  return std::mt19937_64(seq);
}

// Uniform length in [0, max_len], then uniform reduced word of that length.
class RandomTreeSampler {
 public:
  RandomTreeSampler(int rank, int max_len, std::size_t trials, std::uint64_t seed)
      : rank_(rank), max_len_(max_len), trials_(trials), seed_(seed) {}
  std::size_t size() const { return trials_; }
  std::pair<Word, Word> pair(std::size_t i) const {
    auto rng = pair_rng(seed_, i);
    Word x = draw(rng);
    return {std::move(x), draw(rng)};
  }
  std::string description() const {
    return "random tree pairs, length <= " + std::to_string(max_len_) + " (" + std::to_string(trials_) + " pairs)";
  }

 private:
  Word draw(std::mt19937_64& rng) const {
    std::uniform_int_distribution<int> len(0, max_len_), first(0, 2 * rank_ - 1), next(0, 2 * rank_ - 2);
    std::vector<Letter> out;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) {
      if (out.empty()) {
        out.emplace_back(static_cast<std::uint8_t>(first(rng)));
      } else {
        // skip the inverse of the previous letter
        int c = next(rng);
        if (c >= out.back().inverse().code()) ++c;
        out.emplace_back(static_cast<std::uint8_t>(c));
      }
    }
    return Word::from_reduced(std::move(out));
  }

  int rank_;
  int max_len_;
  std::size_t trials_;
  std::uint64_t seed_;
};

// Four strata by index: near generic, far generic, both along fixed-point axes,
// and one near generic with one along an axis. Axis points aim at a hinted
// boundary point with a small angular jitter.
template <class Real>
class StratifiedHalfPlaneSampler {
 public:
  StratifiedHalfPlaneSampler(std::vector<BoundaryPoint<Real>> hints, double radius, std::size_t trials,
                             std::uint64_t seed)
      : radius_(radius), trials_(trials), seed_(seed) {
    for (const auto& h : hints) angles_.push_back(boundary_angle(h));
  }
  std::size_t size() const { return trials_; }
  std::pair<UpperHalfPoint<Real>, UpperHalfPoint<Real>> pair(std::size_t i) const {
    auto rng = pair_rng(seed_, i);
    switch (angles_.empty() ? i % 2 : i % 4) {
      case 0: {
        auto x = generic(rng, 0.0, near_);
        return {x, generic(rng, 0.0, near_)};
      }
      case 1: {
        auto x = generic(rng, near_, radius_);
        return {x, generic(rng, near_, radius_)};
      }
      case 2: {
        auto x = axis(rng);
        return {x, axis(rng)};
      }
      default: {
        auto x = generic(rng, 0.0, near_);
        auto y = axis(rng);
        if (rng() & 1) return {y, x};
        return {x, y};
      }
    }
  }
  std::string description() const {
    return "stratified half-plane pairs, radius " + std::to_string(radius_) + " (" + std::to_string(trials_) +
           " pairs)";
  }

 private:
  UpperHalfPoint<Real> generic(std::mt19937_64& rng, double lo, double hi) const {
    std::uniform_real_distribution<double> r(lo, std::max(lo, hi)), th(-std::numbers::pi, std::numbers::pi);
    const double rr = r(rng);
    return ray_point<Real>(rr, th(rng));
  }
  UpperHalfPoint<Real> axis(std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, angles_.size() - 1);
    std::uniform_real_distribution<double> r(0.0, radius_), jitter(-0.05, 0.05);
    const double a = angles_[pick(rng)];
    const double rr = r(rng);
    // jitter shrinks with depth so the point stays near the axis
    return ray_point<Real>(rr, a + jitter(rng) * std::exp(-rr / 4));
  }

  static constexpr double near_ = 3.0;
  double radius_;
  std::size_t trials_;
  std::uint64_t seed_;
  std::vector<double> angles_;
};

namespace detail {

template <class Point>
struct VerifyPartial {
  double worst = 0.0, worst_forward = 0.0, worst_inverse = 0.0;
  double required = -std::numeric_limits<double>::infinity();
  std::vector<SchottkyWitness<Point>> witnesses;
};

// (b+1)-th largest value, or -inf when every element may be bad.
inline double kth_largest(std::vector<double>& v, std::size_t allowed_bad) {
  if (allowed_bad >= v.size()) return -std::numeric_limits<double>::infinity();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(allowed_bad), v.end(), std::greater<>());
  return v[allowed_bad];
}

}  // namespace detail

template <SpaceModel Space, PairSampler Sampler>
VerificationReport<typename Space::Point> verify_schottky(const Space& space,
                                                          const std::vector<typename Space::Isometry>& S, double C,
                                                          double D, const Sampler& sampler,
                                                          const VerifyOptions& opts = {}) {
  using Point = typename Space::Point;
  if (S.empty()) throw InputError("Schottky verification needs a nonempty set");
  const Point o = space.basepoint();
  std::vector<typename Space::Isometry> inv;
  inv.reserve(S.size());
  for (const auto& s : S) inv.push_back(space.inverse(s));

  VerificationReport<Point> rep;
  rep.trials = sampler.size();
  rep.sampler = sampler.description();
  for (std::size_t k = 0; k < S.size(); ++k) {
    const double t = space.distance(o, space.orbit_point(S[k]));
    rep.translation_min = std::min(rep.translation_min, t);
    if (t < D - kDefaultEps) rep.short_elements.push_back(k);
  }

  const double n = static_cast<double>(S.size());
  const auto allowed_bad = static_cast<std::size_t>(std::floor(opts.eta * n + 1e-9));
  auto chunk_fn = [&](std::size_t begin, std::size_t end) {
    detail::VerifyPartial<Point> part;
    std::vector<double> fwd(S.size()), bwd(S.size());
    for (std::size_t i = begin; i < end; ++i) {
      const auto [x, y] = sampler.pair(i);
      std::vector<std::size_t> bad_f, bad_b;
      for (std::size_t k = 0; k < S.size(); ++k) {
        fwd[k] = space.gromov_product(x, space.act(S[k], y), o);
        bwd[k] = space.gromov_product(x, space.act(inv[k], y), o);
        if (fwd[k] > C) bad_f.push_back(k);
        if (bwd[k] > C) bad_b.push_back(k);
      }
      const double ff = static_cast<double>(bad_f.size()) / n;
      const double fb = static_cast<double>(bad_b.size()) / n;
      const double f = std::max(ff, fb);
      part.worst_forward = std::max(part.worst_forward, ff);
      part.worst_inverse = std::max(part.worst_inverse, fb);
      part.required = std::max({part.required, detail::kth_largest(fwd, allowed_bad),
                                detail::kth_largest(bwd, allowed_bad)});
      if (f > 0 && f >= part.worst) {
        if (f > part.worst) part.witnesses.clear();
        part.worst = f;
        if (part.witnesses.size() < opts.max_witnesses)
          part.witnesses.push_back({x, y, std::move(bad_f), std::move(bad_b)});
      }
    }
    return part;
  };
  const auto parts = parallel_chunks<detail::VerifyPartial<Point>>(sampler.size(), 2048, opts.threads, chunk_fn);
  for (const auto& part : parts) {
    rep.worst_forward = std::max(rep.worst_forward, part.worst_forward);
    rep.worst_inverse = std::max(rep.worst_inverse, part.worst_inverse);
    rep.required_C = std::max(rep.required_C, part.required);
    if (part.worst > rep.worst_bad_fraction) {
      rep.worst_bad_fraction = part.worst;
      rep.witnesses = part.witnesses;
    } else if (part.worst > 0 && part.worst == rep.worst_bad_fraction) {
      for (const auto& w : part.witnesses)
        if (rep.witnesses.size() < opts.max_witnesses) rep.witnesses.push_back(w);
    }
  }
  return rep;
}

template <SpaceModel Space, PairSampler Sampler>
VerificationReport<typename Space::Point> verify_schottky(const Space& space, const SchottkySet<Space>& set,
                                                          const Sampler& sampler, unsigned threads = 1) {
  return verify_schottky(space, set.elements, set.C, set.D, sampler, VerifyOptions{set.eta, threads, 8});
}

struct SchottkyLimits {
  int max_n = 64;
  long max_p = 1L << 16;
  // Grid spacing for K above its separation minimum.
  double K_step = 0.25;
  // Stop raising p once elements move o this far; 0 picks a backend default.
  double max_translation = 0.0;
  // End products above this count as coincident fixed points.
  double end_cap = 20.0;
  std::size_t trials = 10000;
  int tree_radius = 4;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  // Support search.
  int max_power = 4;
  std::size_t max_support = 20000;
};

namespace detail {

inline double default_max_translation(const FreeGroupSpace&) { return 4096.0; }
template <class Real>
double default_max_translation(const HalfPlaneSpace<Real>&) {
  // double loses sub-unit accuracy for points much beyond distance ~35 from i
  if constexpr (RealTraits<Real>::bounded) return RealTraits<Real>::capacity / 2;
  return 24.0;
}

}  // namespace detail

// Sampler used when the caller does not supply one.
inline ExhaustiveTreeSampler default_sampler(const FreeGroupSpace& space, const std::vector<Word>&,
                                             const SchottkyLimits& limits, std::uint64_t) {
  return ExhaustiveTreeSampler(space, limits.tree_radius);
}

template <class Real>
StratifiedHalfPlaneSampler<Real> default_sampler(const HalfPlaneSpace<Real>& space,
                                                 const std::vector<Moebius<Real>>& S, const SchottkyLimits& limits,
                                                 std::uint64_t seed) {
  std::vector<BoundaryPoint<Real>> hints;
  double reach = 0.0;
  for (const auto& s : S) {
    if (auto ends = space.fixed_ends(s)) {
      hints.push_back(ends->first);
      hints.push_back(ends->second);
    }
    reach = std::max(reach, space.distance(space.basepoint(), space.orbit_point(s)));
  }
  // far enough to see every element act, near enough for the working precision
  double radius = std::max(12.0, 2.0 * reach);
  radius = std::min(radius, RealTraits<Real>::bounded ? RealTraits<Real>::capacity / 3 : 12.0);
  return StratifiedHalfPlaneSampler<Real>(std::move(hints), radius, limits.trials, seed);
}

template <SpaceModel Space>
typename Space::Isometry isometry_power(const Space& space, const typename Space::Isometry& g, long p) {
  if (p < 0) return isometry_power(space, space.inverse(g), -p);
  auto result = space.identity();
  auto base = g;
  while (p > 0) {
    if (p & 1) result = space.compose(result, base);
    p >>= 1;
    if (p > 0) base = space.compose(base, base);
  }
  return result;
}

namespace detail {

template <SpaceModel Space>
double max_end_product(const Space& space, const std::vector<typename Space::End>& ends) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ends.size(); ++i)
    for (std::size_t j = i + 1; j < ends.size(); ++j) worst = std::max(worst, space.end_product(ends[i], ends[j]));
  return worst;
}

// Fixed ends of every element, or nullopt if one is not loxodromic.
template <SpaceModel Space>
std::optional<std::vector<typename Space::End>> all_ends(const Space& space,
                                                         const std::vector<typename Space::Isometry>& gs) {
  std::vector<typename Space::End> ends;
  for (const auto& g : gs) {
    auto e = space.fixed_ends(g);
    if (!e) return std::nullopt;
    ends.push_back(e->first);
    ends.push_back(e->second);
  }
  return ends;
}

inline std::string power_text(const std::string& name, long k) {
  if (k == 1) return name;
  const bool atom = name.find_first_of(" ()^") == std::string::npos;
  return (atom ? name : "(" + name + ")") + "^" + std::to_string(k);
}

}  // namespace detail

// Ping-pong search: products of length m in {u^n, v^n}, raised to a power p.
template <SpaceModel Space>
SchottkySet<Space> pingpong_construct(const Space& space, const typename Space::Isometry& u,
                                      const typename Space::Isometry& v, double eta, double D,
                                      const SchottkyLimits& limits = {}, const std::string& u_name = "u",
                                      const std::string& v_name = "v") {
  using Iso = typename Space::Isometry;
  if (!(eta > 0.0 && eta < 1.0)) throw InputError("eta must lie in (0, 1)");
  if (!(D >= 0.0)) throw InputError("D must be nonnegative");
  const auto eu = space.fixed_ends(u);
  const auto ev = space.fixed_ends(v);
  if (!eu || !ev) throw InputError("ping-pong needs two loxodromic isometries");
  for (const auto& a : {eu->first, eu->second})
    for (const auto& b : {ev->first, ev->second})
      if (!(space.end_product(a, b) < limits.end_cap))
        throw InputError("ping-pong needs disjoint fixed points, found a shared end");

  int m = 1;
  while (std::ldexp(1.0, 1 - m) >= eta) ++m;
  const std::size_t count = std::size_t{1} << m;

  // smallest n (doubling) whose 2^m products are distinct, loxodromic, with separated ends
  std::vector<Iso> gs;
  std::vector<std::string> names;
  std::vector<typename Space::End> ends;
  int n = 1;
  for (;; n *= 2) {
    if (n > limits.max_n)
      throw ConstructionError("no power n <= " + std::to_string(limits.max_n) +
                              " gives separated fixed points for the ping-pong products");
    const Iso un = isometry_power(space, u, n), vn = isometry_power(space, v, n);
    gs.assign(count, space.identity());
    names.assign(count, "");
    for (std::size_t code = 0; code < count; ++code) {
      for (int k = 0; k < m; ++k) {
        const bool use_v = (code >> (m - 1 - k)) & 1;
        gs[code] = space.compose(gs[code], use_v ? vn : un);
        names[code] += (k ? " " : "") + detail::power_text(use_v ? v_name : u_name, n);
      }
    }
    auto e = detail::all_ends(space, gs);
    if (!e) continue;
    if (detail::max_end_product(space, *e) < limits.end_cap) {
      ends = std::move(*e);
      break;
    }
  }

  // V(xi) = {x : (x, xi)_o >= K} are pairwise disjoint once K exceeds every end product by delta
  const double K_min = std::max(0.0, detail::max_end_product(space, ends) + space.delta());
  const double max_translation =
      limits.max_translation > 0 ? limits.max_translation : detail::default_max_translation(space);

  std::optional<SchottkySet<Space>> best;
  double prev_required = std::numeric_limits<double>::infinity();
  std::string last_diag = "no power reached the translation target";
  for (long p = 1; p <= limits.max_p; p *= 2) {
    std::vector<Iso> S;
    for (const auto& g : gs) S.push_back(isometry_power(space, g, p));
    double tmin = std::numeric_limits<double>::infinity(), tmax = 0.0;
    for (const auto& s : S) {
      const double t = space.distance(space.basepoint(), space.orbit_point(s));
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    if (tmax > max_translation) break;
    if (tmin < D) continue;
    const auto sampler = default_sampler(space, S, limits, limits.seed);
    const auto rep = verify_schottky(space, S, K_min + space.delta(), D, sampler,
                                     VerifyOptions{eta, limits.threads, 4});
    // smallest grid K >= K_min with C = K + delta covering the sample
    double K = K_min;
    if (rep.required_C > K + space.delta())
      K += std::ceil((rep.required_C - space.delta() - K_min) / limits.K_step) * limits.K_step;
    last_diag = "p = " + std::to_string(p) + ": required C " + std::to_string(rep.required_C) +
                ", worst bad fraction at K_min " + std::to_string(rep.worst_bad_fraction);
    if (!best || K < best->construction.K) {
      SchottkySet<Space> set;
      set.elements = std::move(S);
      for (const auto& name : names) set.expressions.push_back(detail::power_text(name, p));
      set.eta = eta;
      set.C = K + space.delta();
      set.D = D;
      set.trials = rep.trials;
      set.sampler = rep.sampler;
      set.translation_min = tmin;
      set.construction = PingPongInfo{n, m, p, K, K_min, static_cast<long>(n) * m * p};
      best = std::move(set);
    }
    if (K <= K_min || !(rep.required_C < prev_required - 1e-9)) break;
    prev_required = rep.required_C;
  }
  if (!best) throw ConstructionError("ping-pong construction failed: " + last_diag);

  const auto sampler = default_sampler(space, best->elements, limits, limits.seed);
  const auto rep = verify_schottky(space, *best, sampler, limits.threads);
  if (!rep.passes(eta)) throw ConstructionError("ping-pong set failed its own verification: " + last_diag);
  best->worst_bad_fraction = rep.worst_bad_fraction;
  return *best;
}

// Loxodromic pair with disjoint fixed points in the supports of convolution
// powers, fed to the ping-pong construction. Returns the total power M.
template <SpaceModel Space>
std::pair<long, SchottkySet<Space>> find_schottky_in_support(const Space& space,
                                                             const std::vector<typename Space::Isometry>& atoms,
                                                             const std::vector<std::string>& atom_names, double eta,
                                                             double D, const SchottkyLimits& limits = {}) {
  using Iso = typename Space::Isometry;
  struct Entry {
    Iso g;
    std::string name;
    int power;
    std::pair<typename Space::End, typename Space::End> ends;
  };
  if (atoms.empty()) throw InputError("support search needs a nonempty support");
  if (atom_names.size() != atoms.size()) throw InputError("one name per support element expected");

  std::vector<Entry> lox;
  std::vector<std::pair<Iso, std::string>> layer;
  for (std::size_t i = 0; i < atoms.size(); ++i) layer.emplace_back(atoms[i], atom_names[i]);
  int deepest = 0;
  for (int k = 1; k <= limits.max_power; ++k) {
    if (k > 1) {
      std::vector<std::pair<Iso, std::string>> next;
      for (const auto& [g, name] : layer)
        for (std::size_t i = 0; i < atoms.size(); ++i) {
          Iso h = space.compose(g, atoms[i]);
          const bool seen = std::any_of(next.begin(), next.end(), [&](const auto& e) { return space.same(e.first, h); });
          if (!seen) next.emplace_back(std::move(h), name + " " + atom_names[i]);
          if (next.size() > limits.max_support)
            throw ConstructionError("support of power " + std::to_string(k) + " exceeds the enumeration limit; deepest power reached " + std::to_string(deepest));
        }
      layer = std::move(next);
    }
    deepest = k;
    const std::size_t first_new = lox.size();
    for (const auto& [g, name] : layer)
      if (auto e = space.fixed_ends(g)) lox.push_back({g, name, k, *e});

    // best separated pair with at least one member new at this power
    const Entry* bu = nullptr;
    const Entry* bv = nullptr;
    double best_sep = std::numeric_limits<double>::infinity();
    for (std::size_t j = first_new; j < lox.size(); ++j)
      for (std::size_t i = 0; i < j; ++i) {
        const auto& a = lox[i].ends;
        const auto& b = lox[j].ends;
        const double sep = std::max({space.end_product(a.first, b.first), space.end_product(a.first, b.second),
                                     space.end_product(a.second, b.first), space.end_product(a.second, b.second)});
        if (sep < limits.end_cap && sep < best_sep) {
          best_sep = sep;
          bu = &lox[i];
          bv = &lox[j];
        }
      }
    if (bu) {
      // u0 in supp mu^a and v0 in supp mu^b give u0^b, v0^a in supp mu^(ab)
      const int a = bu->power, b = bv->power;
      const Iso u = isometry_power(space, bu->g, b);
      const Iso v = isometry_power(space, bv->g, a);
      auto set = pingpong_construct(space, u, v, eta, D, limits, detail::power_text(bu->name, b),
                                    detail::power_text(bv->name, a));
      const long M = static_cast<long>(a) * b * set.construction.support_power;
      set.construction.support_power = M;
      return {M, std::move(set)};
    }
  }
  throw ConstructionError("no loxodromic pair with disjoint fixed points up to power " + std::to_string(deepest) +
                          "; deepest power reached " + std::to_string(deepest));
}

// Certificate serialization.
inline nlohmann::json backend_json(const FreeGroupSpace& space) {
  return {{"kind", "free"}, {"rank", space.rank()}};
}
template <class Real>
nlohmann::json backend_json(const HalfPlaneSpace<Real>& space) {
  return {{"kind", "halfplane"}, {"delta", space.delta()}};
}

template <SpaceModel Space>
nlohmann::json schottky_to_json(const Space& space, const SchottkySet<Space>& set) {
  nlohmann::json elements = nlohmann::json::array();
  for (std::size_t i = 0; i < set.size(); ++i)
    elements.push_back({{"value", space.format(set.elements[i])},
                        {"expression", i < set.expressions.size() ? set.expressions[i] : ""}});
  const auto& c = set.construction;
  return {{"type", "schottky-set"},
          {"backend", backend_json(space)},
          {"eta", set.eta},
          {"C", set.C},
          {"D", set.D},
          {"elements", elements},
          {"verification",
           {{"trials", set.trials},
            {"sampler", set.sampler},
            {"worst_bad_fraction", set.worst_bad_fraction},
            {"translation_min", set.translation_min}}},
          {"construction",
           {{"n", c.n}, {"m", c.m}, {"p", c.p}, {"K", c.K}, {"K_min", c.K_min}, {"support_power", c.support_power}}}};
}

template <SpaceModel Space>
SchottkySet<Space> schottky_from_json(const Space& space, const nlohmann::json& j) {
  try {
    if (j.at("type") != "schottky-set") throw InputError("not a Schottky certificate");
    if (j.at("backend").at("kind") != backend_json(space).at("kind"))
      throw InputError("certificate backend does not match the configured space");
    SchottkySet<Space> set;
    for (const auto& e : j.at("elements")) {
      set.elements.push_back(space.parse(e.at("value").get<std::string>()));
      set.expressions.push_back(e.value("expression", ""));
    }
    if (set.elements.empty()) throw InputError("certificate has no elements");
    set.eta = j.at("eta");
    set.C = j.at("C");
    set.D = j.at("D");
    const auto& v = j.at("verification");
    set.trials = v.at("trials");
    set.sampler = v.at("sampler");
    set.worst_bad_fraction = v.at("worst_bad_fraction");
    set.translation_min = v.at("translation_min");
    if (j.contains("construction")) {
      const auto& c = j["construction"];
      set.construction = PingPongInfo{c.at("n"), c.at("m"), c.at("p"), c.at("K"), c.at("K_min"), c.at("support_power")};
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed Schottky certificate: ") + e.what());
  }
}

}  // namespace pivotwalk

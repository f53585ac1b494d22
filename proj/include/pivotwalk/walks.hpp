#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pivotwalk/errors.hpp"
#include "pivotwalk/free_group.hpp"
#include "pivotwalk/geometry.hpp"
#include "pivotwalk/halfplane.hpp"
#include "pivotwalk/rng.hpp"
#include "pivotwalk/schottky.hpp"

namespace pivotwalk {

// ---------------------------------------------------------------------------
// Canonical atom keys.

inline Word canonical(const FreeGroupSpace&, const Word& g) { return g; }
inline std::string atom_key(const FreeGroupSpace& space, const Word& g) { return space.format(g); }

// Sign-normalized so that the first entry of non-negligible size is positive.
template <class Real>
Moebius<Real> canonical(const HalfPlaneSpace<Real>&, const Moebius<Real>& g) {
  using T = RealTraits<Real>;
  for (const Real* x : {&g.a, &g.b, &g.c, &g.d}) {
    const double v = T::to_double(*x);
    if (std::abs(v) <= 1e-12) continue;
    if (v > 0) return g;
    return Moebius<Real>{-g.a, -g.b, -g.c, -g.d};
  }
  return g;
}

// Ten significant digits, so products computed in different orders share a key.
template <class Real>
std::string atom_key(const HalfPlaneSpace<Real>& space, const Moebius<Real>& g) {
  const auto c = canonical(space, g);
  std::string key;
  char buf[32];
  for (const Real* x : {&c.a, &c.b, &c.c, &c.d}) {
    double v = RealTraits<Real>::to_double(*x);
    if (std::abs(v) <= 1e-11) v = 0.0;
    std::snprintf(buf, sizeof buf, "%.9e", v);
    if (!key.empty()) key += ',';
    key += buf;
  }
  return key;
}

// g <- g h, in place where the backend allows it.
template <SpaceModel Space>
void accumulate(const Space& space, typename Space::Isometry& g, const typename Space::Isometry& h) {
  g = space.compose(g, h);
}
inline void accumulate(const FreeGroupSpace&, Word& g, const Word& h) { g.multiply_right(h); }

// d(o, g o).
template <SpaceModel Space>
double displacement(const Space& space, const typename Space::Isometry& g) {
  return space.distance(space.basepoint(), space.orbit_point(g));
}
inline double displacement(const FreeGroupSpace&, const Word& g) { return static_cast<double>(g.size()); }

// ---------------------------------------------------------------------------
// Finitely supported probability measures on isometries.

struct Truncation {
  std::size_t max_atoms = 0;  // 0: keep everything
  double budget = 0.0;        // largest mass the truncation may drop
};

template <SpaceModel Space>
class DiscreteMeasure {
 public:
  using Isometry = typename Space::Isometry;
  struct Atom {
    Isometry g;
    double p = 0.0;
    std::string key;
  };

  DiscreteMeasure() = default;

  // Merges repeated atoms and drops zero weights; the weights must sum to 1.
  static DiscreteMeasure from_atoms(const Space& space, const std::vector<std::pair<Isometry, double>>& atoms,
                                    double tol = 1e-12) {
    std::map<std::string, Atom> merged;
    for (const auto& [g, p] : atoms) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("atom probabilities must be nonnegative");
      if (p == 0.0) continue;
      auto key = atom_key(space, g);
      auto [it, fresh] = merged.try_emplace(key, Atom{canonical(space, g), 0.0, key});
      it->second.p += p;
    }
    DiscreteMeasure m = from_map(std::move(merged));
    if (m.atoms_.empty()) throw InputError("measure has no atoms");
    if (std::abs(m.total() - 1.0) > tol) throw InputError("atom probabilities sum to " + std::to_string(m.total()));
    return m;
  }

  static DiscreteMeasure uniform(const Space& space, const std::vector<Isometry>& elements) {
    if (elements.empty()) throw InputError("uniform measure on an empty set");
    std::vector<std::pair<Isometry, double>> atoms;
    for (const auto& g : elements) atoms.emplace_back(g, 1.0 / static_cast<double>(elements.size()));
    return from_atoms(space, atoms);
  }

  static DiscreteMeasure dirac(const Space& space, const Isometry& g) { return from_atoms(space, {{g, 1.0}}); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double total() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.p;
    return s;
  }
  double mass(const std::string& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? 0.0 : atoms_[it->second].p;
  }
  std::ptrdiff_t find(const std::string& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  }
  // Mass removed by truncation anywhere upstream of this measure.
  double dropped_mass() const { return dropped_; }

  std::discrete_distribution<std::size_t> index_distribution() const {
    std::vector<double> w;
    w.reserve(atoms_.size());
    for (const auto& a : atoms_) w.push_back(a.p);
    return std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  std::vector<Isometry> support() const {
    std::vector<Isometry> s;
    for (const auto& a : atoms_) s.push_back(a.g);
    return s;
  }

  // Internal constructor for merged atom maps; probabilities are taken as given.
  static DiscreteMeasure from_map(std::map<std::string, Atom> merged, double dropped = 0.0) {
    DiscreteMeasure m;
    for (auto& [key, atom] : merged) {
      if (atom.p <= 0.0) continue;
      m.index_.emplace(key, m.atoms_.size());
      m.atoms_.push_back(std::move(atom));
    }
    m.dropped_ = dropped;
    return m;
  }

 private:
  std::vector<Atom> atoms_;  // sorted by key
  std::unordered_map<std::string, std::size_t> index_;
  double dropped_ = 0.0;
};

namespace detail {

template <SpaceModel Space>
DiscreteMeasure<Space> truncate(std::map<std::string, typename DiscreteMeasure<Space>::Atom> merged,
                                const Truncation& t, double upstream) {
  double dropped = 0.0;
  if (t.max_atoms > 0 && merged.size() > t.max_atoms) {
    std::vector<std::pair<double, std::string>> order;
    for (const auto& [k, a] : merged) order.emplace_back(a.p, k);
    // lightest first; ties broken by key so the result is reproducible
    std::sort(order.begin(), order.end());
    const std::size_t drop = merged.size() - t.max_atoms;
    for (std::size_t i = 0; i < drop; ++i) {
      dropped += order[i].first;
      merged.erase(order[i].second);
    }
    if (dropped > t.budget)
      throw TruncationError("truncation would drop mass " + std::to_string(dropped) + " above the budget " +
                                std::to_string(t.budget),
                            dropped);
    const double keep = 1.0 - dropped;
    for (auto& [k, a] : merged) a.p /= keep;
  }
  return DiscreteMeasure<Space>::from_map(std::move(merged), upstream + dropped);
}

}  // namespace detail

// Law of g h with g ~ m1 and h ~ m2 independent.
template <SpaceModel Space>
DiscreteMeasure<Space> convolve(const Space& space, const DiscreteMeasure<Space>& m1, const DiscreteMeasure<Space>& m2,
                                const Truncation& t = {}) {
  using Atom = typename DiscreteMeasure<Space>::Atom;
  if (m1.empty() || m2.empty()) throw InputError("convolution of an empty measure");
  std::map<std::string, Atom> merged;
  for (const auto& x : m1.atoms())
    for (const auto& y : m2.atoms()) {
      auto g = canonical(space, space.compose(x.g, y.g));
      auto key = atom_key(space, g);
      auto [it, fresh] = merged.try_emplace(key, Atom{std::move(g), 0.0, key});
      it->second.p += x.p * y.p;
    }
  return detail::truncate<Space>(std::move(merged), t, m1.dropped_mass() + m2.dropped_mass());
}

// m^n, multiplied left to right; m^0 is the Dirac mass at the identity.
template <SpaceModel Space>
DiscreteMeasure<Space> convolution_power(const Space& space, const DiscreteMeasure<Space>& m, long n,
                                         const Truncation& t = {}) {
  if (n < 0) throw InputError("negative convolution power");
  auto out = DiscreteMeasure<Space>::dirac(space, space.identity());
  for (long k = 0; k < n; ++k) out = convolve(space, out, m, t);
  return out;
}

// ---------------------------------------------------------------------------
// Schottky decompositions mu^N = alpha part + (1 - alpha) nu.

enum class DecompFlavor { simple, refined, gapped };

inline const char* to_string(DecompFlavor f) {
  switch (f) {
    case DecompFlavor::simple: return "simple";
    case DecompFlavor::refined: return "refined";
    case DecompFlavor::gapped: return "gapped";
  }
  return "?";
}

inline DecompFlavor parse_decomp_flavor(const std::string& s) {
  if (s == "simple") return DecompFlavor::simple;
  if (s == "refined") return DecompFlavor::refined;
  if (s == "gapped") return DecompFlavor::gapped;
  throw InputError("unknown decomposition flavor: " + s);
}

// One way of writing a Schottky-part atom: a b (simple, gapped) or a b g c d
// (refined), where a, b, c, d index the Schottky set and g indexes the atoms of mu.
struct Factorization {
  std::array<std::size_t, 5> idx{};
  double weight = 0.0;
};

template <SpaceModel Space>
struct DecompositionPlan {
  DecompFlavor flavor = DecompFlavor::simple;
  long N = 1;
  long A = 0;
  double alpha = 0.0;
  double alpha_max = 0.0;
  double residual = 0.0;  // max atomwise |mu^N - alpha part - (1 - alpha) nu|
  SchottkySet<Space> schottky;
  DiscreteMeasure<Space> mu;
  DiscreteMeasure<Space> mu_N;
  DiscreteMeasure<Space> part;
  DiscreteMeasure<Space> nu;  // empty when alpha = 1
  std::unordered_map<std::string, std::vector<Factorization>> factorizations;
};

namespace detail {

template <SpaceModel Space>
std::pair<DiscreteMeasure<Space>, std::unordered_map<std::string, std::vector<Factorization>>> schottky_part(
    const Space& space, const DiscreteMeasure<Space>& mu, const SchottkySet<Space>& S, bool refined) {
  using Atom = typename DiscreteMeasure<Space>::Atom;
  std::map<std::string, Atom> merged;
  std::unordered_map<std::string, std::vector<Factorization>> fact;
  const std::size_t k = S.size();
  if (k == 0) throw InputError("empty Schottky set");
  auto add = [&](typename Space::Isometry g, const Factorization& f) {
    g = canonical(space, g);
    auto key = atom_key(space, g);
    auto [it, fresh] = merged.try_emplace(key, Atom{std::move(g), 0.0, key});
    it->second.p += f.weight;
    fact[key].push_back(f);
  };
  const double ks = static_cast<double>(k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      const auto ab = space.compose(S.elements[a], S.elements[b]);
      if (!refined) {
        add(ab, {{a, b, 0, 0, 0}, 1.0 / (ks * ks)});
        continue;
      }
      for (std::size_t g = 0; g < mu.size(); ++g) {
        const auto abg = space.compose(ab, mu.atoms()[g].g);
        for (std::size_t c = 0; c < k; ++c) {
          const auto abgc = space.compose(abg, S.elements[c]);
          for (std::size_t d = 0; d < k; ++d)
            add(space.compose(abgc, S.elements[d]), {{a, b, g, c, d}, mu.atoms()[g].p / (ks * ks * ks * ks)});
        }
      }
    }
  return {DiscreteMeasure<Space>::from_map(std::move(merged)), std::move(fact)};
}

}  // namespace detail

// min over Schottky-part atoms of mu^N(x) / part(x); zero when part leaves supp mu^N.
template <SpaceModel Space>
double alpha_max(const DiscreteMeasure<Space>& mu_N, const DiscreteMeasure<Space>& part) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : part.atoms()) best = std::min(best, mu_N.mass(a.key) / a.p);
  return std::min(best, 1.0);
}

template <SpaceModel Space>
DecompositionPlan<Space> decompose(const Space& space, const DiscreteMeasure<Space>& mu, long N,
                                   const SchottkySet<Space>& S, double alpha, DecompFlavor flavor, long A = 0,
                                   const Truncation& t = {}) {
  if (N < 1) throw InputError("decomposition needs N >= 1");
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  if (flavor == DecompFlavor::gapped && A < 1) throw InputError("gapped decomposition needs A >= 1");
  if (flavor != DecompFlavor::gapped && A != 0) throw InputError("the gap A only applies to the gapped flavor");

  DecompositionPlan<Space> plan;
  plan.flavor = flavor;
  plan.N = N;
  plan.A = A;
  plan.alpha = alpha;
  plan.schottky = S;
  plan.mu = mu;
  plan.mu_N = convolution_power(space, mu, N, t);
  auto [part, fact] = detail::schottky_part(space, mu, S, flavor == DecompFlavor::refined);
  plan.part = std::move(part);
  plan.factorizations = std::move(fact);
  plan.alpha_max = alpha_max(plan.mu_N, plan.part);
  // alpha_max <= 1, so this also rejects alpha > 1
  if (alpha > plan.alpha_max * (1 + 1e-12))
    throw InfeasibleError("alpha " + std::to_string(alpha) + " exceeds alpha_max " + std::to_string(plan.alpha_max),
                          plan.alpha_max);

  using Atom = typename DiscreteMeasure<Space>::Atom;
  std::map<std::string, Atom> nu;
  for (const auto& x : plan.mu_N.atoms()) {
    const double rest = x.p - alpha * plan.part.mass(x.key);
    if (rest < -1e-12) throw InfeasibleError("negative atom in nu at " + x.key, plan.alpha_max);
    if (alpha < 1.0 && rest > 1e-15) nu.emplace(x.key, Atom{x.g, rest / (1 - alpha), x.key});
  }
  plan.nu = DiscreteMeasure<Space>::from_map(std::move(nu));

  // re-check the identity atomwise instead of trusting the arithmetic above
  for (const auto& x : plan.mu_N.atoms())
    plan.residual = std::max(plan.residual, std::abs(x.p - alpha * plan.part.mass(x.key) -
                                                     (1 - alpha) * plan.nu.mass(x.key)));
  for (const auto& x : plan.nu.atoms())
    if (plan.mu_N.find(x.key) < 0) plan.residual = std::max(plan.residual, x.p);
  if (plan.residual > 1e-10)
    throw InvariantViolation("decomposition identity fails atomwise by " + std::to_string(plan.residual));
  return plan;
}

struct ElementarityProbe {
  bool found = false;
  int power = 0;
  std::string detail;
};

// Heuristic only: looks for two loxodromics with disjoint fixed points among
// products of at most max_power support elements.
template <SpaceModel Space>
ElementarityProbe probe_nonelementary(const Space& space, const DiscreteMeasure<Space>& m, int max_power = 3,
                                      std::size_t max_layer = 4000) {
  using Iso = typename Space::Isometry;
  ElementarityProbe out;
  std::vector<std::pair<Iso, std::string>> layer;
  for (const auto& a : m.atoms()) layer.emplace_back(a.g, a.key);
  std::vector<std::pair<typename Space::End, typename Space::End>> ends;
  std::vector<std::string> names;
  for (int k = 1; k <= max_power && !layer.empty(); ++k) {
    if (k > 1) {
      std::map<std::string, std::pair<Iso, std::string>> next;
      for (const auto& [g, name] : layer)
        for (const auto& a : m.atoms()) {
          auto h = canonical(space, space.compose(g, a.g));
          next.try_emplace(atom_key(space, h), h, name + " * " + a.key);
          if (next.size() >= max_layer) break;
        }
      layer.clear();
      for (auto& [k2, v] : next) layer.push_back(std::move(v));
    }
    for (const auto& [g, name] : layer) {
      auto e = space.fixed_ends(g);
      if (!e) continue;
      for (std::size_t i = 0; i < ends.size(); ++i) {
        const double sep = std::max({space.end_product(ends[i].first, e->first),
                                     space.end_product(ends[i].first, e->second),
                                     space.end_product(ends[i].second, e->first),
                                     space.end_product(ends[i].second, e->second)});
        if (std::isfinite(sep) && sep < 1e6) {
          out.found = true;
          out.power = k;
          out.detail = names[i] + " and " + name;
          return out;
        }
      }
      ends.push_back(*e);
      names.push_back(name);
    }
  }
  out.detail = "no independent loxodromic pair up to power " + std::to_string(max_power);
  return out;
}

// ---------------------------------------------------------------------------
// Scheduled reconstruction of the walk.

enum class BlockRole : std::uint8_t {
  nu,        // epsilon = 0 outside a gap: drawn from nu
  schottky,  // t_j of the simple and refined flavors, or t_j of the gapped flavor
  gap,       // [t_j + 1, t_j + A] of the gapped flavor: a plain mu^N block
  wait,      // after the gap, epsilon = 0: drawn from nu
  close,     // t'_j of the gapped flavor
};

inline char role_char(BlockRole r) {
  switch (r) {
    case BlockRole::nu: return 'n';
    case BlockRole::schottky: return 's';
    case BlockRole::gap: return 'g';
    case BlockRole::wait: return 'w';
    case BlockRole::close: return 'c';
  }
  return '?';
}

struct ScheduledTrajectory {
  DecompFlavor flavor = DecompFlavor::simple;
  long N = 1;
  long A = 0;
  long horizon = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> eps;  // per block; unused inside gaps
  std::vector<BlockRole> roles;
  std::vector<long> t;        // Schottky blocks t_1 < t_2 < ...
  std::vector<long> t_close;  // t'_j, gapped flavor only
  std::vector<Factorization> open_draw;   // factorization of gamma_{t_j}
  std::vector<Factorization> close_draw;  // factorization of gamma_{t'_j}
  std::vector<std::uint32_t> steps;       // index into mu's atoms of each g_k
  std::vector<double> distance;           // d(o, Z_k o) for k = 0..horizon

  // Block where the j-th Schottky segment ends (1-based j).
  long segment_end(std::size_t j) const { return flavor == DecompFlavor::gapped ? t_close[j - 1] : t[j - 1]; }
  std::size_t segments() const { return flavor == DecompFlavor::gapped ? t_close.size() : t.size(); }

  // Last j with N (end_j + 1) <= n; 0 when there is none.
  long tau(long n) const {
    long j = 0;
    while (static_cast<std::size_t>(j) < segments() && N * (segment_end(j + 1) + 1) <= n) ++j;
    return j;
  }
};

// P(epsilon = 1 | gamma) for a block with product key `key`.
template <SpaceModel Space>
double epsilon_probability(const DecompositionPlan<Space>& plan, const std::string& key) {
  const double pN = plan.mu_N.mass(key);
  if (pN <= 0.0) throw InvariantViolation("block product outside the support of mu^N: " + key);
  return std::min(1.0, plan.alpha * plan.part.mass(key) / pN);
}

namespace detail {

inline const Factorization& pick_factorization(const std::vector<Factorization>& fs, std::mt19937_64& rng) {
  double total = 0.0;
  for (const auto& f : fs) total += f.weight;
  double u = uniform01(rng) * total;
  for (const auto& f : fs) {
    if (u < f.weight) return f;
    u -= f.weight;
  }
  return fs.back();
}

}  // namespace detail

// Draws the blocks gamma_i = g_{iN} ... g_{iN+N-1} step by step (g_k ~ mu) and
// then epsilon_i with P(epsilon_i = 1 | gamma_i) = alpha part(gamma_i) / mu^N(gamma_i).
// Marginally epsilon_i ~ Bernoulli(alpha), gamma_i | epsilon_i = 1 ~ part and
// gamma_i | epsilon_i = 0 ~ nu, while the g_k stay i.i.d. with law mu.
template <SpaceModel Space>
ScheduledTrajectory schedule(const Space& space, const DecompositionPlan<Space>& plan, std::uint64_t seed,
                             long horizon) {
  if (horizon < 0) throw InputError("negative horizon");
  ScheduledTrajectory tr;
  tr.flavor = plan.flavor;
  tr.N = plan.N;
  tr.A = plan.A;
  tr.horizon = horizon;
  tr.seed = seed;
  const long N = plan.N;
  const long blocks = (horizon + N - 1) / N;
  auto step_dist = plan.mu.index_distribution();

  enum class Phase { free, gap, waiting } phase = Phase::free;
  long gap_left = 0;
  auto position = space.identity();
  tr.distance.push_back(0.0);

  for (long i = 0; i < blocks; ++i) {
    auto rng = stream_rng(seed, static_cast<std::uint64_t>(i), Stream::block);
    auto gamma = space.identity();
    for (long k = 0; k < N; ++k) {
      const auto idx = step_dist(rng);
      tr.steps.push_back(static_cast<std::uint32_t>(idx));
      const auto& g = plan.mu.atoms()[idx].g;
      accumulate(space, gamma, g);
      if (static_cast<long>(tr.steps.size()) <= horizon) {
        accumulate(space, position, g);
        tr.distance.push_back(displacement(space, position));
      }
    }
    const auto key = atom_key(space, gamma);
    const bool eps = uniform01(rng) < epsilon_probability(plan, key);
    tr.eps.push_back(eps ? 1 : 0);

    const Factorization* f = nullptr;
    if (eps) {
      auto it = plan.factorizations.find(key);
      if (it == plan.factorizations.end()) throw InvariantViolation("Schottky block without a factorization");
      f = &detail::pick_factorization(it->second, rng);
    }

    if (plan.flavor != DecompFlavor::gapped) {
      tr.roles.push_back(eps ? BlockRole::schottky : BlockRole::nu);
      if (eps) {
        tr.t.push_back(i);
        tr.open_draw.push_back(*f);
      }
      continue;
    }
    switch (phase) {
      case Phase::free:
        tr.roles.push_back(eps ? BlockRole::schottky : BlockRole::nu);
        if (eps) {
          tr.t.push_back(i);
          tr.open_draw.push_back(*f);
          phase = Phase::gap;
          gap_left = plan.A;
        }
        break;
      case Phase::gap:
        tr.roles.push_back(BlockRole::gap);
        if (--gap_left == 0) phase = Phase::waiting;
        break;
      case Phase::waiting:
        tr.roles.push_back(eps ? BlockRole::close : BlockRole::wait);
        if (eps) {
          tr.t_close.push_back(i);
          tr.close_draw.push_back(*f);
          phase = Phase::free;
        }
        break;
    }
  }
  return tr;
}

// Product of g_k over k in [from, to).
template <SpaceModel Space>
typename Space::Isometry step_product(const Space& space, const DecompositionPlan<Space>& plan,
                                      const ScheduledTrajectory& tr, long from, long to) {
  auto g = space.identity();
  for (long k = from; k < to; ++k) accumulate(space, g, plan.mu.atoms()[tr.steps[static_cast<std::size_t>(k)]].g);
  return g;
}

template <class Iso>
struct EngineStepInput {
  Iso a, b, r, c, d, w;
};

// Z_n o = w_0 s'_1 w_1 ... s'_tau w'(n) o, split into engine transitions.
template <class Iso>
struct EngineInput {
  Iso w0;
  std::vector<EngineStepInput<Iso>> steps;
};

template <SpaceModel Space>
EngineInput<typename Space::Isometry> engine_input(const Space& space, const DecompositionPlan<Space>& plan,
                                                   const ScheduledTrajectory& tr, long n) {
  if (n > tr.horizon) throw InputError("engine input beyond the scheduled horizon");
  using Iso = typename Space::Isometry;
  const auto& S = plan.schottky.elements;
  const long N = tr.N;
  const long tau = tr.tau(n);
  EngineInput<Iso> in;
  // segment boundaries in steps: w_j spans [N (end_j + 1), N t_{j+1}), with end_0 = -1
  auto gap_from = [&](long j) { return j == 0 ? 0L : N * (tr.segment_end(static_cast<std::size_t>(j)) + 1); };
  auto next_start = [&](long j) { return j < tau ? N * tr.t[static_cast<std::size_t>(j)] : n; };
  in.w0 = step_product(space, plan, tr, 0, next_start(0));
  for (long j = 1; j <= tau; ++j) {
    const auto& f = tr.open_draw[static_cast<std::size_t>(j - 1)];
    EngineStepInput<Iso> s{S[f.idx[0]], S[f.idx[1]], space.identity(), space.identity(), space.identity(),
                           step_product(space, plan, tr, gap_from(j), next_start(j))};
    if (tr.flavor == DecompFlavor::refined) {
      s.r = plan.mu.atoms()[f.idx[2]].g;
      s.c = S[f.idx[3]];
      s.d = S[f.idx[4]];
    } else if (tr.flavor == DecompFlavor::gapped) {
      const auto& fc = tr.close_draw[static_cast<std::size_t>(j - 1)];
      const long t0 = tr.t[static_cast<std::size_t>(j - 1)];
      const long t1 = tr.t_close[static_cast<std::size_t>(j - 1)];
      s.r = step_product(space, plan, tr, N * (t0 + 1), N * t1);
      s.c = S[fc.idx[0]];
      s.d = S[fc.idx[1]];
    }
    in.steps.push_back(std::move(s));
  }
  return in;
}

// rho_j = mu^{NA} * nu^{wait}, sampled by composing draws; wait = t'_j - t_j - A - 1.
template <SpaceModel Space>
typename Space::Isometry rho_sample(const Space& space, const DecompositionPlan<Space>& plan, long wait,
                                    std::uint64_t seed, std::uint64_t index) {
  if (plan.flavor != DecompFlavor::gapped) throw InputError("rho draws need a gapped plan");
  if (wait < 0) throw InputError("negative wait time");
  if (wait > 0 && plan.nu.empty()) throw InputError("nu is empty at alpha = 1");
  auto rng = stream_rng(seed, index, Stream::rho);
  auto mu_d = plan.mu.index_distribution();
  auto g = space.identity();
  for (long k = 0; k < plan.N * plan.A; ++k) accumulate(space, g, plan.mu.atoms()[mu_d(rng)].g);
  if (wait > 0) {
    auto nu_d = plan.nu.index_distribution();
    for (long k = 0; k < wait; ++k) accumulate(space, g, plan.nu.atoms()[nu_d(rng)].g);
  }
  return g;
}

// k,distance,block,epsilon,role
void write_trajectory_csv(std::ostream& os, const ScheduledTrajectory& tr);

// ---------------------------------------------------------------------------
// Text forms.

// "g:p;g:p;...", where g uses the backend's element syntax. The tree backend
// also accepts "generators" and "lazy" or "lazy:h" (hold with probability h,
// otherwise a uniform generator).
template <SpaceModel Space>
DiscreteMeasure<Space> parse_measure(const Space& space, const std::string& text) {
  using Iso = typename Space::Isometry;
  if constexpr (std::is_same_v<Space, FreeGroupSpace>) {
    if (text == "generators" || text.rfind("lazy", 0) == 0) {
      double hold = 0.0;
      if (text == "lazy") hold = 0.5;
      else if (text.rfind("lazy:", 0) == 0) {
        try {
          hold = std::stod(text.substr(5));
        } catch (const std::exception&) {
          throw InputError("bad holding probability in " + text);
        }
      } else if (text != "generators") throw InputError("unknown measure: " + text);
      if (!(hold >= 0.0 && hold < 1.0)) throw InputError("holding probability must lie in [0, 1)");
      std::vector<std::pair<Iso, double>> atoms;
      if (hold > 0) atoms.emplace_back(Word{}, hold);
      const auto letters = space.alphabet();
      for (Letter l : letters) atoms.emplace_back(Word::letter(l), (1 - hold) / static_cast<double>(letters.size()));
      return DiscreteMeasure<Space>::from_atoms(space, atoms);
    }
  }
  std::vector<std::pair<Iso, double>> atoms;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(';', start), text.size());
    const std::string item = text.substr(start, end - start);
    start = end + 1;
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const auto colon = item.rfind(':');
    if (colon == std::string::npos) throw InputError("measure atom needs 'element:probability': " + item);
    double p;
    try {
      p = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw InputError("bad probability in " + item);
    }
    atoms.emplace_back(space.parse(item.substr(0, colon)), p);
  }
  return DiscreteMeasure<Space>::from_atoms(space, atoms, 1e-9);
}

template <SpaceModel Space>
nlohmann::json measure_to_json(const Space& space, const DiscreteMeasure<Space>& m) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : m.atoms()) atoms.push_back({{"g", space.format(a.g)}, {"p", a.p}});
  return {{"backend", backend_json(space)}, {"atoms", atoms}, {"dropped_mass", m.dropped_mass()}};
}

template <SpaceModel Space>
DiscreteMeasure<Space> measure_from_json(const Space& space, const nlohmann::json& j) {
  try {
    if (j.at("backend") != backend_json(space)) throw InputError("measure belongs to another backend");
    std::vector<std::pair<typename Space::Isometry, double>> atoms;
    for (const auto& a : j.at("atoms")) atoms.emplace_back(space.parse(a.at("g").get<std::string>()), a.at("p").get<double>());
    return DiscreteMeasure<Space>::from_atoms(space, atoms, 1e-9);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed measure: ") + e.what());
  }
}

template <SpaceModel Space>
nlohmann::json plan_to_json(const Space& space, const DecompositionPlan<Space>& plan) {
  return {{"flavor", to_string(plan.flavor)},
          {"N", plan.N},
          {"A", plan.A},
          {"alpha", plan.alpha},
          {"alpha_max", plan.alpha_max},
          {"residual", plan.residual},
          {"mu", measure_to_json(space, plan.mu)},
          {"nu_atoms", plan.nu.size()},
          {"schottky", schottky_to_json(space, plan.schottky)}};
}

// Rebuilds the plan from mu and the certificate, re-verifying the identity.
template <SpaceModel Space>
DecompositionPlan<Space> plan_from_json(const Space& space, const nlohmann::json& j) {
  try {
    return decompose(space, measure_from_json(space, j.at("mu")), j.at("N").get<long>(),
                     schottky_from_json(space, j.at("schottky")), j.at("alpha").get<double>(),
                     parse_decomp_flavor(j.at("flavor").get<std::string>()), j.at("A").get<long>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed plan: ") + e.what());
  }
}

// Support search on the atoms of a measure, named by their keys.
template <SpaceModel Space>
std::pair<long, SchottkySet<Space>> find_schottky_in_support(const Space& space, const DiscreteMeasure<Space>& mu,
                                                             double eta, double D, const SchottkyLimits& limits = {}) {
  std::vector<std::string> names;
  for (const auto& a : mu.atoms()) names.push_back(space.format(a.g));
  return find_schottky_in_support(space, mu.support(), names, eta, D, limits);
}

}  // namespace pivotwalk

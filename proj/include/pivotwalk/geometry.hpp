#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pivotwalk/errors.hpp"
#include "pivotwalk/free_group.hpp"

namespace pivotwalk {

inline constexpr double kDefaultEps = 1e-9;

template <class S>
concept SpaceModel = requires(const S& s, const typename S::Point& p, const typename S::Isometry& g) {
  { s.basepoint() } -> std::convertible_to<typename S::Point>;
  { s.delta() } -> std::convertible_to<double>;
  { s.distance(p, p) } -> std::convertible_to<double>;
  { s.gromov_product(p, p, p) } -> std::convertible_to<double>;
  { s.act(g, p) } -> std::convertible_to<typename S::Point>;
  { s.compose(g, g) } -> std::convertible_to<typename S::Isometry>;
  { s.inverse(g) } -> std::convertible_to<typename S::Isometry>;
  { s.identity() } -> std::convertible_to<typename S::Isometry>;
  { s.orbit_point(g) } -> std::convertible_to<typename S::Point>;
};

// Points of different backends have different types, so mixing them is a compile error.
template <SpaceModel Space>
double gromov_product(const Space& space, const typename Space::Point& x, const typename Space::Point& z,
                      const typename Space::Point& base) {
  return space.gromov_product(x, z, base);
}

// True iff every consecutive triple has middle-based product <= C + eps.
// Sequences shorter than three points are vacuously aligned.
template <SpaceModel Space>
bool check_alignment(const Space& space, std::span<const typename Space::Point> points, double C,
                     double eps = kDefaultEps) {
  for (std::size_t i = 1; i + 1 < points.size(); ++i)
    if (space.gromov_product(points[i - 1], points[i + 1], points[i]) > C + eps) return false;
  return true;
}

struct AlignParams {
  double C = 0.0;
  double D = 0.0;
  double delta = 0.0;
};

template <class P>
struct Chain {
  std::vector<P> points;
  AlignParams params;
};

struct ChainReport {
  bool ok = true;
  bool degenerate = false;
  double worst_product = 0.0;  // max interior product, 0 when there is none
  double worst_gap = std::numeric_limits<double>::infinity();  // min consecutive distance
  std::size_t worst_product_at = 0;
  std::size_t worst_gap_at = 0;
};

template <SpaceModel Space>
ChainReport validate_chain(const Space& space, const Chain<typename Space::Point>& chain, double eps = kDefaultEps) {
  ChainReport r;
  const auto& pts = chain.points;
  if (pts.size() <= 1) return r;
  const auto& prm = chain.params;
  if (prm.C < 0 || prm.D < 0 || prm.delta < 0) throw InputError("chain parameters must be nonnegative");
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double gap = space.distance(pts[i], pts[i + 1]);
    if (gap < r.worst_gap) {
      r.worst_gap = gap;
      r.worst_gap_at = i;
    }
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double prod = space.gromov_product(pts[i - 1], pts[i + 1], pts[i]);
    if (prod > r.worst_product) {
      r.worst_product = prod;
      r.worst_product_at = i;
    }
  }
  r.degenerate = prm.D <= 0.0 || r.worst_gap <= eps;
  r.ok = !r.degenerate && r.worst_product <= prm.C + eps && r.worst_gap >= prm.D - eps;
  return r;
}

// Lower bound for d(x_0, x_n) along a chain with D >= 2C + 2 delta + 1.
template <SpaceModel Space>
double chain_distance_bound(const Space& space, const Chain<typename Space::Point>& chain,
                            double eps = kDefaultEps) {
  const auto& prm = chain.params;
  if (prm.D < 2 * prm.C + 2 * prm.delta + 1 - eps)
    throw ContractError("chain_distance_bound needs D >= 2C + 2delta + 1");
  const auto report = validate_chain(space, chain, eps);
  if (!report.ok) throw ContractError("chain_distance_bound needs a valid chain");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < chain.points.size(); ++i)
    sum += space.distance(chain.points[i], chain.points[i + 1]) - (2 * prm.C + 2 * prm.delta);
  return sum;
}

struct InteriorViolation {
  std::size_t index;
  double product;
};

struct InteriorReport {
  bool precondition_met = true;  // D >= 2C + 4 delta + 1
  double bound = 0.0;            // C + 2 delta
  std::vector<InteriorViolation> violations;
};

// (x_0, x_n)_{x_i} <= C + 2 delta for each interior i.
template <SpaceModel Space>
InteriorReport interior_product_check(const Space& space, const Chain<typename Space::Point>& chain,
                                      double eps = kDefaultEps) {
  const auto& prm = chain.params;
  const auto& pts = chain.points;
  InteriorReport r;
  r.precondition_met = prm.D >= 2 * prm.C + 4 * prm.delta + 1 - eps;
  r.bound = prm.C + 2 * prm.delta;
  if (pts.size() < 3) return r;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double prod = space.gromov_product(pts.front(), pts.back(), pts[i]);
    if (prod > r.bound + eps) r.violations.push_back({i, prod});
  }
  return r;
}

template <class P>
struct ShadowSpec {
  P origin;
  P anchor;
  double C = 0.0;
};

// y is in the shadow iff (y, origin)_anchor <= C.
template <SpaceModel Space>
bool shadow_contains(const Space& space, const ShadowSpec<typename Space::Point>& spec,
                     const typename Space::Point& y, double eps = kDefaultEps) {
  const double prod = space.gromov_product(y, spec.origin, spec.anchor);
  if (prod > spec.C + eps) return false;
  const double dy = space.distance(y, spec.origin);
  const double dx = space.distance(spec.anchor, spec.origin);
  if (dy < dx - 2 * spec.C - 2 * eps)
    throw InvariantViolation("shadow member closer to origin than d(anchor, origin) - 2C");
  return true;
}

// Witness that the chain tip lies in the chain-shadow CS_base(direction; C).
template <class P>
struct ChainShadowCertificate {
  P base;
  P direction;
  double C = 0.0;
  Chain<P> witness;  // params (C, 2C + 2 delta + 1), first point == base

  const P& tip() const { return witness.points.back(); }
};

template <SpaceModel Space>
AlignParams certificate_params(const Space& space, double C) {
  return {C, 2 * C + 2 * space.delta() + 1, space.delta()};
}

// The one-jump certificate [base, endpoint]; the caller vouches for its validity.
template <SpaceModel Space>
ChainShadowCertificate<typename Space::Point> two_point_certificate(const Space& space,
                                                                    const typename Space::Point& base,
                                                                    const typename Space::Point& direction,
                                                                    const typename Space::Point& endpoint, double C) {
  ChainShadowCertificate<typename Space::Point> cert{base, direction, C, {{base, endpoint}, certificate_params(space, C)}};
  return cert;
}

struct CertificateReport {
  bool ok = true;
  ChainReport chain;
  double first_jump_product = 0.0;      // (x_0, x_1)_{direction}
  double shadow_product = 0.0;          // (base, tip)_{direction}
  double shadow_distance_slack = 0.0;   // d(base, tip) - (d(base, direction) - 2C - delta)
  std::string reason;
};

// Chain validity, first-jump alignment, and the half-space bounds
// (y, tip)_{y+} <= 2C + delta, d(y, tip) >= d(y, y+) - 2C - delta.
template <SpaceModel Space>
CertificateReport validate_certificate(const Space& space, const ChainShadowCertificate<typename Space::Point>& cert,
                                       double eps = kDefaultEps) {
  CertificateReport r;
  const double delta = space.delta();
  const auto& pts = cert.witness.points;
  auto fail = [&](std::string why) {
    if (r.ok) r.reason = std::move(why);
    r.ok = false;
  };
  if (pts.empty()) {
    fail("empty witness");
    return r;
  }
  const auto expect = certificate_params(space, cert.C);
  if (std::abs(cert.witness.params.C - expect.C) > eps || std::abs(cert.witness.params.D - expect.D) > eps)
    fail("witness parameters differ from (C, 2C + 2delta + 1)");
  if (space.distance(pts.front(), cert.base) > eps) fail("witness does not start at the base");
  if (pts.size() >= 2) {
    r.chain = validate_chain(space, cert.witness, eps);
    if (!r.chain.ok) fail("witness is not a chain");
    r.first_jump_product = space.gromov_product(pts[0], pts[1], cert.direction);
    if (r.first_jump_product > cert.C + eps) fail("first jump not aligned with the direction");
  }
  r.shadow_product = space.gromov_product(cert.base, cert.tip(), cert.direction);
  if (pts.size() >= 2 && r.shadow_product > 2 * cert.C + delta + eps) fail("tip outside the half-space bound");
  r.shadow_distance_slack = space.distance(cert.base, cert.tip()) -
                            (space.distance(cert.base, cert.direction) - 2 * cert.C - delta);
  if (pts.size() >= 2 && r.shadow_distance_slack < -eps) fail("tip too close to the base");
  return r;
}

// Extends the witness by `candidate` when (x_{i-1}, mid)_tip <= C0 and
// (tip, candidate)_mid <= C0, the four-point step giving a (C0 + delta)-chain.
// Mutates cert only on success.
template <SpaceModel Space>
bool try_extend(const Space& space, ChainShadowCertificate<typename Space::Point>& cert,
                const typename Space::Point& candidate, const typename Space::Point& pivot_mid, double C0,
                double eps = kDefaultEps) {
  auto& pts = cert.witness.points;
  const double delta = space.delta();
  const double need_gap = 2 * cert.C + 2 * delta + 1;
  if (pts.size() == 1) {
    if (space.gromov_product(pts[0], candidate, cert.direction) > cert.C + eps) return false;
    if (space.distance(pts[0], candidate) < need_gap - eps) return false;
    pts.push_back(candidate);
    return true;
  }
  const auto& tip = pts.back();
  const auto& prev = pts[pts.size() - 2];
  if (space.gromov_product(prev, pivot_mid, tip) > C0 + eps) return false;
  if (space.gromov_product(tip, candidate, pivot_mid) > C0 + eps) return false;
  // the four-point step needs a long jump from tip to mid
  if (space.distance(tip, pivot_mid) < 2 * C0 + 2 * delta + 1 - eps) return false;
  const double new_product = space.gromov_product(prev, candidate, tip);
  const double new_gap = space.distance(tip, candidate);
  if (new_product > C0 + delta + eps)
    throw InvariantViolation("four-point step failed; the configured delta is too small for this space");
  if (new_product > cert.C + eps || new_gap < need_gap - eps) return false;
  pts.push_back(candidate);
  return true;
}

template <SpaceModel Space>
std::optional<ChainShadowCertificate<typename Space::Point>> witness_extend(
    const Space& space, const ChainShadowCertificate<typename Space::Point>& cert,
    const typename Space::Point& candidate, const typename Space::Point& pivot_mid, double C0,
    double eps = kDefaultEps) {
  auto copy = cert;
  if (!try_extend(space, copy, candidate, pivot_mid, C0, eps)) return std::nullopt;
  return copy;
}

// min over the tail of (x, z)_base: a computable stand-in for (x, xi)_base.
template <SpaceModel Space>
double boundary_product_proxy(const Space& space, const typename Space::Point& x,
                              std::span<const typename Space::Point> tail, const typename Space::Point& base) {
  if (tail.empty()) throw InputError("boundary_product_proxy needs a nonempty tail");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& z : tail) best = std::min(best, space.gromov_product(x, z, base));
  return best;
}

// Tree-only sufficient test for z in CS_y(y+; C): the two-point chain [y, z] works.
inline bool tree_two_point_shadow_test(const Word& y, const Word& y_plus, const Word& z, double C) {
  const double prod = (static_cast<double>(tree_dist(y, y_plus) + tree_dist(y_plus, z) - tree_dist(y, z))) / 2.0;
  return prod <= C && static_cast<double>(tree_dist(y, z)) >= 2 * C + 1;
}

}  // namespace pivotwalk

#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <vector>
#include <optional>
#include <string>
#include <utility>

#include "pivotwalk/errors.hpp"

namespace pivotwalk {

// Numeric hooks for a scalar type used by the half-plane backend.
template <class Real>
struct RealTraits;

template <>
struct RealTraits<double> {
  static constexpr double denominator_floor = 1e-12;
  static constexpr double log_denominator_floor = -27.631021115928547;  // log(1e-12)
  // No working-precision guard; callers keep double runs near the basepoint.
  static constexpr bool bounded = false;
  static constexpr double capacity = std::numeric_limits<double>::infinity();
  static double to_double(double x) { return x; }
  static double from_double(double x) { return x; }
  // log(x) for x > 0 without overflow.
  static double log(double x) { return std::log(x); }
  static std::string to_text(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
  }
  static double from_text(const std::string& s) { return std::stod(s); }
};

template <class Real>
struct UpperHalfPoint {
  Real x{0};
  Real y{1};
};

// Determinant-one real matrix acting by z -> (az+b)/(cz+d).
template <class Real>
struct Moebius {
  Real a{1}, b{0}, c{0}, d{1};
};

enum class IsometryKind { elliptic, parabolic, loxodromic };

inline const char* to_string(IsometryKind k) {
  switch (k) {
    case IsometryKind::elliptic: return "elliptic";
    case IsometryKind::parabolic: return "parabolic";
    case IsometryKind::loxodromic: return "loxodromic";
  }
  return "?";
}

// Point of the real line or the point at infinity.
template <class Real>
struct BoundaryPoint {
  bool at_infinity = false;
  Real t{0};

  static BoundaryPoint infinity() { return {true, Real(0)}; }
  static BoundaryPoint finite(Real value) { return {false, std::move(value)}; }
};

template <class Real>
struct FixedPoints {
  BoundaryPoint<Real> attracting;
  BoundaryPoint<Real> repelling;
};

template <class Real>
Moebius<Real> make_moebius(Real a, Real b, Real c, Real d, double tol = 1e-9) {
  using std::abs;
  const Real det = a * d - b * c;
  const double dd = RealTraits<Real>::to_double(det);
  if (!std::isfinite(dd) || std::abs(dd - 1.0) > tol) throw InputError("Moebius matrix must have determinant 1");
  return {std::move(a), std::move(b), std::move(c), std::move(d)};
}

template <class Real>
Moebius<Real> compose(const Moebius<Real>& g, const Moebius<Real>& h) {
  return {g.a * h.a + g.b * h.c, g.a * h.b + g.b * h.d, g.c * h.a + g.d * h.c, g.c * h.b + g.d * h.d};
}

template <class Real>
Moebius<Real> inverse(const Moebius<Real>& g) {
  return {g.d, -g.b, -g.c, g.a};
}

template <class Real>
Real trace(const Moebius<Real>& g) {
  return g.a + g.d;
}

template <class Real>
UpperHalfPoint<Real> moebius_act(const Moebius<Real>& g, const UpperHalfPoint<Real>& p,
                                 double log_floor = RealTraits<Real>::log_denominator_floor) {
  // |cz+d|^2 with z = x + iy
  const Real re = g.c * p.x + g.d;
  const Real im = g.c * p.y;
  const Real denom = re * re + im * im;
  if (!(RealTraits<Real>::log(denom) >= 2.0 * log_floor)) throw NumericDomainError("degenerate Moebius denominator");
  const Real num_re = g.a * p.x + g.b;
  const Real x = (num_re * re + g.a * p.y * im) / denom;
  const Real y = p.y / denom;
  return {x, y};
}

// g . i, which never has a degenerate denominator.
template <class Real>
UpperHalfPoint<Real> orbit_of_i(const Moebius<Real>& g) {
  const Real n = g.c * g.c + g.d * g.d;
  return {(g.a * g.c + g.b * g.d) / n, Real(1) / n};
}

// 2 asinh(sqrt(q)) evaluated without overflow for very large or small q.
template <class Real>
double distance_from_ratio(const Real& q) {
  if constexpr (std::is_same_v<Real, double>) {
    return 2.0 * std::asinh(std::sqrt(q));
  } else {
    using std::sqrt;
    const double lq = RealTraits<Real>::log(q);
    if (lq > 600.0) return lq + 2.0 * std::log(2.0);
    if (lq < -600.0) return 2.0 * RealTraits<Real>::to_double(sqrt(q));
    return 2.0 * std::asinh(std::sqrt(RealTraits<Real>::to_double(q)));
  }
}

template <class Real>
double h2_dist(const UpperHalfPoint<Real>& p, const UpperHalfPoint<Real>& q) {
  const Real dx = p.x - q.x;
  const Real dy = p.y - q.y;
  const Real ratio = (dx * dx + dy * dy) / (4 * p.y * q.y);
  if (!(RealTraits<Real>::to_double(ratio) > 0)) return 0.0;
  return distance_from_ratio(ratio);
}

// d(i, g i) from the Frobenius norm: cosh d = (a^2+b^2+c^2+d^2)/2.
template <class Real>
double displacement_of_i(const Moebius<Real>& g) {
  const Real s = g.a * g.a + g.b * g.b + g.c * g.c + g.d * g.d;
  // s/2 - 1 = 2 sinh^2(d/2)
  const Real q = (s - 2) / 4;
  if (!(RealTraits<Real>::to_double(q) > 0)) return 0.0;
  return distance_from_ratio(q);
}

template <class Real>
IsometryKind classify_isometry(const Moebius<Real>& g, double tol = 1e-9) {
  const double t = std::abs(RealTraits<Real>::to_double(trace(g)));
  if (t > 2.0 + tol) return IsometryKind::loxodromic;
  if (t >= 2.0 - tol) return IsometryKind::parabolic;
  return IsometryKind::elliptic;
}

template <class Real>
double translation_length(const Moebius<Real>& g, double tol = 1e-9) {
  if (classify_isometry(g, tol) != IsometryKind::loxodromic) return 0.0;
  const double t = std::abs(RealTraits<Real>::to_double(trace(g)));
  return 2.0 * std::acosh(t / 2.0);
}

template <class Real>
FixedPoints<Real> fixed_points(const Moebius<Real>& g, double tol = 1e-9) {
  using std::abs;
  using std::sqrt;
  if (classify_isometry(g, tol) != IsometryKind::loxodromic)
    throw ClassificationError("fixed_points requires a loxodromic isometry");
  // roots of c t^2 + (d - a) t - b = 0
  const Real tr = trace(g);
  const double scale = std::abs(RealTraits<Real>::to_double(tr));
  if (std::abs(RealTraits<Real>::to_double(g.c)) <= tol * scale) {
    // z -> (a/d) z + b/d: the finite fixed point attracts iff |a/d| < 1
    const Real t0 = g.b / (g.d - g.a);
    const auto finite = BoundaryPoint<Real>::finite(t0);
    const bool finite_attracting = abs(g.a) < abs(g.d);
    if (finite_attracting) return {finite, BoundaryPoint<Real>::infinity()};
    return {BoundaryPoint<Real>::infinity(), finite};
  }
  const Real disc = sqrt(tr * tr - 4);  // (d-a)^2 + 4bc = tr^2 - 4 for det 1
  const Real p = g.a - g.d;
  // stable roots of c t^2 - p t - b = 0
  const Real sign = RealTraits<Real>::to_double(p) >= 0 ? Real(1) : Real(-1);
  const Real big = (p + sign * disc) / 2;
  const Real t1 = big / g.c;
  const Real t2 = -g.b / big;
  // derivative at a fixed point t is 1/(ct+d)^2
  const Real m1 = abs(g.c * t1 + g.d);
  const Real m2 = abs(g.c * t2 + g.d);
  const auto b1 = BoundaryPoint<Real>::finite(t1);
  const auto b2 = BoundaryPoint<Real>::finite(t2);
  if (m1 > m2) return {b1, b2};
  return {b2, b1};
}

// Gromov product at i of two boundary points, via the disk model chord length.
template <class Real>
double boundary_product(const BoundaryPoint<Real>& p, const BoundaryPoint<Real>& q) {
  auto to_disk = [](const BoundaryPoint<Real>& b) -> std::pair<double, double> {
    if (b.at_infinity) return {1.0, 0.0};
    const double t = RealTraits<Real>::to_double(b.t);
    // (t - i) / (t + i)
    const double n = t * t + 1.0;
    return {(t * t - 1.0) / n, -2.0 * t / n};
  };
  const auto [x1, y1] = to_disk(p);
  const auto [x2, y2] = to_disk(q);
  const double chord = std::hypot(x1 - x2, y1 - y2);
  if (chord == 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(chord / 2.0);
}

// Point at hyperbolic distance r from i in direction theta (disk angle).
template <class Real>
UpperHalfPoint<Real> polar_point(double r, double theta) {
  // disk point w = tanh(r/2) e^{i theta}; z = i (1 + w) / (1 - w)
  const double rho = std::tanh(r / 2.0);
  const double wr = rho * std::cos(theta), wi = rho * std::sin(theta);
  const double den = (1.0 - wr) * (1.0 - wr) + wi * wi;
  const double x = -2.0 * wi / den;
  const double y = (1.0 - wr * wr - wi * wi) / den;
  return {RealTraits<Real>::from_double(x), RealTraits<Real>::from_double(y)};
}

// Same point as polar_point, built with matrices in Real arithmetic so large r stays exact.
template <class Real>
UpperHalfPoint<Real> ray_point(double r, double theta) {
  using std::exp;
  const Real s = exp(Real(r / 2));
  // a matrix rotation by phi turns the disk by 2 phi
  const double phi = theta / 2;
  const Real c(std::cos(phi)), sn(std::sin(phi));
  const Moebius<Real> rot{c, sn, -sn, c};
  return orbit_of_i(compose(rot, Moebius<Real>{s, Real(0), Real(0), Real(1) / s}));
}

// Disk angle of a boundary point, so that ray_point(r, angle) tends to it.
template <class Real>
double boundary_angle(const BoundaryPoint<Real>& b) {
  if (b.at_infinity) return 0.0;
  const double t = RealTraits<Real>::to_double(b.t);
  return std::atan2(-2.0 * t, t * t - 1.0);
}

template <class Real>
class HalfPlaneSpace {
 public:
  using Point = UpperHalfPoint<Real>;
  using Isometry = Moebius<Real>;
  using End = BoundaryPoint<Real>;

  explicit HalfPlaneSpace(double delta = 0.75, double tol = 1e-9) : delta_(delta), tol_(tol) {
    if (!(delta >= 0.0)) throw InputError("delta must be nonnegative");
  }

  double tolerance() const { return tol_; }
  Point basepoint() const { return {Real(0), Real(1)}; }
  double delta() const { return delta_; }
  double distance(const Point& p, const Point& q) const { return h2_dist(p, q); }
  double gromov_product(const Point& x, const Point& z, const Point& base) const {
    return (distance(x, base) + distance(base, z) - distance(x, z)) / 2.0;
  }
  Point act(const Isometry& g, const Point& p) const { return guard(moebius_act(g, p)); }
  Isometry compose(const Isometry& g, const Isometry& h) const { return pivotwalk::compose(g, h); }
  Isometry inverse(const Isometry& g) const { return pivotwalk::inverse(g); }
  Isometry identity() const { return {}; }
  Point orbit_point(const Isometry& g) const { return guard(orbit_of_i(g)); }

  bool same(const Isometry& g, const Isometry& h) const {
    auto close = [&](const Real& u, const Real& v) {
      return std::abs(RealTraits<Real>::to_double(u - v)) <= tol_;
    };
    const bool plus = close(g.a, h.a) && close(g.b, h.b) && close(g.c, h.c) && close(g.d, h.d);
    const bool minus = close(g.a, -h.a) && close(g.b, -h.b) && close(g.c, -h.c) && close(g.d, -h.d);
    return plus || minus;
  }
  bool same_point(const Point& p, const Point& q, double eps) const { return distance(p, q) <= eps; }

  std::optional<std::pair<End, End>> fixed_ends(const Isometry& g) const {
    if (classify_isometry(g, tol_) != IsometryKind::loxodromic) return std::nullopt;
    const auto fp = fixed_points(g, tol_);
    return std::make_pair(fp.attracting, fp.repelling);
  }
  double end_product(const End& a, const End& b) const { return boundary_product(a, b); }

  std::string format(const Isometry& g) const {
    using T = RealTraits<Real>;
    return T::to_text(g.a) + "," + T::to_text(g.b) + "," + T::to_text(g.c) + "," + T::to_text(g.d);
  }
  Isometry parse(const std::string& text) const {
    std::vector<Real> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        v.push_back(RealTraits<Real>::from_text(item));
      } catch (const std::exception&) {
        throw InputError("bad matrix entry: " + item);
      }
    }
    if (v.size() != 4) throw InputError("matrix needs four comma-separated entries: " + text);
    return make_moebius(v[0], v[1], v[2], v[3], tol_);
  }

 private:
  Point guard(Point p) const {
    if constexpr (RealTraits<Real>::bounded) {
      // cosh d(i, p) = (x^2 + y^2 + 1) / (2y)
      const double ld = RealTraits<Real>::log((p.x * p.x + p.y * p.y + 1) / p.y);
      if (ld > RealTraits<Real>::capacity) throw NumericDomainError("point exceeds working precision");
    }
    return p;
  }

  double delta_;
  double tol_;
};

// "a,b,c,d" round trip for double matrices.
std::string format_moebius(const Moebius<double>& g);
Moebius<double> parse_moebius(const std::string& text, double tol = 1e-9);

}  // namespace pivotwalk

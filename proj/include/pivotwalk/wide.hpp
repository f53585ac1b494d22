#pragma once

#include <boost/multiprecision/mpfr.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pivotwalk/halfplane.hpp"

namespace pivotwalk {

inline constexpr unsigned kWideDigits = 1000;

// Fixed-precision MPFR real for long half-plane trajectories.
using Wide = boost::multiprecision::number<
    boost::multiprecision::mpfr_float_backend<kWideDigits, boost::multiprecision::allocate_stack>,
    boost::multiprecision::et_off>;

template <>
struct RealTraits<Wide> {
  static constexpr double log_denominator_floor = -2072.3;  // log(1e-900)
  static constexpr bool bounded = true;
  // Leaves roughly 120 bits of headroom below the ~3320-bit mantissa.
  static constexpr double capacity = 2200.0;
  static double to_double(const Wide& x) { return x.convert_to<double>(); }
  static Wide from_double(double x) { return Wide(x); }
  static double log(const Wide& x) {
    if (x <= 0) return -std::numeric_limits<double>::infinity();
    int e = 0;
    const Wide m = frexp(x, &e);
    return std::log(m.convert_to<double>()) + e * std::log(2.0);
  }
  static std::string to_text(const Wide& x) { return x.str(80, std::ios_base::scientific); }
  static Wide from_text(const std::string& s) {
    try {
      return Wide(s);
    } catch (const std::runtime_error&) {
      throw std::invalid_argument(s);
    }
  }
};

using WideSpace = HalfPlaneSpace<Wide>;

template <class To, class From>
Moebius<To> convert_moebius(const Moebius<From>& g) {
  return {To(g.a), To(g.b), To(g.c), To(g.d)};
}

template <class To, class From>
UpperHalfPoint<To> convert_point(const UpperHalfPoint<From>& p) {
  return {To(p.x), To(p.y)};
}

}  // namespace pivotwalk

#include "pivotwalk/halfplane.hpp"

#include <cstdio>
#include <sstream>
#include <vector>

namespace pivotwalk {

std::string format_moebius(const Moebius<double>& g) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", g.a, g.b, g.c, g.d);
  return buf;
}

Moebius<double> parse_moebius(const std::string& text, double tol) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InputError("bad matrix entry: " + item);
    }
  }
  if (v.size() != 4) throw InputError("matrix needs four comma-separated entries: " + text);
  return make_moebius(v[0], v[1], v[2], v[3], tol);
}

}  // namespace pivotwalk

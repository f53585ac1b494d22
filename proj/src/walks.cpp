#include "pivotwalk/walks.hpp"

namespace pivotwalk {

void write_trajectory_csv(std::ostream& os, const ScheduledTrajectory& tr) {
  os << "k,distance,block,epsilon,role\n";
  char buf[64];
  for (std::size_t k = 0; k < tr.distance.size(); ++k) {
    // position k closes step k - 1, which lies in block (k - 1) / N
    const long block = k == 0 ? 0 : (static_cast<long>(k) - 1) / tr.N;
    const auto b = static_cast<std::size_t>(block);
    std::snprintf(buf, sizeof buf, "%.17g", tr.distance[k]);
    os << k << ',' << buf << ',' << block << ',';
    if (k == 0 || b >= tr.eps.size()) os << ",\n";
    else os << int(tr.eps[b]) << ',' << role_char(tr.roles[b]) << '\n';
  }
}

}  // namespace pivotwalk

#pragma once

// Test-side oracles, independent of the library code.

#include <cstddef>
#include <vector>

namespace oracle {

// Distance to the identity of the walk on F_d that holds with probability
// `hold` and otherwise multiplies by a uniform generator: a birth-death chain on
// N reflected at 0. law[n][k] = P(|Z_n| = k), by powers of the transition matrix.
inline std::vector<std::vector<double>> reflected_chain(int d, double hold, int n_max) {
  const std::size_t size = static_cast<std::size_t>(n_max) + 2;
  std::vector<std::vector<double>> P(size, std::vector<double>(size, 0.0));
  const double move = 1.0 - hold;
  const double down = move / (2.0 * d);
  for (std::size_t k = 0; k < size; ++k) {
    P[k][k] += hold;
    if (k == 0) {
      P[0][1] += move;
    } else {
      P[k][k - 1] += down;
      if (k + 1 < size) P[k][k + 1] += move - down;
      else P[k][k] += move - down;  // never reached within n_max steps
    }
  }
  std::vector<std::vector<double>> law{std::vector<double>(size, 0.0)};
  law[0][0] = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    std::vector<double> next(size, 0.0);
    const auto& cur = law.back();
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) next[j] += cur[i] * P[i][j];
    law.push_back(std::move(next));
  }
  return law;
}

inline double chain_mean(const std::vector<double>& law) {
  double m = 0.0;
  for (std::size_t k = 0; k < law.size(); ++k) m += static_cast<double>(k) * law[k];
  return m;
}

// P(|Z_n| <= r n), with the same tolerance on the threshold as the library.
inline double chain_le(const std::vector<double>& law, double threshold) {
  double p = 0.0;
  for (std::size_t k = 0; k < law.size(); ++k)
    if (static_cast<double>(k) <= threshold + 1e-12) p += law[k];
  return p;
}

}  // namespace oracle

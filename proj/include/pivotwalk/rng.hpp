#pragma once

#include <cstdint>
#include <random>

namespace pivotwalk {

// Independent named streams: one generator per (master seed, index, tag).
// Adding a new tag never shifts the draws of existing streams.
enum class Stream : std::uint64_t {
  walk = 1,
  block = 2,
  rho = 3,
  bootstrap = 4,
  engine = 5,
  backoff = 6,
};

inline std::mt19937_64 stream_rng(std::uint64_t master, std::uint64_t index, Stream tag) {
  const auto t = static_cast<std::uint64_t>(tag);
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
  return std::mt19937_64(seq);
}

inline double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace pivotwalk

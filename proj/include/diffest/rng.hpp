#pragma once

#include <cstdint>
#include <random>

#include "diffest/stats.hpp"

namespace diffest {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-replicate stream: base seed XOR replicate index, scrambled. The base
// is scrambled first; raw small bases XORed with small indices would span
// the same input set, making studies with adjacent seeds draw identical
// path collections.
inline std::uint64_t replicate_stream_seed(std::uint64_t base_seed,
                                           std::uint64_t replicate_index) {
  return splitmix64(splitmix64(base_seed) ^ replicate_index);
}

// Seedable normal generator. Normals come from the inverse CDF applied to
// mt19937_64 uniforms, so sequences are reproducible per build and seed.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : eng_(seed) {}

  // Uniform on (0,1), never hitting either endpoint.
  double uniform01() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_quantile_fast(uniform01()); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace diffest

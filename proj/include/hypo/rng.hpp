#pragma once
#include <cmath>
#include <cstdint>

namespace hypo {

// Counter-based randomness: every draw is a pure function of its key, so
// results are independent of execution order and identical across reruns.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t key4(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  std::uint64_t h = mix64(a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  h = mix64(h ^ d);
  return h;
}

inline double u01(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53; // in (0,1)
}

// Standard normal via Box-Muller from two independent hashes of the key.
inline double normal_draw(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                          std::uint64_t channel) {
  const std::uint64_t h1 = key4(seed, path, step, 2 * channel);
  const std::uint64_t h2 = key4(seed, path, step, 2 * channel + 1);
  const double r = std::sqrt(-2.0 * std::log(u01(h1)));
  return r * std::cos(6.283185307179586476925286766559 * u01(h2));
}

} // namespace hypo

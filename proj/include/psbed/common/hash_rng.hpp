#pragma once

#include <cstdint>

namespace psbed {

// Stateless counter-based randomness. Every stochastic decision in the
// injector and the protocol tests is a pure function of a key tuple, so a
// rerun with the same seed replays bit-identically regardless of scheduling.

inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t HashMix(uint64_t a, uint64_t b) {
  return SplitMix64(SplitMix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

inline uint64_t HashMix(uint64_t a, uint64_t b, uint64_t c) {
  return HashMix(HashMix(a, b), c);
}

inline uint64_t HashMix(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return HashMix(HashMix(a, b, c), d);
}

// Uniform double in [0, 1) from 53 high bits.
inline double ToUnitDouble(uint64_t h) {
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

// Uniform double in (0, 1]; never returns 0 (safe for inverse-CDF sampling).
inline double ToUnitDoubleOpenLow(uint64_t h) {
  return 1.0 - ToUnitDouble(h);
}

// Bernoulli(p) decided from a hashed key.
inline bool HashBernoulli(uint64_t h, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return ToUnitDouble(h) < p;
}

}  // namespace psbed

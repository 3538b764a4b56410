#ifndef DHASH_HASH_HPP
#define DHASH_HASH_HPP

#include <functional>

#include "dhash/config.hpp"

namespace dhash {

/// User hash function. Must be pure and total; the table reduces the result
/// modulo its bucket count, so any 64-bit value is acceptable.
using HashFn = std::function<std::uint64_t(Key)>;

namespace hashes {

/// h(k) = k. With the modulo reduction this is the textbook `k mod n`.
inline HashFn identity() {
  return [](Key k) { return k; };
}

/// Multiplicative (Fibonacci-style) hashing; different odd multipliers give
/// independent-looking functions for rebuilds that change the hash.
inline HashFn multiplicative(std::uint64_t multiplier) {
  return [m = multiplier | 1U](Key k) {
    const std::uint64_t h = k * m;
    return h ^ (h >> 32);
  };
}

inline constexpr std::uint64_t kGoldenMultiplier = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kAltMultiplier = 0xC2B2AE3D27D4EB4FULL;

}  // namespace hashes
}  // namespace dhash

#endif  // DHASH_HASH_HPP

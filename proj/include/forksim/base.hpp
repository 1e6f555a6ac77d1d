#pragma once
#include <cstdint>
#include <limits>

namespace forksim {

using NodeId = uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

using Addr = uint64_t;

// Shared arrays live below kStackBase; execution stacks get disjoint
// 1 MiW regions above it. Array bases are 64-word aligned so a cache
// block (B <= 64, power of two) never straddles two arrays or an
// array and a stack.
inline constexpr Addr kStackBase = Addr(1) << 40;
inline constexpr Addr kStackRegionWords = Addr(1) << 20;
inline constexpr uint32_t kArrayAlign = 64;

inline constexpr uint64_t block_of(Addr a, uint32_t block_words) {
  return a / block_words;
}
inline constexpr bool is_shared_addr(Addr a) { return a < kStackBase; }

// Deterministic 64-bit generator (splitmix64). Used instead of the
// unspecified std:: distributions so streams are stable across
// standard library implementations.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  // Unbiased draw from [0, n) by rejection.
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t v;
    do { v = next(); } while (v >= limit);
    return v % n;
  }
};

}  // namespace forksim

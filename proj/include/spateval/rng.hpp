#pragma once

#include <cstdint>

namespace spateval {

/// SplitMix64 (Steele, Lea & Flood 2014). Chosen over std::mt19937_64 because
/// its output is fully pinned by this header: sampled benchmark subsets stay
/// byte-identical across standard libraries and platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Unbiased integer in [0, bound) via rejection. bound must be nonzero.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % bound;
  }

  double next_double() {  // [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

/// Stateless mix of up to four words into one seed, used to derive
/// independent per-item streams from a base seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0, std::uint64_t d = 0) {
  SplitMix64 g(a);
  std::uint64_t s = g.next() ^ b;
  SplitMix64 g2(s);
  s = g2.next() ^ c;
  SplitMix64 g3(s);
  return g3.next() ^ d;
}

}  // namespace spateval

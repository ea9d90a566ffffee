#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace distaudit {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic seedable generator. All randomized behaviour in the library
/// draws from an explicit Rng so runs are reproducible across platforms
/// (std::shuffle and std::uniform_int_distribution are not portable).
class Rng {
public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  /// Uniform draw in [0, n) by rejection; n must be positive.
  uint64_t uniform_below(uint64_t n) {
    const uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform draw in [lo, hi] inclusive.
  uint64_t uniform_range(uint64_t lo, uint64_t hi) {
    return lo + uniform_below(hi - lo + 1);
  }

  double uniform_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool coin() { return (next_u64() & 1) != 0; }

  /// Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<uint64_t> permutation(uint64_t n) {
    std::vector<uint64_t> p(n);
    std::iota(p.begin(), p.end(), uint64_t{0});
    for (uint64_t i = n; i > 1; --i) {
      uint64_t j = uniform_below(i);
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (uint64_t i = v.size(); i > 1; --i) {
      uint64_t j = uniform_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent substream for (tag_a, tag_b), e.g. (trial, agent).
  Rng derive(uint64_t tag_a, uint64_t tag_b = 0) const {
    uint64_t s = splitmix64(state_ ^ splitmix64(tag_a));
    return Rng(splitmix64(s ^ splitmix64(tag_b ^ 0xa5a5a5a5a5a5a5a5ull)));
  }

private:
  uint64_t state_;
};

}  // namespace distaudit

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "distaudit/errors.hpp"
#include "distaudit/rng.hpp"

namespace distaudit::tdk {

/// A Task Distribution Key: a bit mask tiled along the shared block sequence;
/// set bits select the blocks the owning SUBTPA verifies.
struct TaskDistributionKey {
  std::string bits;  // ASCII '0'/'1'
  uint32_t owner = 0;

  size_t length() const { return bits.size(); }
  size_t popcount() const {
    size_t n = 0;
    for (char b : bits) n += (b == '1');
    return n;
  }
  void validate() const {
    if (bits.empty()) throw invalid_parameter_error("TDK must not be empty");
    if (bits.find_first_not_of("01") != std::string::npos) {
      throw invalid_parameter_error("TDK must be a binary string");
    }
    if (bits.find('1') == std::string::npos) throw invalid_parameter_error("TDK needs at least one set bit");
  }
};

enum class OverlapMode {
  /// One shared permutation; the extra ones are dealt round-robin, one per
  /// key, totalling ceil(pct * TDKLen / 100) extra bits as in the worked
  /// overlap example.
  Shared,
  /// Every key independently receives ceil(pct * TDKLen / 100) extra ones.
  PerKey,
};

struct TDKSet {
  std::vector<TaskDistributionKey> keys;
  bool overlapping = false;
  double overlap_pct = 0.0;
  OverlapMode mode = OverlapMode::Shared;
  uint64_t base_len = 0;  // n*t before length adjustment
};

/// Keep the key length coprime to the sequence length: return len when
/// gcd(len, seq_len) = 1, otherwise the smallest larger integer that is
/// prime or coprime to seq_len.
inline uint64_t adjust_length(uint64_t len, uint64_t seq_len) {
  if (len == 0) throw invalid_parameter_error("TDK length must be positive");
  if (seq_len == 0 || std::gcd(len, seq_len) == 1) return len;
  uint64_t x = len + 1;
  while (std::gcd(x, seq_len) != 1) ++x;
  return x;
}

/// n pairwise-disjoint keys with t ones each: a random permutation of the
/// n*t base positions is cut into n consecutive groups of t. Positions added
/// by the length adjustment stay zero for every key.
inline TDKSet generate_nonoverlapping(uint32_t n, uint32_t t, uint64_t seq_len, Rng& rng) {
  if (n < 1 || t < 1) throw invalid_parameter_error("need at least one key and one set bit");
  TDKSet set;
  set.base_len = static_cast<uint64_t>(n) * t;
  const uint64_t len = adjust_length(set.base_len, seq_len);
  auto perm = rng.permutation(set.base_len);
  set.keys.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    set.keys[i].owner = i;
    set.keys[i].bits.assign(len, '0');
    for (uint32_t j = 0; j < t; ++j) {
      set.keys[i].bits[perm[static_cast<size_t>(i) * t + j]] = '1';
    }
  }
  return set;
}

/// Add overlap to a non-overlapping set: ceil(pct * TDKLen / 100) zero
/// positions are flipped to one so that some positions become covered by
/// more than one key. Base bits are retained.
inline TDKSet generate_overlapping(const TDKSet& base, double overlap_pct, Rng& rng,
                                   OverlapMode mode = OverlapMode::Shared) {
  if (base.overlapping) throw invalid_parameter_error("base set must be non-overlapping");
  if (overlap_pct < 0.0 || overlap_pct > 100.0) throw invalid_parameter_error("overlap percentage out of range");
  TDKSet out = base;
  out.overlapping = overlap_pct > 0.0;
  out.overlap_pct = overlap_pct;
  out.mode = mode;
  if (overlap_pct == 0.0) return out;

  const uint64_t len = base.keys.front().length();
  const uint64_t want =
      static_cast<uint64_t>(std::ceil(overlap_pct * static_cast<double>(len) / 100.0 - 1e-9));

  if (mode == OverlapMode::Shared) {
    // One shared permutation; extras dealt round-robin, each key consuming
    // its next zero position from the permutation.
    auto perm = rng.permutation(len);
    std::vector<size_t> cursor(out.keys.size(), 0);
    uint64_t placed = 0;
    size_t key_idx = 0;
    while (placed < want) {
      size_t tried = 0;
      for (; tried < out.keys.size(); ++tried) {
        const size_t k = key_idx % out.keys.size();
        ++key_idx;
        auto& key = out.keys[k];
        size_t& cur = cursor[k];
        while (cur < perm.size() && key.bits[perm[cur]] == '1') ++cur;
        if (cur < perm.size()) {
          key.bits[perm[cur++]] = '1';
          ++placed;
          break;
        }
      }
      if (tried == out.keys.size()) {
        throw invalid_parameter_error("requested overlap exceeds available zero positions");
      }
    }
  } else {
    for (auto& key : out.keys) {
      std::vector<uint64_t> zeros;
      for (uint64_t p = 0; p < len; ++p) {
        if (key.bits[p] == '0') zeros.push_back(p);
      }
      if (zeros.size() < want) {
        throw invalid_parameter_error("requested overlap exceeds available zero positions");
      }
      rng.shuffle(zeros);
      for (uint64_t j = 0; j < want; ++j) key.bits[zeros[j]] = '1';
    }
  }
  return out;
}

/// Tile the key along the sequence from position 0 in strides of its length;
/// elements aligned with set bits are selected, the final partial tile by its
/// prefix bits. Sequence order is preserved.
template <typename Seq>
inline std::vector<uint64_t> interpret(const TaskDistributionKey& key, const Seq& seq) {
  key.validate();
  std::vector<uint64_t> out;
  const size_t len = key.bits.size();
  size_t i = 0;
  for (uint64_t v : seq) {
    if (key.bits[i % len] == '1') out.push_back(v);
    ++i;
  }
  return out;
}

/// Positions (not values) the key selects from a sequence of given length.
inline std::vector<uint64_t> interpret_positions(const TaskDistributionKey& key, uint64_t seq_len) {
  key.validate();
  std::vector<uint64_t> out;
  const size_t len = key.bits.size();
  for (uint64_t p = 0; p < seq_len; ++p) {
    if (key.bits[p % len] == '1') out.push_back(p);
  }
  return out;
}

}  // namespace distaudit::tdk

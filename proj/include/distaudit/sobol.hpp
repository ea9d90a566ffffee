#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distaudit/errors.hpp"
#include "distaudit/numeric.hpp"
#include "distaudit/rng.hpp"

namespace distaudit::sobol {

/// Direction numbers are dyadic fractions held exactly as integer numerators
/// over 2^kWordBits, so scaling by a power-of-two block count never rounds.
inline constexpr unsigned kWordBits = 52;

/// Primitive polynomial over GF(2):
///   X^d + a_1 X^{d-1} + ... + a_{d-1} X + 1.
/// `mask` holds every coefficient, bit i = coefficient of X^i.
struct PrimitivePolynomial {
  unsigned degree = 0;
  uint64_t mask = 0;

  /// a_k for k in [1, d-1]; coefficient of X^{d-k}.
  unsigned coeff_a(unsigned k) const { return (mask >> (degree - k)) & 1u; }

  std::string to_string() const {
    std::string s;
    for (int i = static_cast<int>(degree); i >= 0; --i) {
      if (!((mask >> i) & 1u)) continue;
      if (!s.empty()) s += "+";
      if (i == 0) {
        s += "1";
      } else if (i == 1) {
        s += "x";
      } else {
        s += "x^" + std::to_string(i);
      }
    }
    return s;
  }

  bool operator==(const PrimitivePolynomial&) const = default;
};

namespace detail {

using u128 = unsigned __int128;

inline unsigned bit_length_128(u128 v) {
  unsigned n = 0;
  while (v) {
    ++n;
    v >>= 1;
  }
  return n;
}

// Carry-less multiply of GF(2) polynomials; degree-32 operands produce
// degree-64 products, hence the 128-bit accumulator.
inline u128 gf2_mul(u128 a, uint64_t b) {
  u128 r = 0;
  while (b) {
    if (b & 1) r ^= a;
    a <<= 1;
    b >>= 1;
  }
  return r;
}

inline uint64_t gf2_mod(u128 a, uint64_t mod) {
  const unsigned md = bit_length(mod);
  unsigned ad = bit_length_128(a);
  while (ad >= md) {
    a ^= static_cast<u128>(mod) << (ad - md);
    ad = bit_length_128(a);
  }
  return static_cast<uint64_t>(a);
}

inline uint64_t gf2_mulmod(uint64_t a, uint64_t b, uint64_t mod) {
  return gf2_mod(gf2_mul(a, b), mod);
}

// X^e mod `mod` over GF(2).
inline uint64_t gf2_x_powmod(uint64_t e, uint64_t mod) {
  uint64_t result = 1;
  uint64_t base = gf2_mod(2, mod);
  while (e) {
    if (e & 1) result = gf2_mulmod(result, base, mod);
    base = gf2_mulmod(base, base, mod);
    e >>= 1;
  }
  return result;
}

}  // namespace detail

/// True iff `mask` (degree d, constant term 1) is primitive: the multiplicative
/// order of X modulo the polynomial equals 2^d - 1.
inline bool is_primitive(unsigned degree, uint64_t mask) {
  if ((mask & 1) == 0) return false;
  const uint64_t order = (degree == 64) ? ~0ull : (1ull << degree) - 1;
  if (detail::gf2_x_powmod(order, mask) != 1) return false;
  for (uint64_t p : distinct_prime_factors(order)) {
    if (detail::gf2_x_powmod(order / p, mask) == 1) return false;
  }
  return true;
}

inline uint64_t primitive_polynomial_count(unsigned degree) {
  return euler_phi((1ull << degree) - 1) / degree;
}

/// All primitive polynomials of the given degree, ordered by ascending
/// coefficient bit pattern. Exhaustive; intended for the desk-scale degrees
/// the protocols use.
inline std::vector<PrimitivePolynomial> enumerate_primitive_polynomials(unsigned degree) {
  if (degree < 1 || degree > 32) {
    throw invalid_parameter_error("primitive polynomial degree must be in [1, 32]");
  }
  std::vector<PrimitivePolynomial> out;
  const uint64_t inner = (degree >= 2) ? (1ull << (degree - 1)) : 1;
  for (uint64_t c = 0; c < inner; ++c) {
    uint64_t mask = (1ull << degree) | (c << 1) | 1ull;
    if (is_primitive(degree, mask)) out.push_back({degree, mask});
  }
  return out;
}

/// The Sobol random key sigma_r = <P, m_i, SKIP, LEAP, CONSTANT, SeqLen>.
struct SobolKey {
  PrimitivePolynomial poly;
  std::vector<uint64_t> init_m;  // m_1 ... m_d, each odd and < 2^i
  uint64_t skip = 0;             // initial points discarded
  uint64_t leap = 0;             // points skipped between kept points
  uint64_t constant = 0;         // power of two; total block count scale
  uint64_t seq_len = 0;

  void validate() const {
    if (poly.degree < 1 || poly.degree > 32) throw invalid_key_error("polynomial degree out of range");
    if ((poly.mask & 1) == 0 || !((poly.mask >> poly.degree) & 1)) {
      throw invalid_key_error("polynomial mask malformed");
    }
    if (init_m.size() != poly.degree) {
      throw invalid_key_error("init_m must supply exactly degree values");
    }
    for (size_t i = 0; i < init_m.size(); ++i) {
      uint64_t m = init_m[i];
      if ((m & 1) == 0) throw invalid_key_error("init value m_" + std::to_string(i + 1) + " must be odd");
      if (m >= (1ull << (i + 1))) {
        throw invalid_key_error("init value m_" + std::to_string(i + 1) + " must be < 2^" + std::to_string(i + 1));
      }
    }
    if (!is_power_of_two(constant)) throw invalid_key_error("constant must be a power of two");
    if (constant > (1ull << kWordBits)) throw invalid_key_error("constant exceeds the direction-number word budget");
    if (seq_len == 0) throw invalid_key_error("seq_len must be positive");
  }
};

struct DirectionNumber {
  uint64_t m;      // odd, < 2^index
  unsigned index;  // v = m / 2^index
};

/// First `count` direction numbers for the key: the first d echo init_m, the
/// rest follow the XOR recurrence
///   m_i = 2 a_1 m_{i-1} xor 2^2 a_2 m_{i-2} xor ... xor 2^d m_{i-d} xor m_{i-d}.
inline std::vector<DirectionNumber> direction_numbers(const SobolKey& key, unsigned count) {
  key.validate();
  const unsigned d = key.poly.degree;
  if (count < d) throw invalid_parameter_error("direction number count must be >= degree");
  std::vector<uint64_t> m(count);
  for (unsigned i = 0; i < d; ++i) m[i] = key.init_m[i];
  for (unsigned i = d; i < count; ++i) {
    uint64_t v = (m[i - d] << d) ^ m[i - d];
    for (unsigned k = 1; k < d; ++k) {
      if (key.poly.coeff_a(k)) v ^= m[i - k] << k;
    }
    m[i] = v;
  }
  std::vector<DirectionNumber> out(count);
  for (unsigned i = 0; i < count; ++i) out[i] = {m[i], i + 1};
  return out;
}

struct BlockSequence {
  std::vector<uint64_t> indices;  // each in [0, constant)

  size_t size() const { return indices.size(); }
  uint64_t operator[](size_t i) const { return indices[i]; }
  auto begin() const { return indices.begin(); }
  auto end() const { return indices.end(); }
  bool operator==(const BlockSequence&) const = default;
};

namespace detail {

// Direction numerators over 2^kWordBits, indexed from 1.
inline std::vector<uint64_t> scaled_direction_numerators(const SobolKey& key, unsigned count) {
  auto dirs = direction_numbers(key, count);
  std::vector<uint64_t> v(count + 1, 0);
  for (auto& dn : dirs) v[dn.index] = dn.m << (kWordBits - dn.index);
  return v;
}

inline unsigned rightmost_zero_bit(uint64_t n) {
  unsigned c = 1;
  while (n & 1) { n >>= 1; ++c; }
  return c;
}

}  // namespace detail

/// x^n as an exact numerator over 2^kWordBits, via the direct Gray-code form
/// x^n = g_1 v_1 xor g_2 v_2 xor ...
inline uint64_t point_at(const SobolKey& key, uint64_t n) {
  if (n >= (1ull << (kWordBits - 1))) throw invalid_parameter_error("point index exceeds word budget");
  const unsigned bits = n ? bit_length(n) : 1;
  auto v = detail::scaled_direction_numerators(key, std::max<unsigned>(key.poly.degree, bits));
  uint64_t gray = n ^ (n >> 1);
  uint64_t x = 0;
  for (unsigned i = 1; gray; ++i, gray >>= 1) {
    if (gray & 1) x ^= v[i];
  }
  return x;
}

/// Generate the block sequence: step x^{n+1} = x^n xor v_c with c the
/// rightmost zero bit of n, drop `skip` points, keep every (leap+1)-th, and
/// scale each kept fraction by `constant` (exact truncation).
inline BlockSequence generate(const SobolKey& key) {
  key.validate();
  const uint64_t stride = key.leap + 1;
  const uint64_t last_raw = key.skip + (key.seq_len - 1) * stride;
  if (last_raw >= (1ull << (kWordBits - 1))) {
    throw invalid_key_error("seq_len/skip/leap require more than the fixed direction-number budget");
  }
  const unsigned bits_needed = std::max<unsigned>(key.poly.degree, bit_length(last_raw + 1) + 1);
  auto v = detail::scaled_direction_numerators(key, bits_needed);

  const unsigned shift = kWordBits - bit_length(key.constant) + 1;  // constant = 2^(bit_length-1)
  BlockSequence seq;
  seq.indices.reserve(key.seq_len);
  uint64_t x = 0;
  for (uint64_t raw = 0; seq.indices.size() < key.seq_len; ++raw) {
    if (raw >= key.skip && (raw - key.skip) % stride == 0) {
      seq.indices.push_back(x >> shift);
    }
    x ^= v[detail::rightmost_zero_bit(raw)];
  }
  return seq;
}

/// Deterministic serialization of a key as a bit string; this is the common
/// string a coordinator and its agents reconcile against when keys travel by
/// string reconciliation.
inline std::string key_to_bits(const SobolKey& key) {
  std::string s;
  auto append = [&s](uint64_t value, unsigned width) {
    for (unsigned i = width; i-- > 0;) s += ((value >> i) & 1) ? '1' : '0';
  };
  append(key.poly.degree, 6);
  append(key.poly.mask, key.poly.degree + 1);
  for (size_t i = 0; i < key.init_m.size(); ++i) append(key.init_m[i], static_cast<unsigned>(i + 1));
  append(key.skip, 16);
  append(key.leap, 16);
  append(bit_length(key.constant) - 1, 6);
  append(key.seq_len, 32);
  return s;
}

}  // namespace distaudit::sobol

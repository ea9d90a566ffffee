#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "distaudit/errors.hpp"
#include "distaudit/numeric.hpp"
#include "distaudit/rng.hpp"

namespace distaudit::gf {

/// Dense polynomial over GF(q), q an odd prime. Coefficients are stored
/// lowest degree first; the zero polynomial is the empty vector and the
/// representation never carries trailing zeros.
struct FieldPoly {
  uint64_t q = 0;
  std::vector<uint64_t> c;

  static FieldPoly zero(uint64_t q) { return {q, {}}; }
  static FieldPoly constant(uint64_t q, uint64_t v) {
    FieldPoly p{q, {v % q}};
    p.trim();
    return p;
  }
  /// Z - root
  static FieldPoly linear_root(uint64_t q, uint64_t root) {
    return {q, {(q - root % q) % q, 1}};
  }
  static FieldPoly from_roots(uint64_t q, const std::vector<uint64_t>& roots);

  bool is_zero() const { return c.empty(); }
  int degree() const { return static_cast<int>(c.size()) - 1; }
  uint64_t leading() const { return c.empty() ? 0 : c.back(); }

  void trim() {
    while (!c.empty() && c.back() == 0) c.pop_back();
  }

  uint64_t eval(uint64_t x) const {
    uint64_t r = 0;
    for (size_t i = c.size(); i-- > 0;) r = (mulmod_u64(r, x, q) + c[i]) % q;
    return r;
  }

  bool operator==(const FieldPoly&) const = default;
};

namespace detail {
inline void require_same_field(const FieldPoly& a, const FieldPoly& b) {
  if (a.q != b.q) throw invalid_parameter_error("polynomial modulus mismatch");
}
inline uint64_t inv_mod(uint64_t a, uint64_t q) {
  if (a % q == 0) throw invalid_parameter_error("division by zero in GF(q)");
  return powmod_u64(a % q, q - 2, q);
}
}  // namespace detail

inline FieldPoly poly_add(const FieldPoly& a, const FieldPoly& b) {
  detail::require_same_field(a, b);
  FieldPoly r{a.q, {}};
  r.c.resize(std::max(a.c.size(), b.c.size()), 0);
  for (size_t i = 0; i < a.c.size(); ++i) r.c[i] = a.c[i];
  for (size_t i = 0; i < b.c.size(); ++i) r.c[i] = (r.c[i] + b.c[i]) % a.q;
  r.trim();
  return r;
}

inline FieldPoly poly_sub(const FieldPoly& a, const FieldPoly& b) {
  detail::require_same_field(a, b);
  FieldPoly r{a.q, {}};
  r.c.resize(std::max(a.c.size(), b.c.size()), 0);
  for (size_t i = 0; i < a.c.size(); ++i) r.c[i] = a.c[i];
  for (size_t i = 0; i < b.c.size(); ++i) r.c[i] = (r.c[i] + a.q - b.c[i]) % a.q;
  r.trim();
  return r;
}

inline FieldPoly poly_mul(const FieldPoly& a, const FieldPoly& b) {
  detail::require_same_field(a, b);
  if (a.is_zero() || b.is_zero()) return FieldPoly::zero(a.q);
  FieldPoly r{a.q, std::vector<uint64_t>(a.c.size() + b.c.size() - 1, 0)};
  for (size_t i = 0; i < a.c.size(); ++i) {
    if (a.c[i] == 0) continue;
    for (size_t j = 0; j < b.c.size(); ++j) {
      r.c[i + j] = (r.c[i + j] + mulmod_u64(a.c[i], b.c[j], a.q)) % a.q;
    }
  }
  r.trim();
  return r;
}

inline FieldPoly poly_scale(const FieldPoly& a, uint64_t s) {
  FieldPoly r = a;
  for (auto& x : r.c) x = mulmod_u64(x, s % a.q, a.q);
  r.trim();
  return r;
}

inline std::pair<FieldPoly, FieldPoly> poly_divmod(const FieldPoly& a, const FieldPoly& b) {
  detail::require_same_field(a, b);
  if (b.is_zero()) throw invalid_parameter_error("polynomial division by zero");
  FieldPoly rem = a;
  FieldPoly quot{a.q, {}};
  if (rem.degree() >= b.degree()) {
    quot.c.resize(rem.degree() - b.degree() + 1, 0);
    const uint64_t lead_inv = detail::inv_mod(b.leading(), a.q);
    while (!rem.is_zero() && rem.degree() >= b.degree()) {
      const size_t shift = rem.degree() - b.degree();
      const uint64_t f = mulmod_u64(rem.leading(), lead_inv, a.q);
      quot.c[shift] = f;
      for (size_t i = 0; i < b.c.size(); ++i) {
        rem.c[shift + i] = (rem.c[shift + i] + a.q - mulmod_u64(f, b.c[i], a.q)) % a.q;
      }
      rem.trim();
    }
  }
  quot.trim();
  return {quot, rem};
}

inline FieldPoly poly_div_exact(const FieldPoly& a, const FieldPoly& b) {
  auto [q, r] = poly_divmod(a, b);
  if (!r.is_zero()) throw invalid_parameter_error("polynomial division was not exact");
  return q;
}

inline FieldPoly poly_monic(const FieldPoly& a) {
  if (a.is_zero()) return a;
  return poly_scale(a, detail::inv_mod(a.leading(), a.q));
}

/// Monic greatest common divisor; gcd(f, 0) is f made monic.
inline FieldPoly poly_gcd(FieldPoly f, FieldPoly g) {
  detail::require_same_field(f, g);
  while (!g.is_zero()) {
    FieldPoly r = poly_divmod(f, g).second;
    f = std::move(g);
    g = std::move(r);
  }
  return poly_monic(f);
}

inline FieldPoly poly_derivative(const FieldPoly& f) {
  FieldPoly r{f.q, {}};
  if (f.c.size() < 2) return r;
  r.c.resize(f.c.size() - 1);
  for (size_t i = 1; i < f.c.size(); ++i) r.c[i - 1] = mulmod_u64(f.c[i], i % f.q, f.q);
  r.trim();
  return r;
}

inline FieldPoly FieldPoly::from_roots(uint64_t q, const std::vector<uint64_t>& roots) {
  FieldPoly p = FieldPoly::constant(q, 1);
  for (uint64_t r : roots) p = poly_mul(p, FieldPoly::linear_root(q, r));
  return p;
}

/// base^exp mod f.
inline FieldPoly poly_powmod(const FieldPoly& base, uint64_t exp, const FieldPoly& f) {
  FieldPoly result = FieldPoly::constant(f.q, 1);
  FieldPoly b = poly_divmod(base, f).second;
  while (exp) {
    if (exp & 1) result = poly_divmod(poly_mul(result, b), f).second;
    b = poly_divmod(poly_mul(b, b), f).second;
    exp >>= 1;
  }
  return result;
}

/// True iff gcd(f, f') is constant.
inline bool is_square_free(const FieldPoly& f) {
  if (f.is_zero()) throw invalid_parameter_error("square-free test on zero polynomial");
  if (f.degree() == 0) return true;
  FieldPoly d = poly_derivative(f);
  if (d.is_zero()) return false;
  return poly_gcd(f, d).degree() == 0;
}

/// True iff f = gcd(f, Z^q - Z), i.e. f is a product of distinct monic linear
/// factors; Z^q is computed by repeated squaring mod f.
inline bool splits_into_linear(const FieldPoly& f) {
  if (f.is_zero()) throw invalid_parameter_error("splitting test on zero polynomial");
  if (f.leading() != 1) throw invalid_parameter_error("splitting test requires a monic polynomial");
  if (f.degree() == 0) return true;
  FieldPoly z{f.q, {0, 1}};
  FieldPoly zq = poly_powmod(z, f.q, f);
  FieldPoly g = poly_gcd(f, poly_sub(zq, z));
  return g == poly_monic(f);
}

namespace detail {

inline void find_roots_rec(const FieldPoly& f, Rng& rng, std::set<uint64_t>& out,
                           uint64_t& attempts, uint64_t cap) {
  const uint64_t q = f.q;
  if (f.degree() <= 0) return;
  if (f.degree() == 1) {
    out.insert((q - f.c[0] % q) % q);
    return;
  }
  // Split with R(Z - a) = (Z - a)^((q-1)/2) - 1 for random a.
  for (;;) {
    if (++attempts > cap) {
      throw not_fully_splittable_error("root splitting did not terminate; polynomial may not split into distinct linear factors");
    }
    const uint64_t a = rng.uniform_below(q);
    FieldPoly shifted{q, {(q - a) % q, 1}};  // Z - a
    FieldPoly h = poly_powmod(shifted, (q - 1) / 2, f);
    h = poly_sub(h, FieldPoly::constant(q, 1));
    FieldPoly g = poly_gcd(f, h);
    if (g.degree() > 0 && g.degree() < f.degree()) {
      find_roots_rec(g, rng, out, attempts, cap);
      find_roots_rec(poly_div_exact(f, g), rng, out, attempts, cap);
      return;
    }
  }
}

}  // namespace detail

/// All roots of a monic, square-free polynomial that splits into linear
/// factors. Callers verify the preconditions with the two tests above;
/// violations surface as not_fully_splittable_error.
inline std::set<uint64_t> find_roots(const FieldPoly& f, Rng& rng) {
  if (f.is_zero()) throw invalid_parameter_error("root finding on zero polynomial");
  if (f.leading() != 1) throw invalid_parameter_error("root finding requires a monic polynomial");
  if (f.q < 3) throw invalid_parameter_error("root finding requires an odd prime modulus");
  std::set<uint64_t> roots;
  uint64_t attempts = 0;
  const uint64_t cap = 64ull * static_cast<uint64_t>(std::max(1, f.degree()));
  detail::find_roots_rec(f, rng, roots, attempts, cap);
  if (static_cast<int>(roots.size()) != f.degree()) {
    throw not_fully_splittable_error("polynomial does not have deg(f) distinct roots in GF(q)");
  }
  return roots;
}

/// Rational function with monic numerator and denominator, reduced so that
/// gcd(numerator, denominator) = 1.
struct RationalFunction {
  FieldPoly numerator;
  FieldPoly denominator;
  bool operator==(const RationalFunction&) const = default;
};

/// Interpolate the m_bar samples into a rational function whose numerator
/// degree is at most floor((m_bar+d)/2) and denominator degree at most
/// floor((m_bar-d)/2), both monic, solved by Gaussian elimination over GF(q).
/// d is the (signed) cardinality difference |S_A| - |S_B| supplied by the
/// caller. If the bound degrees give no consistent system the degrees are
/// stepped down once per retry; exhaustion means m_bar was too small.
inline RationalFunction interpolate_rational(const std::vector<std::pair<uint64_t, uint64_t>>& samples,
                                             uint64_t m_bar, int64_t d, uint64_t q) {
  if (samples.size() != m_bar) throw invalid_parameter_error("interpolation needs exactly m_bar samples");
  if (m_bar == 0) {
    return {FieldPoly::constant(q, 1), FieldPoly::constant(q, 1)};
  }
  {
    std::set<uint64_t> pts;
    for (auto& [x, _] : samples) pts.insert(x % q);
    if (pts.size() != samples.size()) throw invalid_parameter_error("interpolation points must be distinct");
  }
  const int64_t nd0 = (static_cast<int64_t>(m_bar) + d) / 2;
  const int64_t dd0 = (static_cast<int64_t>(m_bar) - d) / 2;
  if (nd0 < 0 || dd0 < 0) throw reconciliation_bound_error("difference bound inconsistent with cardinality difference");

  for (int64_t k = 0; nd0 - k >= 0 && dd0 - k >= 0; ++k) {
    const size_t nd = static_cast<size_t>(nd0 - k);
    const size_t dd = static_cast<size_t>(dd0 - k);
    const size_t unknowns = nd + dd;
    // Row per sample: sum_j p_j x^j - f * sum_k q_k x^k = f x^dd - x^nd.
    std::vector<std::vector<uint64_t>> m(samples.size(), std::vector<uint64_t>(unknowns + 1, 0));
    for (size_t r = 0; r < samples.size(); ++r) {
      const uint64_t x = samples[r].first % q;
      const uint64_t f = samples[r].second % q;
      uint64_t xp = 1;
      for (size_t j = 0; j < nd; ++j) {
        m[r][j] = xp;
        xp = mulmod_u64(xp, x, q);
      }
      const uint64_t x_nd = xp;  // x^nd
      xp = 1;
      for (size_t j = 0; j < dd; ++j) {
        m[r][nd + j] = (q - mulmod_u64(f, xp, q)) % q;
        xp = mulmod_u64(xp, x, q);
      }
      const uint64_t x_dd = xp;  // x^dd
      m[r][unknowns] = (mulmod_u64(f, x_dd, q) + q - x_nd) % q;
    }

    // Gaussian elimination with partial pivoting by first non-zero entry.
    std::vector<int> pivot_row_of_col(unknowns, -1);
    size_t row = 0;
    for (size_t col = 0; col < unknowns && row < m.size(); ++col) {
      size_t pr = row;
      while (pr < m.size() && m[pr][col] == 0) ++pr;
      if (pr == m.size()) continue;  // free column
      std::swap(m[row], m[pr]);
      const uint64_t inv = detail::inv_mod(m[row][col], q);
      for (size_t j = col; j <= unknowns; ++j) m[row][j] = mulmod_u64(m[row][j], inv, q);
      for (size_t r2 = 0; r2 < m.size(); ++r2) {
        if (r2 == row || m[r2][col] == 0) continue;
        const uint64_t f = m[r2][col];
        for (size_t j = col; j <= unknowns; ++j) {
          m[r2][j] = (m[r2][j] + q - mulmod_u64(f, m[row][j], q)) % q;
        }
      }
      pivot_row_of_col[col] = static_cast<int>(row);
      ++row;
    }
    bool inconsistent = false;
    for (size_t r = row; r < m.size(); ++r) {
      if (m[r][unknowns] != 0) { inconsistent = true; break; }
    }
    if (inconsistent) continue;

    // Free variables take 0; pivot variables read off the reduced rows.
    std::vector<uint64_t> sol(unknowns, 0);
    for (size_t col = 0; col < unknowns; ++col) {
      if (pivot_row_of_col[col] >= 0) sol[col] = m[pivot_row_of_col[col]][unknowns];
    }
    FieldPoly num{q, std::vector<uint64_t>(sol.begin(), sol.begin() + nd)};
    num.c.push_back(1);
    num.trim();
    FieldPoly den{q, std::vector<uint64_t>(sol.begin() + nd, sol.end())};
    den.c.push_back(1);
    den.trim();

    FieldPoly g = poly_gcd(num, den);
    if (g.degree() > 0) {
      num = poly_div_exact(num, g);
      den = poly_div_exact(den, g);
    }
    return {num, den};
  }
  throw reconciliation_bound_error("no rational function within the degree bounds fits the samples");
}

}  // namespace distaudit::gf

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "distaudit/gf.hpp"
#include "distaudit/rng.hpp"

using namespace distaudit;
using gf::FieldPoly;

namespace {

// Evaluation oracle for rational functions.
uint64_t rational_eval(const gf::RationalFunction& f, uint64_t x) {
  const uint64_t den = f.denominator.eval(x);
  return mulmod_u64(f.numerator.eval(x), powmod_u64(den, f.numerator.q - 2, f.numerator.q),
                    f.numerator.q);
}

std::vector<uint64_t> distinct_elements(Rng& rng, uint64_t q, size_t count) {
  std::set<uint64_t> s;
  while (s.size() < count) s.insert(rng.uniform_below(q));
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("poly_gcd") {
  const uint64_t q = 83;
  SECTION("shared linear factor") {
    auto f = gf::poly_mul(FieldPoly::linear_root(q, 10), FieldPoly::linear_root(q, 25));
    auto g = gf::poly_mul(FieldPoly::linear_root(q, 25), FieldPoly::linear_root(q, 9));
    CHECK(gf::poly_gcd(f, g) == FieldPoly::linear_root(q, 25));
  }
  SECTION("gcd with zero is the monic input") {
    auto f = gf::poly_scale(FieldPoly::from_roots(q, {3, 7}), 5);
    CHECK(gf::poly_gcd(f, FieldPoly::zero(q)) == FieldPoly::from_roots(q, {3, 7}));
  }
  SECTION("modulus mismatch rejected") {
    CHECK_THROWS_AS(gf::poly_gcd(FieldPoly::constant(83, 1), FieldPoly::constant(47, 1)),
                    invalid_parameter_error);
  }
  SECTION("random pairs with a planted common factor") {
    Rng rng(41);
    for (int t = 0; t < 200; ++t) {
      auto roots = distinct_elements(rng, q, 5);
      FieldPoly planted = FieldPoly::from_roots(q, {roots[0], roots[1]});
      FieldPoly f = gf::poly_mul(planted, FieldPoly::from_roots(q, {roots[2]}));
      FieldPoly g = gf::poly_mul(planted, FieldPoly::from_roots(q, {roots[3], roots[4]}));
      auto d = gf::poly_gcd(f, g);
      // The planted factor divides the gcd (and here equals it).
      CHECK(gf::poly_divmod(d, planted).second.is_zero());
    }
  }
}

TEST_CASE("is_square_free") {
  const uint64_t q = 83;
  SECTION("product of three linear factors (Z-25)(Z-9)(Z-13)") {
    CHECK(gf::is_square_free(FieldPoly::from_roots(q, {25, 9, 13})));
  }
  SECTION("(Z-5)^2 is not") {
    CHECK_FALSE(gf::is_square_free(FieldPoly::from_roots(q, {5, 5})));
  }
  SECTION("zero polynomial rejected") {
    CHECK_THROWS_AS(gf::is_square_free(FieldPoly::zero(q)), invalid_parameter_error);
  }
  SECTION("random constructions") {
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
      auto roots = distinct_elements(rng, q, 4);
      CHECK(gf::is_square_free(FieldPoly::from_roots(q, roots)));
      auto doubled = roots;
      doubled.push_back(roots[0]);
      CHECK_FALSE(gf::is_square_free(FieldPoly::from_roots(q, doubled)));
    }
  }
}

TEST_CASE("splits_into_linear") {
  const uint64_t q = 83;
  SECTION("product of linear factors splits") {
    CHECK(gf::splits_into_linear(FieldPoly::from_roots(q, {25, 9, 13})));
  }
  SECTION("irreducible quadratic does not") {
    // Exhaustive-root-check oracle: smallest monic quadratic with no root.
    FieldPoly irq{q, {}};
    bool found = false;
    for (uint64_t c0 = 0; c0 < q && !found; ++c0) {
      for (uint64_t c1 = 0; c1 < q && !found; ++c1) {
        FieldPoly cand{q, {c0, c1, 1}};
        bool has_root = false;
        for (uint64_t x = 0; x < q; ++x) {
          if (cand.eval(x) == 0) {
            has_root = true;
            break;
          }
        }
        if (!has_root) {
          irq = cand;
          found = true;
        }
      }
    }
    REQUIRE(found);
    CHECK_FALSE(gf::splits_into_linear(irq));
    CHECK(gf::is_square_free(irq));
  }
  SECTION("f = Z splits") {
    CHECK(gf::splits_into_linear(FieldPoly{q, {0, 1}}));
  }
}

TEST_CASE("find_roots") {
  const uint64_t q = 83;
  Rng rng(99);
  SECTION("cubic Z^3+36Z^2+3Z+63 has roots {25,9,13}") {
    FieldPoly f{q, {63, 3, 36, 1}};
    CHECK(gf::find_roots(f, rng) == std::set<uint64_t>{9, 13, 25});
  }
  SECTION("linear Z+73 has root 10") {
    FieldPoly f{q, {73, 1}};
    CHECK(gf::find_roots(f, rng) == std::set<uint64_t>{10});
  }
  SECTION("Z - c for random c") {
    for (int t = 0; t < 20; ++t) {
      const uint64_t c = rng.uniform_below(q);
      CHECK(gf::find_roots(FieldPoly::linear_root(q, c), rng) == std::set<uint64_t>{c});
    }
  }
  SECTION("non-splitting input errors out") {
    FieldPoly f{q, {1, 0, 1}};  // Z^2 + 1; -1 is a non-residue mod 83
    CHECK_FALSE(gf::splits_into_linear(f));
    CHECK_THROWS_AS(gf::find_roots(f, rng), not_fully_splittable_error);
  }
  SECTION("random split polynomials across several fields") {
    for (uint64_t field : {47ull, 83ull, 257ull, 7919ull}) {
      for (int t = 0; t < 30; ++t) {
        auto roots = distinct_elements(rng, field, 1 + rng.uniform_below(6));
        auto f = FieldPoly::from_roots(field, roots);
        CHECK(gf::is_square_free(f));
        CHECK(gf::splits_into_linear(f));
        CHECK(gf::find_roots(f, rng) == std::set<uint64_t>(roots.begin(), roots.end()));
      }
    }
  }
}

TEST_CASE("interpolate_rational") {
  const uint64_t q = 83;
  SECTION("worked demo example over GF(83)") {
    std::vector<std::pair<uint64_t, uint64_t>> samples = {
        {82, 6}, {81, 18}, {80, 43}, {79, 10}, {78, 14}};  // points -1..-5 mod 83
    auto f = gf::interpolate_rational(samples, 5, -2, q);
    CHECK(f.numerator == FieldPoly{q, {73, 1}});
    CHECK(f.denominator == FieldPoly{q, {63, 3, 36, 1}});
  }
  SECTION("all-ones samples with d=0 reduce to 1/1") {
    std::vector<std::pair<uint64_t, uint64_t>> samples = {{82, 1}, {81, 1}, {80, 1}, {79, 1}};
    auto f = gf::interpolate_rational(samples, 4, 0, q);
    CHECK(f.numerator == FieldPoly::constant(q, 1));
    CHECK(f.denominator == FieldPoly::constant(q, 1));
  }
  SECTION("random disjoint root sets recovered via the evaluation oracle") {
    Rng rng(123);
    for (int t = 0; t < 50; ++t) {
      auto elems = distinct_elements(rng, 40, 4);  // keep clear of the sample points
      gf::RationalFunction truth{FieldPoly::from_roots(q, {elems[0]}),
                                 FieldPoly::from_roots(q, {elems[1], elems[2], elems[3]})};
      std::vector<std::pair<uint64_t, uint64_t>> samples;
      for (uint64_t k = 1; k <= 5; ++k) {
        const uint64_t x = q - k;
        samples.emplace_back(x, rational_eval(truth, x));
      }
      auto fitted = gf::interpolate_rational(samples, 5, -2, q);
      for (uint64_t x = 41; x < 61; ++x) {
        if (truth.denominator.eval(x) == 0 || fitted.denominator.eval(x) == 0) continue;
        CHECK(rational_eval(fitted, x) == rational_eval(truth, x));
      }
    }
  }
  SECTION("duplicate points rejected") {
    std::vector<std::pair<uint64_t, uint64_t>> samples = {{82, 6}, {82, 18}};
    CHECK_THROWS_AS(gf::interpolate_rational(samples, 2, 0, q), invalid_parameter_error);
  }
}

TEST_CASE("field ring axioms, spot checks") {
  Rng rng(1);
  for (uint64_t q : {83ull, 7919ull}) {
    for (int t = 0; t < 50; ++t) {
      const uint64_t a = rng.uniform_below(q), b = rng.uniform_below(q), c = rng.uniform_below(q);
      CHECK(mulmod_u64(a, mulmod_u64(b, c, q), q) == mulmod_u64(mulmod_u64(a, b, q), c, q));
      CHECK(mulmod_u64(a, (b + c) % q, q) == (mulmod_u64(a, b, q) + mulmod_u64(a, c, q)) % q);
      if (a != 0) {
        CHECK(mulmod_u64(a, gf::detail::inv_mod(a, q), q) == 1);
      }
    }
  }
}

TEST_CASE("poly arithmetic round trips") {
  Rng rng(8);
  const uint64_t q = 257;
  for (int t = 0; t < 50; ++t) {
    auto a = FieldPoly::from_roots(q, distinct_elements(rng, q, 3));
    auto b = FieldPoly::from_roots(q, distinct_elements(rng, q, 2));
    auto [quot, rem] = gf::poly_divmod(gf::poly_add(gf::poly_mul(a, b), FieldPoly::constant(q, 7)), b);
    CHECK(gf::poly_add(gf::poly_mul(quot, b), rem) ==
          gf::poly_add(gf::poly_mul(a, b), FieldPoly::constant(q, 7)));
  }
}

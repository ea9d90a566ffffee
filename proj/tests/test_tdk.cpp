#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "distaudit/rng.hpp"
#include "distaudit/sobol.hpp"
#include "distaudit/tdk.hpp"

using namespace distaudit;
using tdk::TaskDistributionKey;
using tdk::TDKSet;

namespace {

const std::vector<uint64_t> kDemoSeq = {1216, 5312, 3264, 7360, 704, 4800, 2752, 6848, 1728};

}  // namespace

TEST_CASE("interpret applies the mask as a sliding tile") {
  SECTION("10101 on the worked sequence") {
    TaskDistributionKey key{"10101", 0};
    CHECK(tdk::interpret(key, kDemoSeq) == std::vector<uint64_t>{1216, 3264, 704, 4800, 6848});
  }
  SECTION("01010 on the worked sequence") {
    TaskDistributionKey key{"01010", 1};
    CHECK(tdk::interpret(key, kDemoSeq) == std::vector<uint64_t>{5312, 7360, 2752, 1728});
  }
  SECTION("all ones selects the whole sequence") {
    TaskDistributionKey key{"111", 0};
    CHECK(tdk::interpret(key, kDemoSeq) == kDemoSeq);
  }
  SECTION("sequence shorter than the key uses the prefix bits") {
    TaskDistributionKey key{"1001101", 0};
    std::vector<uint64_t> seq = {10, 20, 30};
    CHECK(tdk::interpret(key, seq) == std::vector<uint64_t>{10});
  }
}

TEST_CASE("adjust_length") {
  CHECK(tdk::adjust_length(16, 1ull << 20) == 17);
  CHECK(tdk::adjust_length(17, 1ull << 20) == 17);
  CHECK(tdk::adjust_length(17, 1ull << 12) == 17);
  SECTION("gcd oracle across a range") {
    Rng rng(15);
    for (int t = 0; t < 200; ++t) {
      const uint64_t len = 1 + rng.uniform_below(200);
      const uint64_t seq_len = 1 + rng.uniform_below(1 << 20);
      const uint64_t adj = tdk::adjust_length(len, seq_len);
      CHECK(std::gcd(adj, seq_len) == 1);
      CHECK(adj >= len);
      for (uint64_t x = len; x < adj; ++x) CHECK(std::gcd(x, seq_len) != 1);
    }
  }
  SECTION("90-bit keys against a 20% sample of a 4M store") {
    const uint64_t seq_len = 838860;  // 20% of 4,194,304
    CHECK(std::gcd<uint64_t>(90, seq_len) != 1);
    CHECK(tdk::adjust_length(90, seq_len) == 91);
  }
}

TEST_CASE("generate_nonoverlapping") {
  Rng rng(2);
  SECTION("4 keys, 4 ones, power-of-two sample extends 16 to 17") {
    auto set = tdk::generate_nonoverlapping(4, 4, 1 << 14, rng);
    CHECK(set.base_len == 16);
    REQUIRE(set.keys.size() == 4);
    for (auto& k : set.keys) {
      CHECK(k.length() == 17);
      CHECK(k.popcount() == 4);
      CHECK(k.bits[16] == '0');  // the extension position stays zero
    }
    // Pairwise disjoint and total coverage of the base positions.
    for (size_t i = 0; i < 4; ++i) {
      for (size_t j = i + 1; j < 4; ++j) {
        for (size_t p = 0; p < 17; ++p) {
          CHECK_FALSE((set.keys[i].bits[p] == '1' && set.keys[j].bits[p] == '1'));
        }
      }
    }
    size_t covered = 0;
    for (size_t p = 0; p < 16; ++p) {
      for (auto& k : set.keys) covered += k.bits[p] == '1';
    }
    CHECK(covered == 16);
  }
  SECTION("n=1, t=1 gives the key \"1\"") {
    auto set = tdk::generate_nonoverlapping(1, 1, 64, rng);
    REQUIRE(set.keys.size() == 1);
    CHECK(set.keys[0].bits == "1");
  }
  SECTION("coprime base length is kept unadjusted") {
    auto set = tdk::generate_nonoverlapping(3, 5, 1 << 10, rng);
    CHECK(set.keys[0].length() == 15);
  }
}

TEST_CASE("non-overlapping completeness and disjointness under interpret") {
  // With an unadjusted full-coverage permutation the per-key selections
  // partition every tile, hence the whole sequence.
  Rng rng(77);
  sobol::SobolKey key;
  key.poly = {3, 0b1011};
  key.init_m = {1, 3, 7};
  key.constant = 1 << 10;
  key.seq_len = 300;
  auto seq = sobol::generate(key);

  auto unadjusted = tdk::generate_nonoverlapping(3, 5, 301, rng);  // gcd(15, 301) = 1
  REQUIRE(unadjusted.keys[0].length() == 15);

  std::multiset<uint64_t> all_selected;
  std::vector<std::set<uint64_t>> position_sets;
  for (auto& k : unadjusted.keys) {
    auto positions = tdk::interpret_positions(k, seq.size());
    position_sets.emplace_back(positions.begin(), positions.end());
    for (auto v : tdk::interpret(k, seq.indices)) all_selected.insert(v);
  }
  CHECK(all_selected == std::multiset<uint64_t>(seq.begin(), seq.end()));
  for (size_t i = 0; i < position_sets.size(); ++i) {
    for (size_t j = i + 1; j < position_sets.size(); ++j) {
      std::vector<uint64_t> inter;
      std::set_intersection(position_sets[i].begin(), position_sets[i].end(), position_sets[j].begin(),
                            position_sets[j].end(), std::back_inserter(inter));
      CHECK(inter.empty());
    }
  }
}

TEST_CASE("generate_overlapping") {
  Rng rng(11);
  auto base = tdk::generate_nonoverlapping(4, 4, 17, rng);  // gcd(16,17)=1, stays 16 bits
  REQUIRE(base.keys[0].length() == 16);

  SECTION("20% overlap places 4 extra ones and creates shared positions") {
    auto over = tdk::generate_overlapping(base, 20.0, rng);
    size_t base_ones = 0, over_ones = 0, shared_positions = 0;
    for (size_t p = 0; p < 16; ++p) {
      size_t cover = 0;
      for (size_t k = 0; k < 4; ++k) {
        base_ones += base.keys[k].bits[p] == '1';
        cover += over.keys[k].bits[p] == '1';
      }
      over_ones += cover;
      if (cover >= 2) ++shared_positions;
    }
    CHECK(base_ones == 16);
    CHECK(over_ones == 20);  // 4 extra ones placed
    CHECK(shared_positions >= 1);
    // Base bits retained.
    for (size_t k = 0; k < 4; ++k) {
      for (size_t p = 0; p < 16; ++p) {
        if (base.keys[k].bits[p] == '1') CHECK(over.keys[k].bits[p] == '1');
      }
    }
  }
  SECTION("0% overlap is the identity") {
    auto over = tdk::generate_overlapping(base, 0.0, rng);
    for (size_t k = 0; k < 4; ++k) CHECK(over.keys[k].bits == base.keys[k].bits);
  }
  SECTION("per-key mode gives every key the requested extras") {
    auto over = tdk::generate_overlapping(base, 25.0, rng, tdk::OverlapMode::PerKey);
    for (size_t k = 0; k < 4; ++k) CHECK(over.keys[k].popcount() == 4 + 4);
  }
  SECTION("overlap beyond the available zeros rejected") {
    auto tiny = tdk::generate_nonoverlapping(2, 2, 5, rng);
    CHECK_THROWS_AS(tdk::generate_overlapping(tiny, 100.0, rng, tdk::OverlapMode::PerKey),
                    invalid_parameter_error);
  }
  SECTION("randomized bit-count oracle") {
    Rng r2(400);
    for (int t = 0; t < 40; ++t) {
      const uint32_t n = 2 + static_cast<uint32_t>(r2.uniform_below(5));
      const uint32_t ones = 2 + static_cast<uint32_t>(r2.uniform_below(4));
      auto b = tdk::generate_nonoverlapping(n, ones, (n * ones) + 1, r2);
      const double pct = 10.0 + static_cast<double>(r2.uniform_below(20));
      auto o = tdk::generate_overlapping(b, pct, r2);
      size_t before = 0, after = 0;
      for (size_t k = 0; k < n; ++k) {
        before += b.keys[k].popcount();
        after += o.keys[k].popcount();
      }
      const uint64_t want = static_cast<uint64_t>(
          std::ceil(pct * static_cast<double>(b.keys[0].length()) / 100.0 - 1e-9));
      CHECK(after == before + want);
    }
  }
}

TEST_CASE("TDK validation") {
  Rng rng(1);
  CHECK_THROWS_AS((TaskDistributionKey{"0000", 0}).validate(), invalid_parameter_error);
  CHECK_THROWS_AS((TaskDistributionKey{"01a1", 0}).validate(), invalid_parameter_error);
  CHECK_THROWS_AS((TaskDistributionKey{"", 0}).validate(), invalid_parameter_error);
  CHECK_THROWS_AS(tdk::generate_nonoverlapping(0, 1, 10, rng), invalid_parameter_error);
}

TEST_CASE("coprime-adjusted keys keep every subtask near-uniform") {
  // The provable half of the uniformity claim: with the key length coprime to
  // the sequence length, every agent's selections stay balanced across the
  // four block-range segments (no segment starves, max/min ratio bounded).
  const unsigned kSeeds = 20;
  double ratio_sum = 0.0;
  uint64_t samples = 0;
  for (unsigned seed = 0; seed < kSeeds; ++seed) {
    Rng rng(900 + seed);
    sobol::SobolKey key;
    auto polys = sobol::enumerate_primitive_polynomials(6);
    key.poly = polys[rng.uniform_below(polys.size())];
    key.init_m.resize(6);
    for (unsigned i = 0; i < 6; ++i) key.init_m[i] = 2 * rng.uniform_below(1ull << i) + 1;
    key.constant = 1 << 16;
    key.seq_len = 1 << 12;
    auto seq = sobol::generate(key);

    auto adjusted = tdk::generate_nonoverlapping(4, 4, key.seq_len, rng);  // 16 -> 17
    REQUIRE(adjusted.keys[0].length() == 17);
    for (auto& k : adjusted.keys) {
      std::array<uint64_t, 4> seg{0, 0, 0, 0};
      for (uint64_t v : tdk::interpret(k, seq.indices)) seg[v / (key.constant / 4)]++;
      const uint64_t mx = *std::max_element(seg.begin(), seg.end());
      const uint64_t mn = *std::min_element(seg.begin(), seg.end());
      REQUIRE(mn > 0);
      ratio_sum += static_cast<double>(mx) / static_cast<double>(mn);
      ++samples;
    }
  }
  const double mean_ratio = ratio_sum / static_cast<double>(samples);
  INFO("mean 4-segment max/min ratio for adjusted keys: " << mean_ratio);
  CHECK(mean_ratio < 1.5);
}

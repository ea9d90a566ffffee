#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "distaudit/analysis.hpp"
#include "distaudit/audit.hpp"
#include "distaudit/cloudsim.hpp"
#include "distaudit/rng.hpp"
#include "distaudit/sobol.hpp"

using namespace distaudit;
using analysis::TrialMatrix;
using Catch::Approx;

namespace {

// 30 SUBTPAs x 12 trials of detected-error counts from a 4M-block, 1%-error,
// 20%-sample protocol run; row averages and the per-trial totals are known.
const uint64_t kReport30x12[30][12] = {
    {286, 286, 275, 289, 292, 270, 252, 280, 251, 287, 269, 273},
    {314, 314, 290, 274, 286, 266, 289, 256, 274, 272, 304, 271},
    {269, 269, 268, 273, 272, 299, 293, 276, 292, 307, 287, 290},
    {279, 279, 272, 274, 275, 273, 280, 278, 279, 281, 283, 288},
    {279, 279, 276, 292, 284, 275, 293, 283, 260, 299, 270, 311},
    {292, 292, 256, 278, 273, 281, 308, 284, 287, 299, 277, 282},
    {266, 266, 279, 253, 282, 300, 260, 293, 308, 325, 277, 281},
    {288, 288, 287, 267, 283, 308, 289, 288, 263, 262, 260, 286},
    {251, 251, 271, 306, 309, 278, 281, 256, 295, 241, 279, 274},
    {280, 280, 291, 289, 266, 290, 293, 279, 272, 297, 271, 272},
    {284, 284, 286, 281, 288, 279, 278, 269, 287, 245, 279, 299},
    {286, 286, 257, 273, 291, 280, 283, 276, 271, 304, 283, 255},
    {262, 262, 295, 277, 283, 267, 302, 257, 292, 271, 261, 279},
    {284, 284, 297, 277, 284, 296, 273, 270, 274, 276, 296, 261},
    {305, 305, 287, 259, 313, 259, 286, 288, 259, 281, 285, 298},
    {270, 270, 298, 278, 265, 269, 283, 296, 259, 280, 256, 281},
    {290, 290, 302, 271, 295, 272, 244, 277, 278, 244, 306, 294},
    {270, 270, 291, 279, 282, 293, 312, 315, 304, 289, 310, 292},
    {288, 288, 252, 284, 308, 275, 320, 270, 289, 277, 285, 285},
    {268, 268, 282, 259, 304, 302, 279, 257, 281, 261, 279, 295},
    {299, 299, 275, 295, 276, 287, 256, 271, 287, 282, 273, 281},
    {267, 267, 289, 285, 287, 282, 281, 281, 297, 292, 291, 276},
    {265, 265, 273, 257, 279, 301, 266, 263, 284, 288, 312, 298},
    {253, 253, 273, 305, 268, 287, 292, 282, 282, 238, 306, 277},
    {284, 284, 277, 308, 282, 268, 255, 302, 285, 314, 287, 279},
    {301, 301, 282, 282, 282, 308, 282, 277, 297, 276, 290, 274},
    {283, 283, 251, 283, 269, 273, 297, 260, 284, 307, 270, 273},
    {284, 284, 291, 274, 273, 275, 282, 304, 293, 306, 311, 267},
    {291, 291, 288, 293, 300, 284, 230, 255, 247, 273, 267, 276},
    {305, 305, 251, 310, 270, 267, 287, 298, 292, 284, 275, 270},
};

const double kRowAverages[30] = {275.83, 284.17, 282.92, 278.42, 283.42, 284.08, 282.5,  280.75,
                                 274.33, 281.67, 279.92, 278.75, 275.67, 281.0,  285.42, 275.42,
                                 280.25, 292.25, 285.08, 277.92, 281.75, 282.92, 279.25, 276.33,
                                 285.42, 287.67, 277.75, 287.0,  274.58, 284.5};
const uint64_t kColumnTotals[12] = {8443, 8443, 8362, 8425, 8521, 8464, 8426, 8341, 8423, 8458, 8499, 8438};

TrialMatrix report_matrix() {
  TrialMatrix m = TrialMatrix::zeros(30, 12);
  for (size_t r = 0; r < 30; ++r) {
    for (size_t c = 0; c < 12; ++c) m.at(r, c) = kReport30x12[r][c];
  }
  return m;
}

}  // namespace

TEST_CASE("summarize reproduces the 12-trial report aggregates") {
  auto m = report_matrix();
  auto rows = analysis::summarize(m);
  REQUIRE(rows.size() == 30);
  for (size_t r = 0; r < 30; ++r) {
    CHECK(rows[r].mean == Approx(kRowAverages[r]).margin(0.005));
  }
  CHECK(rows[0].max == 292);
  CHECK(rows[0].min == 251);
  CHECK(rows[18].max == 320);
  CHECK(rows[28].min == 230);
  auto totals = m.column_totals();
  for (size_t c = 0; c < 12; ++c) CHECK(totals[c] == kColumnTotals[c]);
}

TEST_CASE("summarize basics") {
  SECTION("constant row has zero spread") {
    TrialMatrix m = TrialMatrix::zeros(1, 5);
    for (size_t c = 0; c < 5; ++c) m.at(0, c) = 42;
    auto rows = analysis::summarize(m);
    CHECK(rows[0].max == 42);
    CHECK(rows[0].min == 42);
    CHECK(rows[0].mean == 42.0);
    CHECK(rows[0].stddev == 0.0);
  }
  SECTION("random matrices match a two-pass oracle") {
    Rng rng(17);
    for (int t = 0; t < 30; ++t) {
      TrialMatrix m = TrialMatrix::zeros(4, 25);
      for (auto& cell : m.cells) cell = rng.uniform_below(200);
      auto rows = analysis::summarize(m);
      for (size_t r = 0; r < 4; ++r) {
        double sum = 0;
        for (size_t c = 0; c < 25; ++c) sum += static_cast<double>(m.at(r, c));
        const double mean = sum / 25.0;
        double sq = 0;
        for (size_t c = 0; c < 25; ++c) {
          sq += (static_cast<double>(m.at(r, c)) - mean) * (static_cast<double>(m.at(r, c)) - mean);
        }
        CHECK(rows[r].mean == Approx(mean).margin(1e-9));
        CHECK(rows[r].stddev == Approx(std::sqrt(sq / 25.0)).margin(1e-9));
        CHECK(static_cast<double>(rows[r].min) <= rows[r].mean);
        CHECK(rows[r].mean <= static_cast<double>(rows[r].max));
      }
    }
  }
  SECTION("empty matrix rejected") {
    CHECK_THROWS_AS(analysis::summarize(TrialMatrix::zeros(0, 0)), invalid_parameter_error);
  }
}

TEST_CASE("fit_line reproduces the two published lines") {
  SECTION("pseudo-random run: y = 0.00076x + 41.99834") {
    auto line = analysis::fit_from_sums(2686700.0, 20100.0, 846216.0, 8415.0, 200.0);
    CHECK(std::round(line.slope * 1e5) / 1e5 == Approx(0.00076));
    CHECK(std::round(line.intercept * 1e5) / 1e5 == Approx(41.99834));
  }
  SECTION("sobol run: y = -0.001x + 42.44548") {
    auto line = analysis::fit_from_sums(2686700.0, 20100.0, 850468.0, 8469.0, 200.0);
    CHECK(std::round(line.slope * 1e5) / 1e5 == Approx(-0.00100));
    CHECK(std::round(line.intercept * 1e5) / 1e5 == Approx(42.44548));
  }
  SECTION("collinear points have zero residual") {
    std::vector<std::pair<double, double>> pts;
    for (int x = 1; x <= 10; ++x) pts.emplace_back(x, 3.0 * x + 2.0);
    auto line = analysis::fit_line(pts);
    CHECK(line.slope == Approx(3.0));
    CHECK(line.intercept == Approx(2.0));
    CHECK(analysis::mean_squared_residual(pts, line) == Approx(0.0).margin(1e-18));
  }
  SECTION("degenerate x rejected") {
    std::vector<std::pair<double, double>> pts = {{2.0, 1.0}, {2.0, 5.0}, {2.0, 9.0}};
    CHECK_THROWS_AS(analysis::fit_line(pts), singular_fit_error);
    CHECK_THROWS_AS(analysis::fit_line({{1.0, 1.0}}), singular_fit_error);
  }
}

TEST_CASE("dispersion_compare") {
  auto m = report_matrix();
  SECTION("identical matrices tie") {
    auto rep = analysis::dispersion_compare(m, m);
    CHECK(rep.smaller == 0);
    CHECK(rep.residual_a == rep.residual_b);
  }
  SECTION("adding an outlier inflates that side's residual") {
    auto outlier = m;
    for (size_t c = 0; c < outlier.n_trials; ++c) outlier.at(7, c) += 300;
    auto rep = analysis::dispersion_compare(m, outlier);
    CHECK(rep.smaller == -1);
    CHECK(rep.residual_b > rep.residual_a);
  }
  SECTION("shape mismatch rejected") {
    CHECK_THROWS_AS(analysis::dispersion_compare(m, TrialMatrix::zeros(2, 2)), invalid_parameter_error);
  }
}

TEST_CASE("bucket_by_mean groups SUBTPAs by integer-rounded mean") {
  TrialMatrix m = TrialMatrix::zeros(3, 2);
  m.at(0, 0) = 40;
  m.at(0, 1) = 42;  // mean 41
  m.at(1, 0) = 41;
  m.at(1, 1) = 41;  // mean 41
  m.at(2, 0) = 50;
  m.at(2, 1) = 51;  // mean 50.5 -> 51
  auto buckets = analysis::bucket_by_mean(m);
  REQUIRE(buckets.size() == 2);
  CHECK(buckets.at(41) == std::vector<uint32_t>{1, 2});
  CHECK(buckets.at(51) == std::vector<uint32_t>{3});
}

TEST_CASE("report CSV round trip") {
  std::stringstream report;
  report << "trial,subtpa,packet,checked,mismatches,first_error_packet,signals\n";
  // trial 1: subtpa 1 detects 3+2, subtpa 2 detects 1; trial 2: 0 and 4.
  report << "1,1,1,100,3,1,1\n1,1,2,100,2,1,1\n1,2,1,100,1,1,1\n";
  report << "2,1,1,100,0,0,0\n2,2,1,100,4,1,1\n";
  auto m = analysis::read_report_csv(report);
  REQUIRE(m.n_subtpas == 2);
  REQUIRE(m.n_trials == 2);
  CHECK(m.at(0, 0) == 5);
  CHECK(m.at(1, 0) == 1);
  CHECK(m.at(0, 1) == 0);
  CHECK(m.at(1, 1) == 4);

  std::stringstream summary;
  analysis::write_summary_csv(summary, analysis::summarize(m));
  CHECK(summary.str().find("subtpa,max,min,mean,stddev") == 0);
  CHECK(summary.str().find("1,5,0,2.5000") != std::string::npos);

  std::stringstream bad;
  bad << "trial,subtpa\n";
  CHECK_THROWS_AS(analysis::read_report_csv(bad), invalid_parameter_error);
}

TEST_CASE("fit JSON carries slope, intercept, residual") {
  auto j = analysis::fit_to_json({0.5, 2.0}, 0.25);
  CHECK(j.at("A") == 0.5);
  CHECK(j.at("B") == 2.0);
  CHECK(j.at("residual") == 0.25);
}

TEST_CASE("gnuplot data file carries x, y, and the fitted value") {
  std::vector<std::pair<double, double>> pts = {{1.0, 2.0}, {2.0, 4.0}, {3.0, 6.0}};
  auto line = analysis::fit_line(pts);
  std::stringstream out;
  analysis::write_gnuplot_data(out, pts, line);
  std::string s = out.str();
  CHECK(s.rfind("# x y fit\n", 0) == 0);
  CHECK(s.find("1.000000 2.000000 2.000000") != std::string::npos);
  CHECK(s.find("3.000000 6.000000 6.000000") != std::string::npos);
}

TEST_CASE("sobol-driven runs sit nearer their fitted line than pseudo-random runs") {
  // Paired experiment: the same audits driven by a Sobol sequence versus a
  // uniform pseudo-random sequence (duplicates allowed, as a plain PRNG block
  // generator would emit). Distinct-block detection counts feed one trial
  // matrix each; the mean squared residual about the per-agent-mean fit line
  // must come out smaller on the Sobol side in aggregate.
  const uint64_t blocks = 1 << 16;
  const uint32_t agents = 10;
  const uint64_t seq_len = 13107;  // 20% sample
  const size_t trials = 25;
  auto scenario = cloudsim::provision(blocks, 32, 91);

  double residual_sobol = 0.0, residual_random = 0.0;
  const int pairs = 20;
  Rng rng(0xd15be);
  for (int pair = 0; pair < pairs; ++pair) {
    TrialMatrix sob = TrialMatrix::zeros(agents, trials);
    TrialMatrix ran = TrialMatrix::zeros(agents, trials);
    for (size_t t = 0; t < trials; ++t) {
      cloudsim::CorruptionPlan plan;
      plan.fraction = 0.01;
      plan.seed = rng.next_u64();
      scenario.store.unseal();
      cloudsim::inject_errors(scenario.store, plan);
      scenario.store.seal();

      auto polys = sobol::enumerate_primitive_polynomials(8);
      sobol::SobolKey key;
      key.poly = polys[rng.uniform_below(polys.size())];
      key.init_m.resize(8);
      for (unsigned i = 0; i < 8; ++i) key.init_m[i] = 2 * rng.uniform_below(1ull << i) + 1;
      key.constant = blocks;
      key.seq_len = seq_len;

      sobol::BlockSequence prng_seq;
      prng_seq.indices.resize(seq_len);
      for (auto& v : prng_seq.indices) v = rng.uniform_below(blocks);

      audit::ThresholdConfig threshold{agents, agents};
      auto sob_outcome = audit::run_protocol1(scenario, key, threshold);
      auto ran_outcome = audit::run_partitioned_audit(scenario, prng_seq, threshold);
      for (uint32_t a = 0; a < agents; ++a) {
        std::set<uint64_t> ds(sob_outcome.detected_blocks[a].begin(),
                              sob_outcome.detected_blocks[a].end());
        std::set<uint64_t> dr(ran_outcome.detected_blocks[a].begin(),
                              ran_outcome.detected_blocks[a].end());
        sob.at(a, t) = ds.size();
        ran.at(a, t) = dr.size();
      }
    }
    auto rep = analysis::dispersion_compare(sob, ran);
    residual_sobol += rep.residual_a;
    residual_random += rep.residual_b;
  }
  INFO("mean residuals: sobol " << residual_sobol / pairs << ", random " << residual_random / pairs);
  CHECK(residual_sobol < residual_random);
}

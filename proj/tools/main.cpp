// Command-line front end: gen-sobol, gf-roots, recon-demo, audit, analyze.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "distaudit/analysis.hpp"
#include "distaudit/audit.hpp"
#include "distaudit/cloudsim.hpp"
#include "distaudit/errors.hpp"
#include "distaudit/experiment.hpp"
#include "distaudit/gf.hpp"
#include "distaudit/setrecon.hpp"
#include "distaudit/sobol.hpp"
#include "distaudit/strrecon.hpp"

namespace {

using namespace distaudit;

std::vector<uint64_t> parse_u64_list(const std::string& csv) {
  std::vector<uint64_t> out;
  std::istringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

int cmd_gen_sobol(unsigned degree, int64_t poly_index, const std::string& init_csv, uint64_t constant,
                  uint64_t len, uint64_t skip, uint64_t leap, const std::string& format) {
  auto polys = sobol::enumerate_primitive_polynomials(degree);
  if (poly_index < 0 || static_cast<size_t>(poly_index) >= polys.size()) {
    throw invalid_parameter_error("poly index out of range; degree " + std::to_string(degree) + " has " +
                                  std::to_string(polys.size()) + " primitive polynomials");
  }
  sobol::SobolKey key;
  key.poly = polys[static_cast<size_t>(poly_index)];
  key.init_m = parse_u64_list(init_csv);
  if (key.init_m.empty()) key.init_m.assign(degree, 1);
  key.constant = constant;
  key.seq_len = len;
  key.skip = skip;
  key.leap = leap;
  auto seq = sobol::generate(key);
  if (format == "json") {
    nlohmann::json j = seq.indices;
    std::cout << j.dump() << '\n';
  } else {
    for (uint64_t v : seq.indices) std::cout << v << '\n';
  }
  return 0;
}

int cmd_gf_roots(uint64_t q, const std::string& coeff_csv, uint64_t seed) {
  gf::FieldPoly poly{q, parse_u64_list(coeff_csv)};
  poly.trim();
  poly = gf::poly_monic(poly);
  if (!gf::is_square_free(poly)) {
    std::cout << "not square-free\n";
    return 1;
  }
  if (!gf::splits_into_linear(poly)) {
    std::cout << "does not split into linear factors over GF(" << q << ")\n";
    return 1;
  }
  Rng rng(seed);
  for (uint64_t r : gf::find_roots(poly, rng)) std::cout << r << '\n';
  return 0;
}

void print_multiset(const strrecon::PieceMultiset& ms, const std::string& name) {
  std::cout << name << " = { ";
  bool first = true;
  for (auto& [piece, count] : ms.counts) {
    for (uint32_t i = 0; i < count; ++i) {
      if (!first) std::cout << ", ";
      std::cout << piece;
      first = false;
    }
  }
  std::cout << " }\n";
}

void print_set(const std::set<uint64_t>& s, const std::string& name) {
  std::cout << name << " = { ";
  bool first = true;
  for (uint64_t v : s) {
    if (!first) std::cout << ", ";
    std::cout << v;
    first = false;
  }
  std::cout << " }\n";
}

std::string poly_to_string(const gf::FieldPoly& p) {
  if (p.is_zero()) return "0";
  std::string s;
  for (size_t i = p.c.size(); i-- > 0;) {
    if (p.c[i] == 0) continue;
    if (!s.empty()) s += " + ";
    if (i == 0) {
      s += std::to_string(p.c[i]);
    } else {
      if (p.c[i] != 1) s += std::to_string(p.c[i]);
      s += "Z";
      if (i > 1) s += "^" + std::to_string(i);
    }
  }
  return s;
}

int cmd_recon_demo(const std::string& a, const std::string& b, unsigned mask_len, uint64_t m_bar,
                   uint64_t q, std::optional<uint64_t> modulus) {
  auto demo = experiment::run_recon_demo(a, b, mask_len, m_bar, q, modulus);

  std::cout << "sigma_A = " << a << "\nsigma_B = " << b << "\n\n";
  print_multiset(demo.recon.host_a.ms, "MS_A");
  print_multiset(demo.recon.host_b.ms, "MS_B");

  std::cout << "\nHost A Eulerian cycles (raw " << demo.recon.host_a.counts.raw << ", distinct "
            << demo.recon.host_a.counts.distinct << "):\n";
  for (size_t i = 0; i < demo.cycles_a.size(); ++i) {
    std::cout << "Cycle:" << (i + 1) << ": " << demo.cycles_a[i] << '\n';
  }
  std::cout << "Host B Eulerian cycles (raw " << demo.recon.host_b.counts.raw << ", distinct "
            << demo.recon.host_b.counts.distinct << "):\n";
  for (size_t i = 0; i < demo.cycles_b.size(); ++i) {
    std::cout << "Cycle:" << (i + 1) << ": " << demo.cycles_b[i] << '\n';
  }
  std::cout << "n_A = " << demo.recon.host_a.cycle_index << ", n_B = " << demo.recon.host_b.cycle_index
            << "\n\n";

  print_set(demo.recon.host_a.enc.values, "S_A");
  print_set(demo.recon.host_b.enc.values, "S_B");

  std::cout << "\nCharacteristic polynomial evaluations over GF(" << q << "):\n";
  auto print_evals = [](const setrecon::CharPolyEvaluations& ev, const std::string& name) {
    std::cout << name << ": ";
    for (auto& [p, v] : ev.pairs) std::cout << "(" << p << "," << v << ") ";
    std::cout << " |S| = " << ev.cardinality << '\n';
  };
  print_evals(demo.evals_a, "chi_A");
  print_evals(demo.evals_b, "chi_B");

  std::cout << "ratio chi_A/chi_B: ";
  for (uint64_t v : demo.ratio_values) std::cout << v << ' ';
  std::cout << "\n\nInterpolated rational function:\n  (" << poly_to_string(demo.fitted.numerator)
            << ") / (" << poly_to_string(demo.fitted.denominator) << ")\n";
  print_set(demo.recon.only_in_a, "S_A \\ S_B");
  print_set(demo.recon.only_in_b, "S_B \\ S_A");

  std::cout << "\nA learns sigma_B = " << demo.recon.a_learns << '\n';
  std::cout << "B learns sigma_A = " << demo.recon.b_learns << '\n';
  std::cout << "exchange: " << demo.recon.stats.eval_pairs << " evaluation pairs, "
            << demo.recon.stats.pieces << " pieces, " << demo.recon.stats.indices << " indices\n";
  std::cout << (demo.round_trip_ok ? "round trip OK" : "ROUND TRIP FAILED") << '\n';
  return demo.round_trip_ok ? 0 : 1;
}

int cmd_analyze(const std::string& report, const std::string& summary, const std::string& fit,
                const std::string& buckets, const std::string& gnuplot) {
  std::ifstream is(report);
  if (!is) throw config_error("cannot open report '" + report + "'");
  auto matrix = analysis::read_report_csv(is);
  auto rows = analysis::summarize(matrix);
  if (!summary.empty()) {
    std::ofstream os(summary);
    analysis::write_summary_csv(os, rows);
  }
  if (matrix.n_subtpas >= 2) {
    auto pts = analysis::mean_points(matrix);
    auto line = analysis::fit_line(pts);
    const double residual = analysis::mean_squared_residual(pts, line);
    if (!fit.empty()) {
      std::ofstream os(fit);
      os << analysis::fit_to_json(line, residual).dump(2) << '\n';
    }
    if (!gnuplot.empty()) {
      std::ofstream os(gnuplot);
      analysis::write_gnuplot_data(os, pts, line);
    }
    std::cout << "fit: y = " << line.slope << "x + " << line.intercept << " (msr " << residual << ")\n";
  }
  if (!buckets.empty()) {
    std::ofstream os(buckets);
    analysis::write_buckets_csv(os, analysis::bucket_by_mean(matrix));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed cloud-storage integrity audit toolkit"};
  app.require_subcommand(1);

  // gen-sobol
  auto* gen = app.add_subcommand("gen-sobol", "Generate a Sobol block-number sequence");
  unsigned degree = 3;
  int64_t poly_index = 0;
  std::string init_csv;
  uint64_t constant = 64, len = 13, skip = 0, leap = 0;
  std::string format = "lines";
  gen->add_option("--degree", degree, "primitive polynomial degree")->required();
  gen->add_option("--poly-index", poly_index, "index into the degree's polynomial list (ascending)");
  gen->add_option("--init", init_csv, "comma-separated m_1..m_d (default all ones)");
  gen->add_option("--constant", constant, "power-of-two block count scale")->required();
  gen->add_option("--len", len, "sequence length")->required();
  gen->add_option("--skip", skip, "initial points to discard");
  gen->add_option("--leap", leap, "points skipped between kept points");
  gen->add_option("--format", format, "lines|json");

  // gf-roots
  auto* roots = app.add_subcommand("gf-roots", "Find the roots of a polynomial over GF(q)");
  uint64_t q = 83, root_seed = 1;
  std::string coeff_csv;
  roots->add_option("--q", q, "prime field modulus")->required();
  roots->add_option("--poly", coeff_csv, "coefficients, lowest degree first")->required();
  roots->add_option("--seed", root_seed, "seed for the probabilistic splitting");

  // recon-demo
  auto* demo = app.add_subcommand("recon-demo", "Run a string reconciliation end to end, printing every step");
  std::string host_a = "10010101", host_b = "101101001";
  unsigned mask_len = 3;
  uint64_t m_bar = 5, demo_q = 83;
  int64_t modulus = 47;
  demo->add_option("--a", host_a, "host A's binary string");
  demo->add_option("--b", host_b, "host B's binary string");
  demo->add_option("--mask-len", mask_len, "piece mask length");
  demo->add_option("--mbar", m_bar, "difference upper bound");
  demo->add_option("--q", demo_q, "reconciliation field modulus");
  demo->add_option("--modulus", modulus, "piece hash modulus; 0 for the injective encoding");

  // audit
  auto* aud = app.add_subcommand("audit", "Run an audit experiment and write its report");
  std::string scenario_path, config_path;
  int protocol = 1;
  uint32_t subtpas = 4, threshold_m = 0, tdk_ones = 3, trials = 1;
  double sample_pct = 20.0, overlap_pct = 0.0;
  uint64_t near_range = 0, seed = 0;
  std::string out_report, out_summary, out_fit, out_buckets, out_gnuplot;
  std::string stop_policy = "complete", mode = "sequential";
  bool distribute = false;
  unsigned recon_mask_len = 12;
  unsigned sobol_degree = 10;
  aud->add_option("--config", config_path, "experiment config JSON (overrides the flags below)");
  aud->add_option("--protocol", protocol, "1..4");
  aud->add_option("--scenario", scenario_path, "scenario config JSON");
  aud->add_option("--subtpas", subtpas, "number of SUBTPAs");
  aud->add_option("--threshold", threshold_m, "threshold m (default n)");
  aud->add_option("--sample-pct", sample_pct, "sample size as % of blocks");
  aud->add_option("--tdk-ones", tdk_ones, "ones per TDK (protocols 2-4)");
  aud->add_option("--overlap", overlap_pct, "TDK overlap %");
  aud->add_option("--near-range", near_range, "protocol 3 neighborhood radius");
  aud->add_option("--trials", trials, "trial count");
  aud->add_option("--seed", seed, "experiment seed");
  aud->add_option("--out", out_report, "report CSV path");
  aud->add_option("--summary", out_summary, "summary CSV path");
  aud->add_option("--fit", out_fit, "fit JSON path");
  aud->add_option("--buckets", out_buckets, "mean-bucket CSV path");
  aud->add_option("--gnuplot", out_gnuplot, "gnuplot data path");
  aud->add_option("--stop-policy", stop_policy, "complete|threshold");
  aud->add_option("--mode", mode, "sequential|concurrent");
  aud->add_flag("--distribute-tdk", distribute, "distribute TDKs via string reconciliation");
  aud->add_option("--recon-mask-len", recon_mask_len, "piece length for TDK reconciliation");
  aud->add_option("--sobol-degree", sobol_degree, "primitive polynomial degree for trial keys");

  // analyze
  auto* ana = app.add_subcommand("analyze", "Summarize a report CSV and fit the least-squares line");
  std::string an_report, an_summary, an_fit, an_buckets, an_gnuplot;
  ana->add_option("--report", an_report, "input report CSV")->required();
  ana->add_option("--summary", an_summary, "summary CSV path");
  ana->add_option("--fit", an_fit, "fit JSON path");
  ana->add_option("--buckets", an_buckets, "mean-bucket CSV path");
  ana->add_option("--gnuplot", an_gnuplot, "gnuplot data path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_sobol(degree, poly_index, init_csv, constant, len, skip, leap, format);
    }
    if (roots->parsed()) {
      return cmd_gf_roots(q, coeff_csv, root_seed);
    }
    if (demo->parsed()) {
      std::optional<uint64_t> mod;
      if (modulus > 0) mod = static_cast<uint64_t>(modulus);
      return cmd_recon_demo(host_a, host_b, mask_len, m_bar, demo_q, mod);
    }
    if (aud->parsed()) {
      experiment::ExperimentConfig cfg;
      if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw config_error("cannot open config '" + config_path + "'");
        cfg = experiment::experiment_config_from_json(nlohmann::json::parse(is));
      } else {
        if (scenario_path.empty()) throw config_error("--scenario or --config is required");
        std::ifstream is(scenario_path);
        if (!is) throw config_error("cannot open scenario '" + scenario_path + "'");
        cfg.scenario = cloudsim::scenario_config_from_json(nlohmann::json::parse(is));
        cfg.protocol = protocol;
        cfg.subtpas = subtpas;
        cfg.threshold_m = threshold_m;
        cfg.sample_pct = sample_pct;
        cfg.tdk_ones = tdk_ones;
        cfg.overlap_pct = overlap_pct;
        cfg.near_range = near_range;
        cfg.trials = trials;
        cfg.seed = seed;
        cfg.sobol_degree = sobol_degree;
        cfg.distribute_via_recon = distribute;
        cfg.recon_mask_len = recon_mask_len;
        cfg.stop_policy = stop_policy == "threshold" ? audit::StopPolicy::StopOnThreshold
                                                     : audit::StopPolicy::RunToCompletion;
        cfg.exec_mode = mode == "concurrent" ? audit::ExecMode::Concurrent : audit::ExecMode::Sequential;
        cfg.report_path = out_report;
        cfg.summary_path = out_summary;
        cfg.fit_path = out_fit;
        cfg.buckets_path = out_buckets;
        cfg.gnuplot_path = out_gnuplot;
      }
      auto result = experiment::run_experiment(cfg);
      experiment::write_artifacts(cfg, result);
      uint64_t total = 0;
      for (auto& t : result.trials) total += t.outcome.total_detected;
      std::cout << "trials: " << result.trials.size() << ", mean detected per trial: "
                << (static_cast<double>(total) / static_cast<double>(result.trials.size())) << '\n';
      return 0;
    }
    if (ana->parsed()) {
      return cmd_analyze(an_report, an_summary, an_fit, an_buckets, an_gnuplot);
    }
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const invalid_parameter_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const invalid_key_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

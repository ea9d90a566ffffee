#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "distaudit/analysis.hpp"
#include "distaudit/audit.hpp"
#include "distaudit/cloudsim.hpp"
#include "distaudit/errors.hpp"
#include "distaudit/sobol.hpp"
#include "distaudit/strrecon.hpp"
#include "distaudit/tdk.hpp"

namespace distaudit::experiment {

/// Everything one reproducible experiment needs: the scenario, the protocol
/// and its parameters, the Sobol key policy, trial count, seeds, and output
/// paths. Validated up front; runs are deterministic for a fixed seed.
struct ExperimentConfig {
  cloudsim::ScenarioConfig scenario;
  int protocol = 1;
  uint32_t subtpas = 4;
  uint32_t threshold_m = 0;  // 0 = m = n
  double sample_pct = 20.0;  // sequence length as % of blocks; protocol 4 self-sample %
  uint32_t tdk_ones = 3;
  double overlap_pct = 0.0;
  uint64_t near_range = 0;
  uint32_t trials = 1;
  uint64_t seed = 0;
  unsigned sobol_degree = 10;
  bool distribute_via_recon = false;
  unsigned recon_mask_len = 12;
  audit::StopPolicy stop_policy = audit::StopPolicy::RunToCompletion;
  audit::ExecMode exec_mode = audit::ExecMode::Sequential;
  std::string report_path;
  std::string summary_path;
  std::string fit_path;
  std::string buckets_path;
  std::string gnuplot_path;

  void validate() const {
    if (scenario.blocks == 0 || !is_power_of_two(scenario.blocks)) {
      throw config_error("$.scenario.blocks: must be a power of two");
    }
    if (protocol < 1 || protocol > 4) throw config_error("$.protocol: must be 1..4");
    if (subtpas < 1) throw config_error("$.subtpas: must be >= 1");
    if (threshold_m > subtpas) throw config_error("$.threshold: must be <= subtpas");
    if (trials < 1) throw config_error("$.trials: must be >= 1");
    if (sample_pct <= 0.0 || sample_pct > 100.0) throw config_error("$.sample_pct: must be in (0, 100]");
    if (tdk_ones < 1) throw config_error("$.tdk_ones: must be >= 1");
    if (overlap_pct < 0.0 || overlap_pct > 100.0) throw config_error("$.overlap_pct: must be in [0, 100]");
    if (sobol_degree < 1 || sobol_degree > 20) throw config_error("$.sobol_degree: must be in [1, 20]");
    if (report_path.empty()) throw config_error("$.out.report: required");
  }
};

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    cfg.scenario = cloudsim::scenario_config_from_json(j.at("scenario"));
    cfg.protocol = j.value("protocol", 1);
    cfg.subtpas = j.value("subtpas", 4u);
    cfg.threshold_m = j.value("threshold", 0u);
    cfg.sample_pct = j.value("sample_pct", 20.0);
    cfg.tdk_ones = j.value("tdk_ones", 3u);
    cfg.overlap_pct = j.value("overlap_pct", 0.0);
    cfg.near_range = j.value("near_range", 0ull);
    cfg.trials = j.value("trials", 1u);
    cfg.seed = j.value("seed", 0ull);
    cfg.sobol_degree = j.value("sobol_degree", 10u);
    cfg.distribute_via_recon = j.value("distribute_via_recon", false);
    cfg.recon_mask_len = j.value("recon_mask_len", 12u);
    const std::string policy = j.value("stop_policy", std::string("complete"));
    if (policy == "complete") {
      cfg.stop_policy = audit::StopPolicy::RunToCompletion;
    } else if (policy == "threshold") {
      cfg.stop_policy = audit::StopPolicy::StopOnThreshold;
    } else {
      throw config_error("$.stop_policy: expected \"complete\" or \"threshold\"");
    }
    const std::string mode = j.value("mode", std::string("sequential"));
    if (mode == "sequential") {
      cfg.exec_mode = audit::ExecMode::Sequential;
    } else if (mode == "concurrent") {
      cfg.exec_mode = audit::ExecMode::Concurrent;
    } else {
      throw config_error("$.mode: expected \"sequential\" or \"concurrent\"");
    }
    if (j.contains("out")) {
      const auto& o = j.at("out");
      cfg.report_path = o.value("report", std::string());
      cfg.summary_path = o.value("summary", std::string());
      cfg.fit_path = o.value("fit", std::string());
      cfg.buckets_path = o.value("buckets", std::string());
      cfg.gnuplot_path = o.value("gnuplot", std::string());
    }
  } catch (const nlohmann::json::exception& ex) {
    throw config_error(std::string("experiment config: ") + ex.what());
  }
  return cfg;
}

/// Random valid Sobol key for one trial: polynomial index, init values and
/// the sequence length derive deterministically from the trial rng.
inline sobol::SobolKey random_key(unsigned degree, uint64_t blocks, uint64_t seq_len, Rng& rng) {
  auto polys = sobol::enumerate_primitive_polynomials(degree);
  sobol::SobolKey key;
  key.poly = polys[rng.uniform_below(polys.size())];
  key.init_m.resize(degree);
  for (unsigned i = 0; i < degree; ++i) {
    const uint64_t half_range = 1ull << i;  // odd values below 2^(i+1)
    key.init_m[i] = 2 * rng.uniform_below(half_range) + 1;
  }
  key.constant = blocks;
  key.seq_len = seq_len;
  return key;
}

struct TrialRecord {
  sobol::SobolKey key;
  std::vector<uint64_t> corrupted;
  audit::AuditOutcome outcome;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  analysis::TrialMatrix matrix;
  std::vector<analysis::SummaryRow> summary;
  std::optional<analysis::FittedLine> fit;
  double fit_residual = 0.0;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto scenario = cloudsim::provision(cfg.scenario.blocks, cfg.scenario.block_size, cfg.scenario.seed);
  const uint64_t seq_len =
      std::max<uint64_t>(1, static_cast<uint64_t>(cfg.sample_pct / 100.0 * static_cast<double>(cfg.scenario.blocks)));
  const uint32_t n = cfg.subtpas;
  audit::ThresholdConfig threshold{n, cfg.threshold_m == 0 ? n : cfg.threshold_m};

  ExperimentResult result;
  result.matrix = analysis::TrialMatrix::zeros(n, cfg.trials);
  Rng root(cfg.seed);

  for (uint32_t t = 0; t < cfg.trials; ++t) {
    Rng trial_rng = root.derive(0x7e5717, t);
    TrialRecord rec;
    // Protocol 4 samples sample_pct per agent from a full-length sequence;
    // the others split one sample of seq_len blocks among the agents.
    const uint64_t key_len = cfg.protocol == 4 ? cfg.scenario.blocks / 2 : seq_len;
    rec.key = random_key(cfg.sobol_degree, cfg.scenario.blocks, key_len, trial_rng);

    cloudsim::CorruptionPlan plan = cfg.scenario.error;
    plan.seed = splitmix64(cfg.scenario.error.seed ^ splitmix64(t + 1));
    scenario.store.unseal();
    rec.corrupted = cloudsim::inject_errors(scenario.store, plan);
    scenario.store.seal();

    audit::AuditOptions opts;
    opts.stop_policy = cfg.stop_policy;
    opts.mode = cfg.exec_mode;
    opts.run_seed = trial_rng.derive(0x5eed, 0).next_u64();
    opts.distribute_via_recon = cfg.distribute_via_recon;
    opts.recon_mask_len = cfg.recon_mask_len;
    opts.tdk_ones = cfg.tdk_ones;

    switch (cfg.protocol) {
      case 1:
        rec.outcome = audit::run_protocol1(scenario, rec.key, threshold, opts);
        break;
      case 2:
      case 3: {
        Rng tdk_rng = trial_rng.derive(0x7dc, 0);
        auto set = tdk::generate_nonoverlapping(n, cfg.tdk_ones, rec.key.seq_len, tdk_rng);
        if (cfg.overlap_pct > 0.0) set = tdk::generate_overlapping(set, cfg.overlap_pct, tdk_rng);
        if (cfg.protocol == 2) {
          rec.outcome = audit::run_protocol2(scenario, rec.key, set, threshold, opts);
        } else {
          rec.outcome = audit::run_protocol3(scenario, rec.key, set, threshold, cfg.near_range, opts);
        }
        break;
      }
      case 4:
        rec.outcome = audit::run_protocol4(scenario, rec.key, threshold, cfg.sample_pct, opts);
        break;
      default:
        throw config_error("$.protocol: must be 1..4");
    }
    for (uint32_t a = 0; a < n; ++a) result.matrix.at(a, t) = rec.outcome.rows[a].detected;
    result.trials.push_back(std::move(rec));
  }

  result.summary = analysis::summarize(result.matrix);
  if (n >= 2) {
    auto pts = analysis::mean_points(result.matrix);
    result.fit = analysis::fit_line(pts);
    result.fit_residual = analysis::mean_squared_residual(pts, *result.fit);
  }
  return result;
}

inline void write_artifacts(const ExperimentConfig& cfg, const ExperimentResult& result) {
  {
    std::ofstream os(cfg.report_path);
    if (!os) throw config_error("$.out.report: cannot open '" + cfg.report_path + "'");
    audit::write_report_header(os);
    for (size_t t = 0; t < result.trials.size(); ++t) {
      audit::write_report_rows(os, t + 1, result.trials[t].outcome);
    }
  }
  if (!cfg.summary_path.empty()) {
    std::ofstream os(cfg.summary_path);
    if (!os) throw config_error("$.out.summary: cannot open '" + cfg.summary_path + "'");
    analysis::write_summary_csv(os, result.summary);
  }
  if (!cfg.fit_path.empty() && result.fit) {
    std::ofstream os(cfg.fit_path);
    if (!os) throw config_error("$.out.fit: cannot open '" + cfg.fit_path + "'");
    os << analysis::fit_to_json(*result.fit, result.fit_residual).dump(2) << '\n';
  }
  if (!cfg.buckets_path.empty()) {
    std::ofstream os(cfg.buckets_path);
    if (!os) throw config_error("$.out.buckets: cannot open '" + cfg.buckets_path + "'");
    analysis::write_buckets_csv(os, analysis::bucket_by_mean(result.matrix));
  }
  if (!cfg.gnuplot_path.empty() && result.fit) {
    std::ofstream os(cfg.gnuplot_path);
    if (!os) throw config_error("$.out.gnuplot: cannot open '" + cfg.gnuplot_path + "'");
    analysis::write_gnuplot_data(os, analysis::mean_points(result.matrix), *result.fit);
  }
}

/// The worked reconciliation walk-through behind the `recon-demo` CLI
/// subcommand; callers print or assert on the collected intermediates.
struct ReconDemo {
  strrecon::StringReconResult recon;
  std::vector<std::string> cycles_a;
  std::vector<std::string> cycles_b;
  setrecon::CharPolyEvaluations evals_a;
  setrecon::CharPolyEvaluations evals_b;
  std::vector<uint64_t> ratio_values;
  gf::RationalFunction fitted;
  bool round_trip_ok = false;
};

inline ReconDemo run_recon_demo(const std::string& a, const std::string& b, unsigned mask_len,
                                uint64_t m_bar, uint64_t q, std::optional<uint64_t> modulus) {
  strrecon::ReconOptions opts;
  opts.mask_len = mask_len;
  opts.hash_modulus = modulus;
  auto config = setrecon::make_config(m_bar, q);

  ReconDemo demo;
  Rng rng(0xdeca);
  demo.recon = strrecon::string_recon(a, b, config, opts, rng);
  demo.cycles_a = strrecon::enumerate_cycles(demo.recon.host_a.graph);
  demo.cycles_b = strrecon::enumerate_cycles(demo.recon.host_b.graph);
  demo.evals_a = setrecon::char_poly_eval(demo.recon.host_a.enc.values, config);
  demo.evals_b = setrecon::char_poly_eval(demo.recon.host_b.enc.values, config);
  auto delta = setrecon::reconcile(demo.recon.host_b.enc.values, demo.evals_a, config, rng);
  demo.ratio_values = delta.ratio_values;
  demo.fitted = delta.fitted;
  demo.round_trip_ok = demo.recon.a_learns == b && demo.recon.b_learns == a;
  return demo;
}

}  // namespace distaudit::experiment

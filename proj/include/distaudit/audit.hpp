#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "distaudit/cloudsim.hpp"
#include "distaudit/errors.hpp"
#include "distaudit/sobol.hpp"
#include "distaudit/strrecon.hpp"
#include "distaudit/tdk.hpp"

namespace distaudit::audit {

struct ThresholdConfig {
  uint32_t n = 1;  // SUBTPA count
  uint32_t m = 1;  // signals needed before the coordinator may stop

  void validate() const {
    if (n < 1 || m < 1 || m > n) throw invalid_parameter_error("threshold requires 1 <= m <= n");
  }
};

enum class StopPolicy { RunToCompletion, StopOnThreshold };
enum class ExecMode { Sequential, Concurrent };
enum class StopReason { Completed, ThresholdStop };

struct AuditOptions {
  StopPolicy stop_policy = StopPolicy::RunToCompletion;
  ExecMode mode = ExecMode::Sequential;
  uint64_t run_seed = 0;
  // Protocol 2/3 key distribution.
  bool distribute_via_recon = true;
  unsigned recon_mask_len = 12;
  bool allow_unadjusted_tdk = false;  // parity-test override for the gcd rule
  // Protocol 4 self-sampling.
  uint32_t tdk_ones = 3;
  std::optional<std::vector<uint64_t>> protocol4_agent_seeds;
  // Dispatch layer.
  uint32_t replicas = 1;
  double base_latency_ms = 0.0;
  double jitter_ms = 0.0;
};

struct Challenge {
  uint32_t subtpa = 0;
  uint32_t packet = 0;  // 1..10
  std::vector<uint64_t> indices;
};

struct Signal {
  uint32_t subtpa = 0;
  uint32_t packet = 0;
  std::vector<uint64_t> error_blocks;
  uint64_t range_min = 0;
  uint64_t range_max = 0;
};

struct ReportRow {
  std::vector<bool> packet_ok;            // Report[k] per executed packet
  std::vector<uint64_t> checked;          // indices checked per packet turn
  std::vector<uint64_t> mismatches;       // mismatched indices per packet turn
  std::vector<uint32_t> signals;          // signals emitted per packet turn
  uint64_t detected = 0;                  // total mismatched blocks
  uint32_t first_error_packet = 0;        // 0 when clean
  bool single_packet_fallback = false;
};

struct AuditOutcome {
  std::vector<ReportRow> rows;
  std::vector<Signal> signals;
  StopReason stop_reason = StopReason::Completed;
  std::vector<uint64_t> sub_sizes;
  std::vector<std::vector<uint64_t>> challenged_blocks;  // per agent, in challenge order
  std::vector<std::vector<uint64_t>> detected_blocks;    // per agent
  uint64_t total_detected = 0;
  uint64_t challenges_issued = 0;
  double latency_ms_total = 0.0;
  strrecon::ChannelStats recon_stats;  // protocol 2/3 key distribution traffic
};

/// Contiguous partition: n-1 parts of floor(len/n), remainder appended to the
/// last part. Parts are pairwise disjoint and cover the sequence.
inline std::vector<sobol::BlockSequence> partition_sequence(const sobol::BlockSequence& seq, uint32_t n) {
  if (n < 1) throw invalid_parameter_error("partition count must be positive");
  std::vector<sobol::BlockSequence> parts(n);
  const size_t base = seq.size() / n;
  size_t at = 0;
  for (uint32_t i = 0; i < n; ++i) {
    const size_t take = (i + 1 == n) ? seq.size() - at : base;
    parts[i].indices.assign(seq.begin() + at, seq.begin() + at + take);
    at += take;
  }
  return parts;
}

/// 10% chunking: packets 1-9 carry floor(|sub|/10) indices, packet 10 the
/// remainder. Subsequences shorter than 10 fall back to a single packet.
inline std::vector<Challenge> chunk(const sobol::BlockSequence& sub, uint32_t subtpa = 0) {
  std::vector<Challenge> packets;
  if (sub.size() == 0) return packets;
  if (sub.size() < 10) {
    packets.push_back({subtpa, 1, sub.indices});
    return packets;
  }
  const size_t base = sub.size() / 10;
  size_t at = 0;
  for (uint32_t k = 1; k <= 10; ++k) {
    const size_t take = (k == 10) ? sub.size() - at : base;
    Challenge c{subtpa, k, {}};
    c.indices.assign(sub.begin() + at, sub.begin() + at + take);
    packets.push_back(std::move(c));
    at += take;
  }
  return packets;
}

/// Position-wise equality of a proof against the expected metadata slice.
inline std::vector<bool> verify_proof(const std::vector<uint64_t>& proof,
                                      const std::vector<uint64_t>& expected) {
  if (proof.size() != expected.size()) throw protocol_error("proof length does not match metadata slice");
  std::vector<bool> ok(proof.size());
  for (size_t i = 0; i < proof.size(); ++i) ok[i] = proof[i] == expected[i];
  return ok;
}

namespace detail {

struct Turn {
  uint32_t packet = 0;
  uint64_t checked = 0;
  uint64_t challenges = 0;
  std::vector<uint64_t> challenged;
  std::vector<uint64_t> mismatched;
  bool packet_ok = true;
  bool emits_signal = false;
  Signal signal;
  double latency_ms = 0.0;
};

struct AgentLog {
  std::vector<Turn> turns;
  uint64_t sub_size = 0;
  bool fallback = false;
};

inline std::vector<uint64_t> expected_digests(const cloudsim::MetadataTable& meta,
                                              const std::vector<uint64_t>& indices) {
  std::vector<uint64_t> out;
  out.reserve(indices.size());
  for (uint64_t i : indices) out.push_back(meta.digests[i]);
  return out;
}

/// Protocols 1, 2, 4: send each 10% packet, wait for the proof, verify,
/// signal on mismatch.
inline AgentLog run_agent_standard(const sobol::BlockSequence& sub, uint32_t agent,
                                   const cloudsim::Scenario& scenario, cloudsim::ProofDispatcher dispatcher) {
  AgentLog log;
  log.sub_size = sub.size();
  auto packets = chunk(sub, agent);
  log.fallback = sub.size() > 0 && sub.size() < 10;
  for (auto& c : packets) {
    Turn t;
    t.packet = c.packet;
    auto resp = dispatcher.serve(c.indices);
    t.latency_ms = resp.latency_ms;
    auto ok = verify_proof(resp.digests, expected_digests(scenario.metadata, c.indices));
    t.checked = c.indices.size();
    t.challenges = 1;
    t.challenged = c.indices;
    for (size_t i = 0; i < ok.size(); ++i) {
      if (!ok[i]) t.mismatched.push_back(c.indices[i]);
    }
    t.packet_ok = t.mismatched.empty();
    if (!t.packet_ok) {
      t.emits_signal = true;
      t.signal.subtpa = agent;
      t.signal.packet = c.packet;
      t.signal.error_blocks = t.mismatched;
      t.signal.range_min = *std::min_element(t.mismatched.begin(), t.mismatched.end());
      t.signal.range_max = *std::max_element(t.mismatched.begin(), t.mismatched.end());
    }
    log.turns.push_back(std::move(t));
  }
  return log;
}

/// Protocol 3: after a mismatch the agent immediately challenges every
/// not-yet-checked subsequence index within +/- near_range of each mismatched
/// block, iterating while new mismatches appear, then emits one consolidated
/// signal for the episode.
inline AgentLog run_agent_adaptive(const sobol::BlockSequence& sub, uint32_t agent,
                                   const cloudsim::Scenario& scenario, cloudsim::ProofDispatcher dispatcher,
                                   uint64_t near_range) {
  AgentLog log;
  log.sub_size = sub.size();
  auto packets = chunk(sub, agent);
  log.fallback = sub.size() > 0 && sub.size() < 10;

  // Subsequence values sorted for range lookups; `checked` tracks slots.
  std::vector<std::pair<uint64_t, uint32_t>> by_value(sub.size());
  for (size_t i = 0; i < sub.size(); ++i) by_value[i] = {sub[i], static_cast<uint32_t>(i)};
  std::sort(by_value.begin(), by_value.end());
  std::vector<bool> checked(sub.size(), false);

  auto unchecked_near = [&](uint64_t v) {
    std::vector<uint32_t> slots;
    const uint64_t lo = v > near_range ? v - near_range : 0;
    const uint64_t hi = v + near_range;
    auto it = std::lower_bound(by_value.begin(), by_value.end(), std::make_pair(lo, uint32_t{0}));
    for (; it != by_value.end() && it->first <= hi; ++it) {
      if (!checked[it->second]) slots.push_back(it->second);
    }
    return slots;
  };

  std::vector<uint32_t> slot_of_packet_start;
  {
    uint32_t at = 0;
    for (auto& c : packets) {
      slot_of_packet_start.push_back(at);
      at += static_cast<uint32_t>(c.indices.size());
    }
  }

  for (size_t pi = 0; pi < packets.size(); ++pi) {
    auto& c = packets[pi];
    Turn t;
    t.packet = c.packet;

    std::vector<uint64_t> indices;
    std::vector<uint32_t> slots;
    for (size_t j = 0; j < c.indices.size(); ++j) {
      const uint32_t slot = slot_of_packet_start[pi] + static_cast<uint32_t>(j);
      if (!checked[slot]) {
        indices.push_back(c.indices[j]);
        slots.push_back(slot);
      }
    }
    std::vector<uint64_t> found;
    if (!indices.empty()) {
      auto resp = dispatcher.serve(indices);
      t.latency_ms += resp.latency_ms;
      t.challenges += 1;
      t.checked += indices.size();
      t.challenged.insert(t.challenged.end(), indices.begin(), indices.end());
      auto ok = verify_proof(resp.digests, expected_digests(scenario.metadata, indices));
      for (size_t i = 0; i < ok.size(); ++i) {
        checked[slots[i]] = true;
        if (!ok[i]) found.push_back(indices[i]);
      }
    }
    t.packet_ok = found.empty();

    // Episode: expand neighborhoods until no new mismatch turns up.
    std::vector<uint64_t> frontier = found;
    while (!frontier.empty()) {
      std::set<uint32_t> follow_slots;
      for (uint64_t v : frontier) {
        for (uint32_t s : unchecked_near(v)) follow_slots.insert(s);
      }
      if (follow_slots.empty()) break;
      std::vector<uint64_t> follow_indices;
      follow_indices.reserve(follow_slots.size());
      for (uint32_t s : follow_slots) {
        follow_indices.push_back(sub[s]);
        checked[s] = true;
      }
      auto resp = dispatcher.serve(follow_indices);
      t.latency_ms += resp.latency_ms;
      t.challenges += 1;
      t.checked += follow_indices.size();
      t.challenged.insert(t.challenged.end(), follow_indices.begin(), follow_indices.end());
      auto ok = verify_proof(resp.digests, expected_digests(scenario.metadata, follow_indices));
      frontier.clear();
      for (size_t i = 0; i < ok.size(); ++i) {
        if (!ok[i]) frontier.push_back(follow_indices[i]);
      }
      found.insert(found.end(), frontier.begin(), frontier.end());
    }

    t.mismatched = found;
    if (!found.empty()) {
      t.emits_signal = true;
      t.signal.subtpa = agent;
      t.signal.packet = c.packet;
      t.signal.error_blocks = found;
      t.signal.range_min = *std::min_element(found.begin(), found.end());
      t.signal.range_max = *std::max_element(found.begin(), found.end());
    }
    log.turns.push_back(std::move(t));
  }
  return log;
}

/// Merge per-agent logs round-robin by (packet, agent id) and apply the stop
/// policy. Agents interact only through the coordinator's threshold rule, so
/// truncating the merged log is observably identical to stopping in place,
/// and sequential and concurrent execution agree by construction.
inline AuditOutcome merge_logs(std::vector<AgentLog> logs, const ThresholdConfig& threshold,
                               StopPolicy policy) {
  AuditOutcome out;
  const uint32_t n = static_cast<uint32_t>(logs.size());
  out.rows.resize(n);
  out.sub_sizes.resize(n);
  out.challenged_blocks.resize(n);
  out.detected_blocks.resize(n);
  for (uint32_t a = 0; a < n; ++a) {
    out.sub_sizes[a] = logs[a].sub_size;
    out.rows[a].single_packet_fallback = logs[a].fallback;
  }

  std::set<uint32_t> signaled;
  bool stopped = false;
  for (uint32_t k = 1; k <= 10 && !stopped; ++k) {
    for (uint32_t a = 0; a < n && !stopped; ++a) {
      const Turn* turn = nullptr;
      for (auto& t : logs[a].turns) {
        if (t.packet == k) {
          turn = &t;
          break;
        }
      }
      if (!turn) continue;
      auto& row = out.rows[a];
      row.packet_ok.push_back(turn->packet_ok);
      row.checked.push_back(turn->checked);
      row.mismatches.push_back(turn->mismatched.size());
      row.signals.push_back(turn->emits_signal ? 1 : 0);
      row.detected += turn->mismatched.size();
      if (row.first_error_packet == 0 && !turn->mismatched.empty()) row.first_error_packet = k;
      out.total_detected += turn->mismatched.size();
      out.challenges_issued += turn->challenges;
      out.latency_ms_total += turn->latency_ms;
      out.challenged_blocks[a].insert(out.challenged_blocks[a].end(), turn->challenged.begin(),
                                      turn->challenged.end());
      out.detected_blocks[a].insert(out.detected_blocks[a].end(), turn->mismatched.begin(),
                                    turn->mismatched.end());
      if (turn->emits_signal) {
        out.signals.push_back(turn->signal);
        signaled.insert(a);
        if (policy == StopPolicy::StopOnThreshold && signaled.size() >= threshold.m) {
          out.stop_reason = StopReason::ThresholdStop;
          stopped = true;
        }
      }
    }
  }
  return out;
}

template <typename AgentFn>
inline std::vector<AgentLog> run_agents(uint32_t n, ExecMode mode, AgentFn&& fn) {
  std::vector<AgentLog> logs(n);
  if (mode == ExecMode::Sequential) {
    for (uint32_t a = 0; a < n; ++a) logs[a] = fn(a);
  } else {
    std::vector<std::future<AgentLog>> futures;
    futures.reserve(n);
    for (uint32_t a = 0; a < n; ++a) {
      futures.push_back(std::async(std::launch::async, [&fn, a] { return fn(a); }));
    }
    for (uint32_t a = 0; a < n; ++a) logs[a] = futures[a].get();
  }
  return logs;
}

inline void require_ready(const cloudsim::Scenario& scenario, const sobol::SobolKey& key) {
  if (!scenario.store.sealed()) throw lifecycle_error("scenario must be sealed before auditing");
  if (key.constant != scenario.store.block_count()) {
    throw invalid_parameter_error("sobol key constant must equal the store's block count");
  }
}

inline cloudsim::ProofDispatcher make_dispatcher(const cloudsim::Scenario& scenario,
                                                 const AuditOptions& opts, uint32_t agent) {
  return cloudsim::ProofDispatcher(scenario.store, opts.replicas, opts.base_latency_ms, opts.jitter_ms,
                                   Rng(opts.run_seed).derive(0xd15a7c4, agent).next_u64());
}

}  // namespace detail

/// Partition any block sequence contiguously and run the 10-packet challenge
/// loop on every part. Protocol 1 feeds this with a Sobol sequence; tests may
/// feed alternative generators for comparison runs.
inline AuditOutcome run_partitioned_audit(const cloudsim::Scenario& scenario,
                                          const sobol::BlockSequence& seq,
                                          const ThresholdConfig& threshold,
                                          const AuditOptions& opts = {}) {
  threshold.validate();
  if (!scenario.store.sealed()) throw lifecycle_error("scenario must be sealed before auditing");
  auto parts = partition_sequence(seq, threshold.n);
  auto logs = detail::run_agents(threshold.n, opts.mode, [&](uint32_t a) {
    return detail::run_agent_standard(parts[a], a, scenario, detail::make_dispatcher(scenario, opts, a));
  });
  return detail::merge_logs(std::move(logs), threshold, opts.stop_policy);
}

/// Protocol 1: the coordinator generates the sequence, partitions it
/// contiguously, and distributes subsequences; agents run the 10-packet
/// challenge loop and signal mismatches.
inline AuditOutcome run_protocol1(const cloudsim::Scenario& scenario, const sobol::SobolKey& key,
                                  const ThresholdConfig& threshold, const AuditOptions& opts = {}) {
  detail::require_ready(scenario, key);
  return run_partitioned_audit(scenario, sobol::generate(key), threshold, opts);
}

namespace detail {

/// Shared key phase for protocols 2 and 3: validate the adjusted lengths and,
/// when enabled, hand every agent its TDK by string reconciliation.
inline strrecon::ChannelStats tdk_key_phase(const sobol::SobolKey& key, const tdk::TDKSet& tdk_set,
                                            const ThresholdConfig& threshold, const AuditOptions& opts) {
  if (tdk_set.keys.size() != threshold.n) throw invalid_parameter_error("TDK count must equal SUBTPA count");
  if (!opts.allow_unadjusted_tdk) {
    for (auto& k : tdk_set.keys) {
      if (std::gcd<uint64_t>(k.length(), key.seq_len) != 1) {
        throw invalid_parameter_error("TDK length must be coprime to the sequence length (adjust_length)");
      }
    }
  }
  strrecon::ChannelStats recon_stats;
  if (opts.distribute_via_recon) {
    std::vector<std::string> key_bits;
    key_bits.reserve(tdk_set.keys.size());
    for (auto& k : tdk_set.keys) key_bits.push_back(k.bits);
    const std::string common = sobol::key_to_bits(key);
    strrecon::ReconOptions ropts;
    ropts.mask_len = opts.recon_mask_len;
    for (size_t i = 0; i < key_bits.size(); ++i) {
      Rng rng = Rng(opts.run_seed).derive(0x7d50, i);
      auto dist = strrecon::distribute_tdk(key_bits, common, i, ropts, rng);
      if (dist.received_key != key_bits[i]) {
        throw protocol_error("reconciled TDK differs from the coordinator's record");
      }
      recon_stats.eval_pairs += dist.stats.eval_pairs;
      recon_stats.pieces += dist.stats.pieces;
      recon_stats.indices += dist.stats.indices;
      recon_stats.diff_values += dist.stats.diff_values;
      recon_stats.messages += dist.stats.messages;
    }
  }
  return recon_stats;
}

}  // namespace detail

/// Protocol 2: the coordinator broadcasts the Sobol key and hands each agent
/// its TDK (by string reconciliation when enabled); every agent generates the
/// sequence itself and interprets its subsequence with its key.
inline AuditOutcome run_protocol2(const cloudsim::Scenario& scenario, const sobol::SobolKey& key,
                                  const tdk::TDKSet& tdk_set, const ThresholdConfig& threshold,
                                  const AuditOptions& opts = {}) {
  threshold.validate();
  detail::require_ready(scenario, key);
  auto recon_stats = detail::tdk_key_phase(key, tdk_set, threshold, opts);
  auto seq = sobol::generate(key);
  auto logs = detail::run_agents(threshold.n, opts.mode, [&](uint32_t a) {
    sobol::BlockSequence sub{tdk::interpret(tdk_set.keys[a], seq)};
    return detail::run_agent_standard(sub, a, scenario, detail::make_dispatcher(scenario, opts, a));
  });
  auto out = detail::merge_logs(std::move(logs), threshold, opts.stop_policy);
  out.recon_stats = recon_stats;
  return out;
}

/// Protocol 3: protocol 2's key phase with adaptive follow-up challenges
/// around each mismatch and one consolidated signal per episode.
inline AuditOutcome run_protocol3(const cloudsim::Scenario& scenario, const sobol::SobolKey& key,
                                  const tdk::TDKSet& tdk_set, const ThresholdConfig& threshold,
                                  uint64_t near_range, const AuditOptions& opts = {}) {
  threshold.validate();
  detail::require_ready(scenario, key);
  auto recon_stats = detail::tdk_key_phase(key, tdk_set, threshold, opts);
  auto seq = sobol::generate(key);
  auto logs = detail::run_agents(threshold.n, opts.mode, [&](uint32_t a) {
    sobol::BlockSequence sub{tdk::interpret(tdk_set.keys[a], seq)};
    return detail::run_agent_adaptive(sub, a, scenario, detail::make_dispatcher(scenario, opts, a),
                                      near_range);
  });
  auto out = detail::merge_logs(std::move(logs), threshold, opts.stop_policy);
  out.recon_stats = recon_stats;
  return out;
}

/// Protocol 4: the coordinator sends only the Sobol key; every agent builds
/// its own TDK from its own seed and samples sample_pct of the sequence.
/// Overlap between agents is permitted.
inline AuditOutcome run_protocol4(const cloudsim::Scenario& scenario, const sobol::SobolKey& key,
                                  const ThresholdConfig& threshold, double sample_pct,
                                  const AuditOptions& opts = {}) {
  threshold.validate();
  detail::require_ready(scenario, key);
  if (sample_pct <= 0.0 || sample_pct > 100.0) throw invalid_parameter_error("sample percentage out of range");
  auto seq = sobol::generate(key);
  const uint64_t len = tdk::adjust_length(static_cast<uint64_t>(threshold.n) * opts.tdk_ones, key.seq_len);
  auto logs = detail::run_agents(threshold.n, opts.mode, [&](uint32_t a) {
    uint64_t agent_seed;
    if (opts.protocol4_agent_seeds) {
      agent_seed = opts.protocol4_agent_seeds->at(a);
    } else {
      agent_seed = Rng(opts.run_seed).derive(0x9047, a).next_u64();
    }
    Rng rng(agent_seed);
    uint64_t ones = static_cast<uint64_t>(std::llround(sample_pct / 100.0 * static_cast<double>(len)));
    ones = std::clamp<uint64_t>(ones, 1, len);
    tdk::TaskDistributionKey self{std::string(len, '0'), a};
    auto perm = rng.permutation(len);
    for (uint64_t j = 0; j < ones; ++j) self.bits[perm[j]] = '1';
    sobol::BlockSequence sub{tdk::interpret(self, seq)};
    return detail::run_agent_standard(sub, a, scenario, detail::make_dispatcher(scenario, opts, a));
  });
  return detail::merge_logs(std::move(logs), threshold, opts.stop_policy);
}

/// Report CSV: one row per executed packet turn.
inline void write_report_header(std::ostream& os) {
  os << "trial,subtpa,packet,checked,mismatches,first_error_packet,signals\n";
}

inline void write_report_rows(std::ostream& os, uint64_t trial, const AuditOutcome& outcome) {
  for (size_t a = 0; a < outcome.rows.size(); ++a) {
    const auto& row = outcome.rows[a];
    for (size_t k = 0; k < row.packet_ok.size(); ++k) {
      os << trial << ',' << (a + 1) << ',' << (k + 1) << ',' << row.checked[k] << ','
         << row.mismatches[k] << ',' << row.first_error_packet << ',' << row.signals[k] << '\n';
    }
  }
}

}  // namespace distaudit::audit

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "distaudit/errors.hpp"
#include "distaudit/numeric.hpp"
#include "distaudit/rng.hpp"

namespace distaudit::cloudsim {

namespace detail {

// FNV-1a over a deterministic pseudo-random byte stream; blocks are never
// materialized, their contents are a pure function of (seed, index).
inline uint64_t block_digest(uint64_t seed, uint64_t index, uint32_t block_size, bool corrupted) {
  uint64_t stream = splitmix64(seed ^ splitmix64(index + 0x9e3779b97f4a7c15ull));
  uint64_t h = 0xcbf29ce484222325ull;
  uint32_t produced = 0;
  uint64_t word = 0;
  int word_bytes = 0;
  bool first = true;
  while (produced < block_size) {
    if (word_bytes == 0) {
      stream = splitmix64(stream);
      word = stream;
      word_bytes = 8;
    }
    uint8_t byte = static_cast<uint8_t>(word & 0xff);
    word >>= 8;
    --word_bytes;
    if (first && corrupted) byte ^= 0xff;  // corruption flips the first byte
    first = false;
    h ^= byte;
    h *= 0x100000001b3ull;
    ++produced;
  }
  return h;
}

}  // namespace detail

/// Simulated block store. Contents are derived from the provisioning seed;
/// only the corruption set and digests carry state.
class BlockStore {
public:
  BlockStore(uint64_t n_blocks, uint32_t block_size, uint64_t seed)
      : n_blocks_(n_blocks), block_size_(block_size), seed_(seed), corrupted_(n_blocks, false) {
    if (!is_power_of_two(n_blocks)) throw invalid_parameter_error("block count must be a power of two");
    if (block_size == 0) throw invalid_parameter_error("block size must be positive");
  }

  uint64_t block_count() const { return n_blocks_; }
  uint32_t block_size() const { return block_size_; }
  uint64_t seed() const { return seed_; }
  bool sealed() const { return sealed_; }
  uint64_t corrupted_count() const { return corrupted_count_; }
  bool is_corrupted(uint64_t index) const { return corrupted_[index]; }

  /// Digest of the block as provisioned, before any corruption.
  uint64_t clean_digest(uint64_t index) const {
    return detail::block_digest(seed_, index, block_size_, false);
  }

  /// Digest of the block's current (possibly corrupted) content.
  uint64_t current_digest(uint64_t index) const {
    return detail::block_digest(seed_, index, block_size_, corrupted_[index]);
  }

  void set_corruption(const std::vector<uint64_t>& indices) {
    if (sealed_) throw lifecycle_error("cannot inject errors into a sealed store");
    std::fill(corrupted_.begin(), corrupted_.end(), false);
    corrupted_count_ = 0;
    for (uint64_t i : indices) {
      if (i >= n_blocks_) throw invalid_parameter_error("corruption index out of range");
      if (!corrupted_[i]) {
        corrupted_[i] = true;
        ++corrupted_count_;
      }
    }
  }

  /// Injection must complete before any audit starts.
  void seal() { sealed_ = true; }
  void unseal() { sealed_ = false; }

private:
  uint64_t n_blocks_;
  uint32_t block_size_;
  uint64_t seed_;
  std::vector<bool> corrupted_;
  uint64_t corrupted_count_ = 0;
  bool sealed_ = false;
};

/// Per-block digests recorded at provisioning time.
struct MetadataTable {
  std::vector<uint64_t> digests;

  bool matches(uint64_t index, uint64_t digest) const { return digests[index] == digest; }
};

struct Scenario {
  BlockStore store;
  MetadataTable metadata;
};

inline Scenario provision(uint64_t n_blocks, uint32_t block_size, uint64_t seed) {
  BlockStore store(n_blocks, block_size, seed);
  MetadataTable meta;
  meta.digests.resize(n_blocks);
  for (uint64_t i = 0; i < n_blocks; ++i) meta.digests[i] = store.clean_digest(i);
  return Scenario{std::move(store), std::move(meta)};
}

enum class CorruptionPattern { Random, ConsecutiveRuns };

struct CorruptionPlan {
  std::optional<double> fraction;  // exactly one of fraction/count
  std::optional<uint64_t> count;
  CorruptionPattern pattern = CorruptionPattern::Random;
  uint64_t run_length = 1;
  uint64_t seed = 0;

  uint64_t resolve_count(uint64_t n_blocks) const {
    if (fraction.has_value() == count.has_value()) {
      throw invalid_parameter_error("corruption plan needs exactly one of fraction or count");
    }
    if (count) return *count;
    if (*fraction < 0.0 || *fraction > 1.0) throw invalid_parameter_error("corruption fraction out of range");
    return static_cast<uint64_t>(*fraction * static_cast<double>(n_blocks));
  }
};

/// Corrupt exactly the planned number of blocks and return the ground truth
/// set, sorted ascending.
inline std::vector<uint64_t> inject_errors(BlockStore& store, const CorruptionPlan& plan) {
  const uint64_t n = store.block_count();
  const uint64_t want = plan.resolve_count(n);
  if (want > n) throw invalid_parameter_error("corruption plan exceeds block count");
  Rng rng(plan.seed);
  std::vector<bool> hit(n, false);
  std::vector<uint64_t> chosen;
  chosen.reserve(want);
  if (plan.pattern == CorruptionPattern::Random) {
    while (chosen.size() < want) {
      uint64_t i = rng.uniform_below(n);
      if (!hit[i]) {
        hit[i] = true;
        chosen.push_back(i);
      }
    }
  } else {
    if (plan.run_length == 0) throw invalid_parameter_error("run length must be positive");
    while (chosen.size() < want) {
      const uint64_t remaining = want - chosen.size();
      const uint64_t run = std::min(plan.run_length, remaining);
      const uint64_t start = rng.uniform_below(n - run + 1);
      bool clash = false;
      for (uint64_t i = start; i < start + run; ++i) {
        if (hit[i]) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      for (uint64_t i = start; i < start + run; ++i) {
        hit[i] = true;
        chosen.push_back(i);
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  store.set_corruption(chosen);
  return chosen;
}

/// Answer a challenge with the digest of each block's current content,
/// order-aligned with the challenge.
inline std::vector<uint64_t> serve_proof(const BlockStore& store, std::span<const uint64_t> challenge) {
  std::vector<uint64_t> proof;
  proof.reserve(challenge.size());
  for (uint64_t index : challenge) {
    if (index >= store.block_count()) throw invalid_challenge_error("challenged block index out of range");
    proof.push_back(store.current_digest(index));
  }
  return proof;
}

/// "Any server" dispatch: replicas share one logical store; responses carry
/// a simulated latency with jitter and the replica that answered.
class ProofDispatcher {
public:
  struct Response {
    std::vector<uint64_t> digests;
    double latency_ms = 0.0;
    uint32_t replica = 0;
  };

  ProofDispatcher(const BlockStore& store, uint32_t replicas = 1, double base_latency_ms = 0.0,
                  double jitter_ms = 0.0, uint64_t seed = 0)
      : store_(&store), replicas_(std::max<uint32_t>(1, replicas)), base_ms_(base_latency_ms),
        jitter_ms_(jitter_ms), rng_(seed) {}

  Response serve(std::span<const uint64_t> challenge) {
    Response r;
    r.digests = serve_proof(*store_, challenge);
    r.replica = static_cast<uint32_t>(rng_.uniform_below(replicas_));
    r.latency_ms = base_ms_ + jitter_ms_ * rng_.uniform_double();
    return r;
  }

private:
  const BlockStore* store_;
  uint32_t replicas_;
  double base_ms_;
  double jitter_ms_;
  Rng rng_;
};

/// Scenario config file schema:
///   {"blocks": N, "block_size": B, "seed": S,
///    "error": {"fraction"|"count": ..., "pattern": "random"|"consecutive",
///              "run_length": R, "seed": S2}}
struct ScenarioConfig {
  uint64_t blocks = 0;
  uint32_t block_size = 256;
  uint64_t seed = 0;
  CorruptionPlan error;
};

inline ScenarioConfig scenario_config_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  try {
    cfg.blocks = j.at("blocks").get<uint64_t>();
    cfg.block_size = j.value("block_size", 256u);
    cfg.seed = j.value("seed", 0ull);
    if (j.contains("error")) {
      const auto& e = j.at("error");
      if (e.contains("fraction")) cfg.error.fraction = e.at("fraction").get<double>();
      if (e.contains("count")) cfg.error.count = e.at("count").get<uint64_t>();
      const std::string pattern = e.value("pattern", std::string("random"));
      if (pattern == "random") {
        cfg.error.pattern = CorruptionPattern::Random;
      } else if (pattern == "consecutive") {
        cfg.error.pattern = CorruptionPattern::ConsecutiveRuns;
      } else {
        throw config_error("$.error.pattern: expected \"random\" or \"consecutive\"");
      }
      cfg.error.run_length = e.value("run_length", 1ull);
      cfg.error.seed = e.value("seed", 0ull);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw config_error(std::string("scenario config: ") + ex.what());
  }
  return cfg;
}

inline nlohmann::json scenario_config_to_json(const ScenarioConfig& cfg) {
  nlohmann::json e;
  if (cfg.error.fraction) e["fraction"] = *cfg.error.fraction;
  if (cfg.error.count) e["count"] = *cfg.error.count;
  e["pattern"] = cfg.error.pattern == CorruptionPattern::Random ? "random" : "consecutive";
  e["run_length"] = cfg.error.run_length;
  e["seed"] = cfg.error.seed;
  return {{"blocks", cfg.blocks}, {"block_size", cfg.block_size}, {"seed", cfg.seed}, {"error", e}};
}

}  // namespace distaudit::cloudsim

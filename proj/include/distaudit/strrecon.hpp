#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "distaudit/errors.hpp"
#include "distaudit/numeric.hpp"
#include "distaudit/rng.hpp"
#include "distaudit/setrecon.hpp"

namespace distaudit::strrecon {

/// Enumeration refuses graphs whose raw Eulerian cycle count exceeds this;
/// protocol strings are short so the guard never fires in normal use.
inline constexpr uint64_t kMaxRawCycles = 1000000;

/// Multiset of overlapping length-l_m pieces of a sentinel-decorated string.
struct PieceMultiset {
  unsigned mask_len = 0;
  char sentinel = '$';
  std::map<std::string, uint32_t> counts;
  uint64_t total = 0;  // piece occurrences = |decorated| - l_m + 1

  std::string first_piece() const {
    for (auto& [p, c] : counts) {
      if (p.front() == sentinel) return p;
    }
    throw malformed_multiset_error("no piece begins with the sentinel");
  }
  std::string last_piece() const {
    for (auto& [p, c] : counts) {
      if (p.back() == sentinel) return p;
    }
    throw malformed_multiset_error("no piece ends with the sentinel");
  }
};

/// Decorate s with one sentinel at each end and slide a width-l_m window in
/// steps of one.
inline PieceMultiset shred(const std::string& s, unsigned mask_len, char sentinel = '$') {
  if (mask_len < 2) throw invalid_input_error("mask length must be at least 2");
  if (s.size() + 1 < mask_len) throw invalid_input_error("string shorter than mask length - 1");
  for (char ch : s) {
    if (ch == sentinel) throw invalid_input_error("sentinel occurs in the input string");
    if (ch != '0' && ch != '1') throw invalid_input_error("input string must be binary");
  }
  PieceMultiset ms;
  ms.mask_len = mask_len;
  ms.sentinel = sentinel;
  const std::string decorated = sentinel + s + sentinel;
  for (size_t i = 0; i + mask_len <= decorated.size(); ++i) {
    ++ms.counts[decorated.substr(i, mask_len)];
    ++ms.total;
  }
  return ms;
}

/// de Bruijn multigraph restricted to the observed pieces: one labeled arc
/// per piece occurrence between its (l_m-1)-gram prefix and suffix, plus one
/// artificial arc closing the Eulerian condition.
struct ModifiedDeBruijnGraph {
  struct ArcGroup {
    int to = -1;
    std::string label;
    uint32_t count = 0;
    bool artificial = false;
  };

  unsigned mask_len = 0;
  char sentinel = '$';
  std::vector<std::string> vertex_names;
  std::vector<std::vector<ArcGroup>> out;  // label-descending per vertex; artificial arc last
  int start = -1;  // sentinel-prefixed vertex
  int end = -1;    // sentinel-suffixed vertex
  uint64_t total_arcs = 0;  // includes the artificial arc
};

inline ModifiedDeBruijnGraph build_graph(const PieceMultiset& ms) {
  if (ms.counts.empty()) throw malformed_multiset_error("empty piece multiset");
  const unsigned lm = ms.mask_len;

  std::string first, last;
  for (auto& [p, c] : ms.counts) {
    if (p.size() != lm) throw malformed_multiset_error("piece length differs from mask length");
    const bool starts = p.front() == ms.sentinel;
    const bool ends = p.back() == ms.sentinel;
    if (starts && ends) throw malformed_multiset_error("piece carries the sentinel at both ends");
    if (starts) {
      if (!first.empty() || c != 1) throw malformed_multiset_error("boundary start piece must be unique");
      first = p;
    }
    if (ends) {
      if (!last.empty() || c != 1) throw malformed_multiset_error("boundary end piece must be unique");
      last = p;
    }
    if (std::count(p.begin(), p.end(), ms.sentinel) > 1) {
      throw malformed_multiset_error("piece carries more than one sentinel");
    }
  }
  if (first.empty() || last.empty()) throw malformed_multiset_error("boundary pieces missing");

  ModifiedDeBruijnGraph g;
  g.mask_len = lm;
  g.sentinel = ms.sentinel;
  std::map<std::string, int> vertex_id;
  auto intern = [&](const std::string& name) {
    auto it = vertex_id.find(name);
    if (it != vertex_id.end()) return it->second;
    int id = static_cast<int>(g.vertex_names.size());
    vertex_id.emplace(name, id);
    g.vertex_names.push_back(name);
    g.out.emplace_back();
    return id;
  };

  for (auto& [p, c] : ms.counts) {
    const int u = intern(p.substr(0, lm - 1));
    const int v = intern(p.substr(1));
    g.out[u].push_back({v, p, c, false});
    g.total_arcs += c;
  }
  g.start = vertex_id.at(first.substr(0, lm - 1));
  g.end = vertex_id.at(last.substr(1));
  g.out[g.end].push_back({g.start, std::string(), 1, true});
  g.total_arcs += 1;

  // Exploration order: labels descending with the sentinel ranked lowest;
  // this pins cycle indices so both hosts decode identically. The artificial
  // arc always sorts last.
  for (auto& arcs : g.out) {
    std::sort(arcs.begin(), arcs.end(), [&](const auto& a, const auto& b) {
      if (a.artificial != b.artificial) return b.artificial;
      return a.label > b.label;
    });
  }

  // Eulerian conditions: balanced everywhere and weakly connected.
  std::vector<int64_t> in(g.vertex_names.size(), 0), outd(g.vertex_names.size(), 0);
  for (size_t u = 0; u < g.out.size(); ++u) {
    for (auto& arc : g.out[u]) {
      outd[u] += arc.count;
      in[arc.to] += arc.count;
    }
  }
  for (size_t u = 0; u < g.vertex_names.size(); ++u) {
    if (in[u] != outd[u]) throw malformed_multiset_error("multiset is not balanced as a de Bruijn graph");
  }
  std::vector<int> comp(g.vertex_names.size(), -1);
  std::vector<int> stack{0};
  comp[0] = 0;
  std::vector<std::vector<int>> und(g.vertex_names.size());
  for (size_t u = 0; u < g.out.size(); ++u) {
    for (auto& arc : g.out[u]) {
      und[u].push_back(arc.to);
      und[arc.to].push_back(static_cast<int>(u));
    }
  }
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : und[u]) {
      if (comp[v] < 0) {
        comp[v] = 0;
        stack.push_back(v);
      }
    }
  }
  for (size_t u = 0; u < g.vertex_names.size(); ++u) {
    if (comp[u] < 0) throw malformed_multiset_error("multiset graph is not connected");
  }
  return g;
}

struct CycleCounts {
  uint64_t raw = 0;       // backtracking enumeration length (parallel arcs distinguishable)
  uint64_t distinct = 0;  // BEST count corrected for parallel arcs
};

namespace detail {

using int128 = __int128;

inline int128 checked_mul(int128 a, int128 b) {
  int128 r;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw too_many_cycles_error("cycle count overflows 128-bit arithmetic");
  }
  return r;
}

// Exact integer determinant, fraction-free Bareiss elimination.
inline int128 bareiss_det(std::vector<std::vector<int128>> m) {
  const size_t n = m.size();
  if (n == 0) return 1;
  int sign = 1;
  int128 prev = 1;
  for (size_t k = 0; k + 1 < n; ++k) {
    size_t pivot = k;
    while (pivot < n && m[pivot][k] == 0) ++pivot;
    if (pivot == n) return 0;
    if (pivot != k) {
      std::swap(m[pivot], m[k]);
      sign = -sign;
    }
    for (size_t i = k + 1; i < n; ++i) {
      for (size_t j = k + 1; j < n; ++j) {
        int128 num = checked_mul(m[i][j], m[k][k]) - checked_mul(m[i][k], m[k][j]);
        m[i][j] = num / prev;
      }
      m[i][k] = 0;
    }
    prev = m[k][k];
  }
  return sign > 0 ? m[n - 1][n - 1] : -m[n - 1][n - 1];
}

}  // namespace detail

/// Count Eulerian cycles two ways at once: `distinct` by the BEST formula
/// Delta * prod (d_i - 1)! / prod a_ij! on the Kirchhoff matrix C = M - A,
/// and `raw` = distinct * prod a_ij!, which must equal the backtracking
/// enumeration length.
inline CycleCounts count_cycles_best(const ModifiedDeBruijnGraph& g) {
  const size_t n = g.vertex_names.size();
  std::vector<std::vector<detail::int128>> c(n, std::vector<detail::int128>(n, 0));
  std::vector<int64_t> degree(n, 0);
  detail::int128 parallel_fact = 1;
  for (size_t u = 0; u < n; ++u) {
    for (auto& arc : g.out[u]) {
      degree[arc.to] += arc.count;
      c[u][arc.to] -= arc.count;
      for (uint32_t i = 2; i <= arc.count; ++i) parallel_fact = detail::checked_mul(parallel_fact, i);
    }
  }
  for (size_t u = 0; u < n; ++u) c[u][u] += degree[u];

  std::vector<std::vector<detail::int128>> minor(n - 1, std::vector<detail::int128>(n - 1, 0));
  for (size_t i = 0; i + 1 < n; ++i) {
    for (size_t j = 0; j + 1 < n; ++j) minor[i][j] = c[i][j];
  }
  detail::int128 delta = detail::bareiss_det(std::move(minor));
  if (delta < 0) delta = -delta;

  detail::int128 raw = delta;
  for (size_t u = 0; u < n; ++u) {
    for (int64_t i = 2; i <= degree[u] - 1; ++i) raw = detail::checked_mul(raw, i);
  }
  if (raw > static_cast<detail::int128>(UINT64_MAX)) {
    throw too_many_cycles_error("raw Eulerian cycle count exceeds 64 bits");
  }
  CycleCounts counts;
  counts.raw = static_cast<uint64_t>(raw);
  counts.distinct = static_cast<uint64_t>(raw / parallel_fact);
  if (static_cast<detail::int128>(counts.distinct) * parallel_fact != raw) {
    throw too_many_cycles_error("BEST parallel-arc correction is not integral");
  }
  return counts;
}

namespace detail {

/// Depth-first raw enumeration in deterministic order; parallel arcs are
/// distinguishable slots, so a group with r unused copies branches r times.
/// The artificial arc may only close the circuit as the final arc, which is
/// what maps each rotation class to exactly one enumerated cycle.
inline void for_each_cycle(const ModifiedDeBruijnGraph& g,
                           const std::function<bool(const std::string&)>& fn) {
  std::vector<std::vector<uint32_t>> used(g.out.size());
  for (size_t u = 0; u < g.out.size(); ++u) used[u].resize(g.out[u].size(), 0);
  std::string decoded = g.vertex_names[g.start];
  decoded.reserve(g.vertex_names[g.start].size() + g.total_arcs);
  uint64_t arcs_used = 0;
  bool keep_going = true;

  std::function<void(int)> dfs = [&](int v) {
    if (!keep_going) return;
    if (arcs_used == g.total_arcs) {
      if (v == g.start) keep_going = fn(decoded);
      return;
    }
    auto& arcs = g.out[v];
    for (size_t gi = 0; gi < arcs.size() && keep_going; ++gi) {
      const auto& arc = arcs[gi];
      const uint32_t remaining = arc.count - used[v][gi];
      if (remaining == 0) continue;
      if (arc.artificial && arcs_used != g.total_arcs - 1) continue;
      for (uint32_t rep = 0; rep < remaining && keep_going; ++rep) {
        ++used[v][gi];
        ++arcs_used;
        if (!arc.artificial) decoded.push_back(arc.label.back());
        dfs(arc.to);
        if (!arc.artificial) decoded.pop_back();
        --arcs_used;
        --used[v][gi];
      }
    }
  };
  dfs(g.start);
}

}  // namespace detail

/// All raw cycles in deterministic order, decoded to sentinel-decorated
/// strings. Guarded by kMaxRawCycles.
inline std::vector<std::string> enumerate_cycles(const ModifiedDeBruijnGraph& g) {
  if (count_cycles_best(g).raw > kMaxRawCycles) {
    throw too_many_cycles_error("raw cycle count exceeds the enumeration guard");
  }
  std::vector<std::string> cycles;
  detail::for_each_cycle(g, [&](const std::string& s) {
    cycles.push_back(s);
    return true;
  });
  return cycles;
}

/// 1-based index of the first cycle decoding to `decorated`.
inline std::optional<uint64_t> find_cycle_index(const ModifiedDeBruijnGraph& g,
                                                const std::string& decorated) {
  if (count_cycles_best(g).raw > kMaxRawCycles) {
    throw too_many_cycles_error("raw cycle count exceeds the enumeration guard");
  }
  uint64_t counter = 0;
  std::optional<uint64_t> found;
  detail::for_each_cycle(g, [&](const std::string& s) {
    ++counter;
    if (s == decorated) {
      found = counter;
      return false;
    }
    return true;
  });
  return found;
}

/// Decode the cycle at a given 1-based index.
inline std::string decode_cycle_at(const ModifiedDeBruijnGraph& g, uint64_t index) {
  const auto counts = count_cycles_best(g);
  if (counts.raw > kMaxRawCycles) {
    throw too_many_cycles_error("raw cycle count exceeds the enumeration guard");
  }
  if (index == 0 || index > counts.raw) {
    throw ambiguous_index_error("cycle index exceeds the graph's cycle count");
  }
  uint64_t counter = 0;
  std::string result;
  detail::for_each_cycle(g, [&](const std::string& s) {
    if (++counter == index) {
      result = s;
      return false;
    }
    return true;
  });
  return result;
}

/// A multiset transformed to a set of integers: each distinct piece is
/// concatenated with its occurrence count and read as a binary number.
/// Modular-hash mode substitutes the sentinel bit pattern inline and reduces
/// modulo hash_modulus, reporting collisions rather than accepting them. The
/// default mode instead frames the piece with a marker bit and a boundary
/// tag, which is injective for any piece content (a sentinel bit pattern that
/// happens to occur inside a piece cannot alias a boundary piece).
struct EncodedSet {
  std::set<uint64_t> values;
  std::map<uint64_t, std::pair<std::string, uint32_t>> to_piece;  // value -> (piece, count)
};

inline uint64_t encode_piece(const std::string& piece, uint32_t count, char sentinel,
                             const std::string& sentinel_encoding,
                             std::optional<uint64_t> hash_modulus) {
  std::string bits;
  if (hash_modulus) {
    for (char ch : piece) {
      if (ch == sentinel) {
        bits += sentinel_encoding;
      } else {
        bits += ch;
      }
    }
  } else {
    bits += '1';  // marker keeps leading zeros significant
    const bool starts = piece.front() == sentinel;
    const bool ends = piece.back() == sentinel;
    bits += starts ? "01" : (ends ? "10" : "00");
    for (char ch : piece) {
      if (ch != sentinel) bits += ch;
    }
  }
  const unsigned width = std::max(2u, bit_length(count));
  for (unsigned i = width; i-- > 0;) bits += ((count >> i) & 1) ? '1' : '0';
  if (bits.size() > 63) throw invalid_parameter_error("piece encoding exceeds 63 bits");
  uint64_t v = 0;
  for (char b : bits) v = (v << 1) | (b == '1' ? 1u : 0u);
  if (hash_modulus) v %= *hash_modulus;
  return v;
}

inline EncodedSet multiset_to_set(const PieceMultiset& ms, const std::string& sentinel_encoding = "1000101",
                                  std::optional<uint64_t> hash_modulus = std::nullopt) {
  if (sentinel_encoding.empty() ||
      sentinel_encoding.find_first_not_of("01") != std::string::npos) {
    throw invalid_parameter_error("sentinel encoding must be a non-empty bit pattern");
  }
  if (hash_modulus && *hash_modulus == 0) throw invalid_parameter_error("hash modulus must be positive");
  EncodedSet out;
  for (auto& [piece, count] : ms.counts) {
    const uint64_t v = encode_piece(piece, count, ms.sentinel, sentinel_encoding, hash_modulus);
    auto [it, inserted] = out.to_piece.emplace(v, std::make_pair(piece, count));
    if (!inserted) {
      throw hash_collision_error("piece hash collision between '" + it->second.first + "' and '" + piece + "'");
    }
    out.values.insert(v);
  }
  return out;
}

/// Remove then add (piece, count) entries, mirroring the set-difference
/// surgery on the hashed values.
inline PieceMultiset apply_difference(const PieceMultiset& ms,
                                      const std::vector<std::pair<std::string, uint32_t>>& remove,
                                      const std::vector<std::pair<std::string, uint32_t>>& add) {
  PieceMultiset out = ms;
  for (auto& [piece, count] : remove) {
    auto it = out.counts.find(piece);
    if (it == out.counts.end() || it->second != count) {
      throw malformed_multiset_error("difference removal does not match local multiset");
    }
    out.total -= count;
    out.counts.erase(it);
  }
  for (auto& [piece, count] : add) {
    if (piece.size() != out.mask_len) throw malformed_multiset_error("received piece has wrong length");
    auto [it, inserted] = out.counts.emplace(piece, count);
    if (!inserted) throw malformed_multiset_error("received piece already present after removal");
    out.total += count;
  }
  return out;
}

/// Per-session traffic counters, asserted by the communication tests.
struct ChannelStats {
  uint64_t eval_pairs = 0;
  uint64_t pieces = 0;
  uint64_t indices = 0;
  uint64_t diff_values = 0;
  uint64_t messages = 0;
};

// --- session wire messages (JSON canonical) ---------------------------------

/// First message: characteristic-polynomial evaluations of the sender's piece
/// set, its cardinality, and the sender's cycle index.
struct OpeningMessage {
  setrecon::CharPolyEvaluations evals;
  uint64_t cycle_index = 0;
};

/// Reply from the reconciling side: the hashed values it still needs pieces
/// for, the difference pieces it owns, and its own cycle index.
struct DifferenceMessage {
  std::vector<uint64_t> need_values;
  std::vector<std::pair<std::string, uint32_t>> pieces;
  uint64_t cycle_index = 0;
};

/// Closing message: the pieces answering a DifferenceMessage's value list.
struct PiecesMessage {
  std::vector<std::pair<std::string, uint32_t>> pieces;
};

namespace detail {

inline nlohmann::json pieces_to_json(const std::vector<std::pair<std::string, uint32_t>>& pieces) {
  nlohmann::json arr = nlohmann::json::array();
  for (auto& [piece, count] : pieces) arr.push_back({{"piece", piece}, {"count", count}});
  return arr;
}

inline std::vector<std::pair<std::string, uint32_t>> pieces_from_json(const nlohmann::json& arr) {
  std::vector<std::pair<std::string, uint32_t>> out;
  for (auto& p : arr) {
    out.emplace_back(p.at("piece").get<std::string>(), p.at("count").get<uint32_t>());
  }
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const OpeningMessage& m) {
  auto j = setrecon::to_json(m.evals);
  j["index"] = m.cycle_index;
  return j;
}

inline OpeningMessage opening_from_json(const nlohmann::json& j) {
  OpeningMessage m;
  m.evals = setrecon::evaluations_from_json(j);
  m.cycle_index = j.at("index").get<uint64_t>();
  return m;
}

inline nlohmann::json to_json(const DifferenceMessage& m) {
  return {{"need_values", m.need_values},
          {"pieces", detail::pieces_to_json(m.pieces)},
          {"index", m.cycle_index}};
}

inline DifferenceMessage difference_from_json(const nlohmann::json& j) {
  DifferenceMessage m;
  m.need_values = j.at("need_values").get<std::vector<uint64_t>>();
  m.pieces = detail::pieces_from_json(j.at("pieces"));
  m.cycle_index = j.at("index").get<uint64_t>();
  return m;
}

inline nlohmann::json to_json(const PiecesMessage& m) {
  return {{"pieces", detail::pieces_to_json(m.pieces)}};
}

inline PiecesMessage pieces_from_json_message(const nlohmann::json& j) {
  PiecesMessage m;
  m.pieces = detail::pieces_from_json(j.at("pieces"));
  return m;
}

struct ReconOptions {
  unsigned mask_len = 3;
  char sentinel = '$';
  std::string sentinel_encoding = "1000101";
  std::optional<uint64_t> hash_modulus;  // modular-hash demo mode only
};

struct HostState {
  std::string original;
  std::string decorated;
  PieceMultiset ms;
  ModifiedDeBruijnGraph graph;
  EncodedSet enc;
  uint64_t cycle_index = 0;  // 1-based, canonical (smallest)
  CycleCounts counts;
};

inline HostState prepare_host(const std::string& s, const ReconOptions& opts) {
  HostState h;
  h.original = s;
  h.decorated = opts.sentinel + s + opts.sentinel;
  h.ms = shred(s, opts.mask_len, opts.sentinel);
  h.graph = build_graph(h.ms);
  h.counts = count_cycles_best(h.graph);
  auto idx = find_cycle_index(h.graph, h.decorated);
  if (!idx) throw protocol_error("own string not found among Eulerian cycles");
  h.cycle_index = *idx;
  h.enc = multiset_to_set(h.ms, opts.sentinel_encoding, opts.hash_modulus);
  return h;
}

struct StringReconResult {
  std::string a_learns;  // host B's string, recovered at host A
  std::string b_learns;  // host A's string, recovered at host B
  ChannelStats stats;
  HostState host_a;
  HostState host_b;
  std::set<uint64_t> only_in_a;  // S_A \ S_B (hashed values)
  std::set<uint64_t> only_in_b;  // S_B \ S_A
};

namespace detail {

inline std::vector<std::pair<std::string, uint32_t>> pieces_for(const EncodedSet& enc,
                                                                const std::set<uint64_t>& values) {
  std::vector<std::pair<std::string, uint32_t>> out;
  out.reserve(values.size());
  for (uint64_t v : values) {
    auto it = enc.to_piece.find(v);
    if (it == enc.to_piece.end()) {
      throw reconciliation_bound_error("reconciled value does not map to a local piece");
    }
    out.push_back(it->second);
  }
  return out;
}

inline std::string strip_sentinels(const std::string& decorated, char sentinel) {
  if (decorated.size() < 2 || decorated.front() != sentinel || decorated.back() != sentinel) {
    throw protocol_error("decoded cycle is not sentinel-decorated");
  }
  return decorated.substr(1, decorated.size() - 2);
}

}  // namespace detail

/// Full STRING-RECON between two hosts. Host A opens with its characteristic
/// polynomial evaluations, cardinality, and cycle index; host B carries the
/// interpolation and factoring, answers with the difference it knows plus the
/// value list it needs, and host A closes with the matching pieces. Both ends
/// rebuild the other's graph and decode by the exchanged index.
inline StringReconResult string_recon(const std::string& host_a, const std::string& host_b,
                                      const setrecon::ReconConfig& config, const ReconOptions& opts,
                                      Rng& rng) {
  StringReconResult r;
  r.host_a = prepare_host(host_a, opts);
  r.host_b = prepare_host(host_b, opts);

  // A -> B: |S_A|, evaluations, n_A.
  OpeningMessage opening{setrecon::char_poly_eval(r.host_a.enc.values, config), r.host_a.cycle_index};
  r.stats.eval_pairs += opening.evals.pairs.size();
  r.stats.indices += 1;
  r.stats.messages += 1;

  // B reconciles; numerator roots are S_A \ S_B, denominator roots S_B \ S_A.
  auto delta = setrecon::reconcile(r.host_b.enc.values, opening.evals, config, rng);
  r.only_in_a = delta.only_remote;
  r.only_in_b = delta.only_local;

  // B -> A: pieces for S_B \ S_A, the value list S_A \ S_B it needs, n_B.
  DifferenceMessage reply{{delta.only_remote.begin(), delta.only_remote.end()},
                          detail::pieces_for(r.host_b.enc, delta.only_local),
                          r.host_b.cycle_index};
  r.stats.pieces += reply.pieces.size();
  r.stats.diff_values += reply.need_values.size();
  r.stats.indices += 1;
  r.stats.messages += 1;

  // A -> B: pieces for S_A \ S_B.
  PiecesMessage closing{
      detail::pieces_for(r.host_a.enc, {reply.need_values.begin(), reply.need_values.end()})};
  r.stats.pieces += closing.pieces.size();
  r.stats.messages += 1;

  // B rebuilds MS_A and decodes sigma_A at n_A.
  auto ms_a_at_b = apply_difference(r.host_b.ms, reply.pieces, closing.pieces);
  auto graph_a_at_b = build_graph(ms_a_at_b);
  if (opening.cycle_index > count_cycles_best(graph_a_at_b).raw) {
    throw ambiguous_index_error("exchanged index exceeds rebuilt graph's cycle count");
  }
  r.b_learns = detail::strip_sentinels(decode_cycle_at(graph_a_at_b, opening.cycle_index), opts.sentinel);

  // A rebuilds MS_B and decodes sigma_B at n_B.
  auto ms_b_at_a = apply_difference(r.host_a.ms, closing.pieces, reply.pieces);
  auto graph_b_at_a = build_graph(ms_b_at_a);
  if (reply.cycle_index > count_cycles_best(graph_b_at_a).raw) {
    throw ambiguous_index_error("exchanged index exceeds rebuilt graph's cycle count");
  }
  r.a_learns = detail::strip_sentinels(decode_cycle_at(graph_b_at_a, reply.cycle_index), opts.sentinel);
  return r;
}

inline StringReconResult string_recon(const std::string& host_a, const std::string& host_b,
                                      unsigned mask_len, const setrecon::ReconConfig& config) {
  ReconOptions opts;
  opts.mask_len = mask_len;
  Rng rng(0x57a71c);
  return string_recon(host_a, host_b, config, opts, rng);
}

/// Choose a session field for two encoded sets the coordinator both knows:
/// m-bar is the exact difference (at least one) and q the next prime above
/// 2^b + m-bar for the largest hashed value.
inline setrecon::ReconConfig config_for_sets(const std::set<uint64_t>& a, const std::set<uint64_t>& b,
                                             uint64_t extra_slack = 0) {
  uint64_t diff = 0;
  uint64_t max_elem = 1;
  for (uint64_t v : a) {
    diff += b.count(v) ? 0 : 1;
    max_elem = std::max(max_elem, v);
  }
  for (uint64_t v : b) {
    diff += a.count(v) ? 0 : 1;
    max_elem = std::max(max_elem, v);
  }
  const uint64_t m_bar = std::max<uint64_t>(1, diff + extra_slack);
  return setrecon::make_config(m_bar, next_prime_above((1ull << bit_length(max_elem)) + m_bar));
}

struct DistributeResult {
  std::string received_key;  // the SUBTPA's own TDK after reconciliation
  ChannelStats stats;
  setrecon::ReconConfig config;
};

/// XOR a bit string with a fixed public keystream; applying it twice is the
/// identity. Keys and key serializations carry long constant runs (sparse
/// TDKs, zero skip/leap fields) that would flood the piece graph with
/// parallel arcs; both parties whiten before shredding and unwhiten after
/// decoding. Difference positions are unchanged, so the exchange volume is
/// the same as for the raw strings.
inline std::string whiten_bits(std::string s) {
  uint64_t stream = 0x5ab01c0de5ab01c0ull;
  uint64_t word = 0;
  int left = 0;
  for (char& ch : s) {
    if (ch != '0' && ch != '1') throw invalid_input_error("whitening expects a binary string");
    if (left == 0) {
      stream = splitmix64(stream);
      word = stream;
      left = 64;
    }
    ch = static_cast<char>(ch ^ (word & 1));
    word >>= 1;
    --left;
  }
  return s;
}

/// Distribute one TDK to one SUBTPA. The coordinator holds the Sobol key
/// string and every TDK; the SUBTPA holds only the Sobol key string. The
/// coordinator sends evaluations and answers piece lookups; the interpolation
/// and factoring run on the SUBTPA side.
inline DistributeResult distribute_tdk(const std::vector<std::string>& coordinator_keys,
                                       const std::string& common_key, size_t subtpa_id,
                                       const ReconOptions& opts, Rng& rng) {
  if (subtpa_id >= coordinator_keys.size()) throw invalid_parameter_error("subtpa id out of range");
  const std::string tdk = whiten_bits(coordinator_keys[subtpa_id]);

  // Coordinator side: bookkeeping state for its TDK.
  HostState coord = prepare_host(tdk, opts);
  // SUBTPA side: state for the common key string.
  HostState agent = prepare_host(whiten_bits(common_key), opts);

  DistributeResult result;
  result.config = config_for_sets(coord.enc.values, agent.enc.values);

  // Coordinator -> SUBTPA: evaluations, cardinality, n for the TDK string.
  OpeningMessage opening{setrecon::char_poly_eval(coord.enc.values, result.config), coord.cycle_index};
  result.stats.eval_pairs += opening.evals.pairs.size();
  result.stats.indices += 1;
  result.stats.messages += 1;

  // SUBTPA carries the heavy reconciliation work.
  auto delta = setrecon::reconcile(agent.enc.values, opening.evals, result.config, rng);

  // SUBTPA -> Coordinator: values it needs; Coordinator -> SUBTPA: pieces.
  DifferenceMessage reply{{delta.only_remote.begin(), delta.only_remote.end()}, {}, agent.cycle_index};
  result.stats.diff_values += reply.need_values.size();
  result.stats.messages += 1;
  PiecesMessage closing{
      detail::pieces_for(coord.enc, {reply.need_values.begin(), reply.need_values.end()})};
  result.stats.pieces += closing.pieces.size();
  result.stats.messages += 1;

  auto agent_removals = detail::pieces_for(agent.enc, delta.only_local);
  auto ms_tdk = apply_difference(agent.ms, agent_removals, closing.pieces);
  auto graph_tdk = build_graph(ms_tdk);
  if (coord.cycle_index > count_cycles_best(graph_tdk).raw) {
    throw ambiguous_index_error("exchanged index exceeds rebuilt graph's cycle count");
  }
  result.received_key =
      whiten_bits(detail::strip_sentinels(decode_cycle_at(graph_tdk, coord.cycle_index), opts.sentinel));
  return result;
}

}  // namespace distaudit::strrecon

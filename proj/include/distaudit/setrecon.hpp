#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distaudit/errors.hpp"
#include "distaudit/gf.hpp"
#include "distaudit/numeric.hpp"
#include "distaudit/rng.hpp"

namespace distaudit::setrecon {

/// Session parameters both parties agree on before reconciling: the
/// difference bound m-bar, the prime field, and m-bar shared evaluation
/// points lying outside the element universe.
struct ReconConfig {
  uint64_t m_bar = 0;
  uint64_t q = 0;
  std::vector<int64_t> eval_points;  // signed canonical form, e.g. -1, -2, ...

  uint64_t point_mod_q(size_t i) const {
    int64_t p = eval_points[i] % static_cast<int64_t>(q);
    if (p < 0) p += static_cast<int64_t>(q);
    return static_cast<uint64_t>(p);
  }

  void validate() const {
    if (m_bar == 0) throw invalid_parameter_error("m_bar must be positive");
    if (!is_prime_u64(q) || q < 3) throw invalid_parameter_error("field modulus must be an odd prime");
    if (eval_points.size() != m_bar) throw invalid_parameter_error("need exactly m_bar evaluation points");
    std::set<uint64_t> distinct;
    for (size_t i = 0; i < eval_points.size(); ++i) distinct.insert(point_mod_q(i));
    if (distinct.size() != eval_points.size()) throw invalid_parameter_error("evaluation points must be distinct mod q");
  }
};

/// Points -1, -2, ..., -m_bar as in the worked protocol.
inline ReconConfig make_config(uint64_t m_bar, uint64_t q) {
  ReconConfig cfg;
  cfg.m_bar = m_bar;
  cfg.q = q;
  for (uint64_t k = 1; k <= m_bar; ++k) cfg.eval_points.push_back(-static_cast<int64_t>(k));
  cfg.validate();
  return cfg;
}

/// Pick a field satisfying q > 2^b + m_bar for the given element bit length.
inline ReconConfig make_config_for_bitlength(uint64_t m_bar, unsigned b) {
  return make_config(m_bar, next_prime_above((1ull << b) + m_bar));
}

/// One party's reconciliation message: evaluations of its characteristic
/// polynomial at the shared points, plus its set cardinality.
struct CharPolyEvaluations {
  uint64_t cardinality = 0;
  std::vector<std::pair<int64_t, uint64_t>> pairs;  // (signed point, value)
};

/// Evaluate prod_{s in S} (Z - s) over GF(q) at every configured point.
inline CharPolyEvaluations char_poly_eval(const std::set<uint64_t>& s, const ReconConfig& cfg) {
  cfg.validate();
  CharPolyEvaluations out;
  out.cardinality = s.size();
  for (uint64_t e : s) {
    if (e >= cfg.q) throw invalid_parameter_error("set element >= field modulus");
  }
  {
    uint64_t max_elem = s.empty() ? 0 : *s.rbegin();
    if (cfg.q <= (1ull << bit_length(max_elem)) + cfg.m_bar) {
      throw invalid_parameter_error("field modulus violates q > 2^b + m_bar");
    }
  }
  out.pairs.reserve(cfg.m_bar);
  for (size_t i = 0; i < cfg.m_bar; ++i) {
    const uint64_t z = cfg.point_mod_q(i);
    uint64_t v = 1;
    for (uint64_t e : s) v = mulmod_u64(v, (z + cfg.q - e) % cfg.q, cfg.q);
    if (v == 0) throw invalid_parameter_error("evaluation point collides with a set element");
    out.pairs.emplace_back(cfg.eval_points[i], v);
  }
  return out;
}

/// Outcome of a reconciliation, oriented from the local party's view.
struct ReconDelta {
  std::set<uint64_t> only_remote;  // elements the remote set has and we lack
  std::set<uint64_t> only_local;   // elements we have and the remote set lacks
  gf::RationalFunction fitted;
  std::vector<uint64_t> ratio_values;  // remote/local at each point
};

/// Recover the symmetric difference from the remote party's evaluations.
/// The ratio of evaluations interpolates to a rational function whose
/// numerator roots are remote-only elements and denominator roots are
/// local-only elements. Requires |true difference| <= m_bar.
inline ReconDelta reconcile(const std::set<uint64_t>& local, const CharPolyEvaluations& remote,
                            const ReconConfig& cfg, Rng& rng) {
  cfg.validate();
  if (remote.pairs.size() != cfg.m_bar) throw invalid_parameter_error("remote evaluation count != m_bar");
  CharPolyEvaluations mine = char_poly_eval(local, cfg);

  ReconDelta delta;
  std::vector<std::pair<uint64_t, uint64_t>> samples;
  samples.reserve(cfg.m_bar);
  for (size_t i = 0; i < cfg.m_bar; ++i) {
    if (remote.pairs[i].first != cfg.eval_points[i]) {
      throw invalid_parameter_error("remote evaluations use different points");
    }
    if (remote.pairs[i].second % cfg.q == 0) {
      throw invalid_parameter_error("remote evaluation is zero at a shared point");
    }
    const uint64_t ratio =
        mulmod_u64(remote.pairs[i].second % cfg.q, gf::detail::inv_mod(mine.pairs[i].second, cfg.q), cfg.q);
    delta.ratio_values.push_back(ratio);
    samples.emplace_back(cfg.point_mod_q(i), ratio);
  }

  const int64_t d = static_cast<int64_t>(remote.cardinality) - static_cast<int64_t>(local.size());
  delta.fitted = gf::interpolate_rational(samples, cfg.m_bar, d, cfg.q);

  for (const gf::FieldPoly* part : {&delta.fitted.numerator, &delta.fitted.denominator}) {
    if (part->degree() > 0 && (!gf::is_square_free(*part) || !gf::splits_into_linear(*part))) {
      throw reconciliation_bound_error("difference polynomial does not split; m_bar too small");
    }
  }
  delta.only_remote = delta.fitted.numerator.degree() > 0 ? gf::find_roots(delta.fitted.numerator, rng)
                                                          : std::set<uint64_t>{};
  delta.only_local = delta.fitted.denominator.degree() > 0 ? gf::find_roots(delta.fitted.denominator, rng)
                                                           : std::set<uint64_t>{};
  for (uint64_t e : delta.only_local) {
    if (!local.count(e)) throw reconciliation_bound_error("recovered local-only element not in local set; m_bar too small");
  }
  for (uint64_t e : delta.only_remote) {
    if (local.count(e)) throw reconciliation_bound_error("recovered remote-only element already local; m_bar too small");
  }
  return delta;
}

inline ReconDelta reconcile(const std::set<uint64_t>& local, const CharPolyEvaluations& remote,
                            const ReconConfig& cfg) {
  Rng rng(0x5e7c04u);
  return reconcile(local, remote, cfg, rng);
}

/// (local minus only_local) union only_remote: the remote party's set.
inline std::set<uint64_t> union_after_reconcile(const std::set<uint64_t>& local,
                                                const std::set<uint64_t>& only_remote,
                                                const std::set<uint64_t>& only_local) {
  std::set<uint64_t> out = local;
  for (uint64_t e : only_local) out.erase(e);
  for (uint64_t e : only_remote) out.insert(e);
  return out;
}

/// Retry helper the caller invokes explicitly; never applied implicitly.
inline ReconConfig doubled(const ReconConfig& cfg) {
  ReconConfig next = make_config(cfg.m_bar * 2, cfg.q);
  if (next.q <= next.m_bar * 2) next.q = next_prime_above(next.q + next.m_bar);
  next.validate();
  return next;
}

// --- wire formats -----------------------------------------------------------

inline nlohmann::json to_json(const CharPolyEvaluations& ev) {
  nlohmann::json pairs = nlohmann::json::array();
  for (auto& [p, v] : ev.pairs) pairs.push_back({p, v});
  return {{"cardinality", ev.cardinality}, {"pairs", pairs}};
}

inline CharPolyEvaluations evaluations_from_json(const nlohmann::json& j) {
  CharPolyEvaluations ev;
  ev.cardinality = j.at("cardinality").get<uint64_t>();
  for (auto& p : j.at("pairs")) {
    ev.pairs.emplace_back(p.at(0).get<int64_t>(), p.at(1).get<uint64_t>());
  }
  return ev;
}

/// Length-prefixed little-endian binary: u32 cardinality, u32 count, then
/// count * (i64 point, u64 value).
inline std::vector<uint8_t> to_binary(const CharPolyEvaluations& ev) {
  std::vector<uint8_t> out;
  auto put = [&out](uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  };
  put(ev.cardinality, 4);
  put(ev.pairs.size(), 4);
  for (auto& [p, v] : ev.pairs) {
    put(static_cast<uint64_t>(p), 8);
    put(v, 8);
  }
  return out;
}

inline CharPolyEvaluations evaluations_from_binary(const std::vector<uint8_t>& buf) {
  auto get = [&buf](size_t off, int bytes) {
    if (off + bytes > buf.size()) throw invalid_parameter_error("truncated reconciliation message");
    uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(buf[off + i]) << (8 * i);
    return v;
  };
  CharPolyEvaluations ev;
  ev.cardinality = get(0, 4);
  const uint64_t count = get(4, 4);
  for (uint64_t i = 0; i < count; ++i) {
    const size_t base = 8 + i * 16;
    ev.pairs.emplace_back(static_cast<int64_t>(get(base, 8)), get(base + 8, 8));
  }
  return ev;
}

}  // namespace distaudit::setrecon

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sbmre/env.hpp"
#include "sbmre/rng.hpp"

namespace sbmre {

using SiteCounts = std::map<std::int64_t, std::uint64_t>;

// Sparse occupancy B_{n,x} at one lattice time. When origin tags are on
// (pair-moment experiments), counts is kept equal to the sum over tags.
struct ParticleField {
  std::int64_t step_n = 0;
  SiteCounts counts;
  std::optional<std::vector<SiteCounts>> tags;

  std::uint64_t total_mass() const {
    std::uint64_t m = 0;
    for (const auto& [x, c] : counts) m += c;
    return m;
  }
};

// Per-source-site aggregates of one transition; sufficient statistic for
// every martingale increment downstream.
struct SiteRecord {
  std::int64_t site = 0;
  int xi = 0;
  std::uint64_t parents_left = 0, parents_right = 0;
  std::uint64_t children_left = 0, children_right = 0;
};

struct StepRecord {
  std::int64_t step_n = 0;  // time of the source field
  LawKind law = LawKind::ExampleBernoulli;
  std::vector<SiteRecord> sites;  // sorted by site
};

enum class EnvMode { annealed, quenched };

struct RecordFlags {
  bool snapshots = false;
  bool step_records = false;
  bool ledger = false;
};

struct RunConfig {
  EnvSpec env;
  std::vector<std::pair<std::int64_t, std::uint64_t>> initial;
  std::int64_t horizon_steps = 0;
  std::uint64_t replicas = 1;
  std::uint64_t seed = 0;  // movement-stream base seed
  EnvMode mode = EnvMode::annealed;
  RecordFlags record;
};

inline ParticleField init_field(
    const std::vector<std::pair<std::int64_t, std::uint64_t>>& initial,
    bool tagged = false) {
  ParticleField f;
  if (tagged) f.tags.emplace();
  for (const auto& [site, count] : initial) {
    if (count == 0) continue;
    f.counts[site] += count;
    if (tagged) {
      // one tag per initial particle
      for (std::uint64_t i = 0; i < count; ++i) {
        f.tags->push_back(SiteCounts{{site, 1}});
      }
    }
  }
  return f;
}

namespace detail {

inline std::uint64_t binom(std::uint64_t trials, double p, SplitMix64& rng) {
  if (trials == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  std::binomial_distribution<long long> d(static_cast<long long>(trials), p);
  return static_cast<std::uint64_t>(d(rng));
}

inline void checked_add(SiteCounts& counts, std::int64_t x, std::uint64_t v,
                        std::int64_t step_n) {
  if (v == 0) return;
  std::uint64_t& slot = counts[x];
  constexpr std::uint64_t cap = (1ull << 63) - 1;
  if (slot > cap - v)
    throw std::overflow_error("site count overflow at step " +
                              std::to_string(step_n) + ", site " +
                              std::to_string(x));
  slot += v;
}

// One transition of a (site -> count) layer. Movements split per site as
// Binomial(B, 1/2); Example-law offspring aggregate to 2*Binomial(parents,
// q(2)) per direction because particles sharing (n,x) are exchangeable.
// CustomTable laws have no such structure and fall back to per-parent
// sampling (slower, documented).
inline void step_counts(const SiteCounts& counts, std::int64_t n,
                        const EnvSpec& env, SplitMix64& rng,
                        SiteCounts& out,
                        std::map<std::int64_t, SiteRecord>& rec) {
  for (const auto& [x, b] : counts) {
    if (b == 0) continue;
    SiteRecord& r = rec[x];
    r.site = x;
    r.xi = sample_xi(env, n, x);
    const std::uint64_t pl = binom(b, 0.5, rng);
    const std::uint64_t pr = b - pl;
    std::uint64_t cl = 0, cr = 0;
    if (env.law_kind == LawKind::ExampleBernoulli) {
      const double p2 = p_two(env, n, x);
      cl = 2 * binom(pl, p2, rng);
      cr = 2 * binom(pr, p2, rng);
    } else {
      const OffspringLaw law = offspring_pmf(env, n, x);
      std::vector<double> w;
      w.reserve(law.pmf.size());
      for (const auto& [k, p] : law.pmf) w.push_back(p);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      for (std::uint64_t i = 0; i < pl; ++i)
        cl += static_cast<std::uint64_t>(law.pmf[pick(rng)].first);
      for (std::uint64_t i = 0; i < pr; ++i)
        cr += static_cast<std::uint64_t>(law.pmf[pick(rng)].first);
    }
    r.parents_left += pl;
    r.parents_right += pr;
    r.children_left += cl;
    r.children_right += cr;
    checked_add(out, x - 1, cl, n);
    checked_add(out, x + 1, cr, n);
  }
}

}  // namespace detail

// One lattice time step. Children inherit the parent's move: offspring
// are attributed to the environment at the departure site (n,x) and placed
// at the arrival site x -/+ 1.
inline std::pair<ParticleField, StepRecord> step(const ParticleField& field,
                                                 const EnvSpec& env,
                                                 SplitMix64& rng) {
  ParticleField next;
  next.step_n = field.step_n + 1;
  StepRecord rec;
  rec.step_n = field.step_n;
  rec.law = env.law_kind;
  std::map<std::int64_t, SiteRecord> by_site;
  if (field.tags) {
    next.tags.emplace(field.tags->size());
    for (std::size_t t = 0; t < field.tags->size(); ++t) {
      detail::step_counts((*field.tags)[t], field.step_n, env, rng,
                          (*next.tags)[t], by_site);
    }
    for (const auto& tag : *next.tags)
      for (const auto& [x, c] : tag)
        detail::checked_add(next.counts, x, c, field.step_n);
  } else {
    detail::step_counts(field.counts, field.step_n, env, rng, next.counts,
                        by_site);
  }
  rec.sites.reserve(by_site.size());
  for (auto& [x, r] : by_site) rec.sites.push_back(r);
  return {std::move(next), std::move(rec)};
}

inline EnvSpec replica_env(const RunConfig& cfg, std::uint64_t r) {
  if (cfg.mode == EnvMode::quenched) return cfg.env;
  EnvSpec env = cfg.env;
  env.seed = derive_stream_seed(cfg.env.seed, stream_tag::environment, r);
  return env;
}

inline SplitMix64 replica_rng(const RunConfig& cfg, std::uint64_t r) {
  return SplitMix64(derive_stream_seed(cfg.seed, stream_tag::movement, r));
}

// Runs one replica, invoking on_step(before, record, after) per transition.
// Deterministic given (cfg, r).
template <typename OnStep>
ParticleField simulate_replica(const RunConfig& cfg, std::uint64_t r,
                               OnStep on_step, bool tagged = false) {
  const EnvSpec env = replica_env(cfg, r);
  SplitMix64 rng = replica_rng(cfg, r);
  ParticleField field = init_field(cfg.initial, tagged);
  for (std::int64_t n = 0; n < cfg.horizon_steps; ++n) {
    auto [next, rec] = step(field, env, rng);
    on_step(field, rec, next);
    field = std::move(next);
  }
  return field;
}

// Parity invariant: with all-even initial sites, occupied sites at step n
// have parity n mod 2.
inline bool parity_ok(const ParticleField& field) {
  for (const auto& [x, c] : field.counts) {
    if (c == 0) continue;
    const bool even = ((x % 2) + 2) % 2 == 0;
    const bool step_even = field.step_n % 2 == 0;
    if (even != step_even) return false;
  }
  return true;
}

}  // namespace sbmre

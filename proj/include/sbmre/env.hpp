#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sbmre/rng.hpp"

namespace sbmre {

struct OffspringLaw {
  // (k, p) pairs, k a nonnegative offspring count.
  std::vector<std::pair<int, double>> pmf;

  void validate() const {
    double total = 0.0;
    for (const auto& [k, p] : pmf) {
      if (k < 0) throw std::invalid_argument("offspring count k < 0");
      if (p < 0.0) throw std::invalid_argument("offspring probability < 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("offspring pmf does not sum to 1");
  }
};

// E[V^p] under the law.
inline double law_moment(const OffspringLaw& law, int p) {
  double m = 0.0;
  for (const auto& [k, prob] : law.pmf)
    m += std::pow(static_cast<double>(k), p) * prob;
  return m;
}

enum class LawKind { ExampleBernoulli, CustomTable };

// Generator of the i.i.d. offspring-law field q_{n,x}. The field is never
// materialized: the site sign xi(n,x) is recomputed on demand from a
// counter-based hash of (seed, n, x), so an EnvSpec is O(1) memory and
// freely shareable across threads.
struct EnvSpec {
  std::uint64_t scale_N = 1;
  double beta = 0.0;
  double gamma_target = 1.0;
  std::uint64_t seed = 0;
  LawKind law_kind = LawKind::ExampleBernoulli;
  // CustomTable: one law per xi value (index 0 for xi=-1, 1 for xi=+1).
  std::array<OffspringLaw, 2> custom{};

  static EnvSpec example(std::uint64_t N, double beta, std::uint64_t seed,
                         double gamma_target = 1.0) {
    if (N == 0) throw std::invalid_argument("N must be positive");
    if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
    const double n4 = std::pow(static_cast<double>(N), 0.25);
    // q(0) and q(2) must both stay in [0,1].
    if (beta > n4)
      throw std::invalid_argument("beta > N^{1/4}: offspring law leaves [0,1]");
    EnvSpec env;
    env.scale_N = N;
    env.beta = beta;
    env.gamma_target = gamma_target;
    env.seed = seed;
    env.law_kind = LawKind::ExampleBernoulli;
    return env;
  }

  static EnvSpec custom_table(std::uint64_t N, OffspringLaw law_minus,
                              OffspringLaw law_plus, std::uint64_t seed) {
    law_minus.validate();
    law_plus.validate();
    EnvSpec env;
    env.scale_N = N;
    env.seed = seed;
    env.law_kind = LawKind::CustomTable;
    env.custom = {std::move(law_minus), std::move(law_plus)};
    return env;
  }
};

// Deterministic site sign: pack (seed, n, x) injectively, mix, take the
// low bit. Fixed bit-exact scheme so independent implementations agree.
inline int sample_xi(const EnvSpec& env, std::int64_t n, std::int64_t x) {
  const std::uint64_t counter = env.seed ^
      static_cast<std::uint64_t>(n) * 0x9E3779B97F4A7C15ull ^
      zigzag(x) * 0xBF58476D1CE4E5B9ull;
  return (splitmix_finalize(counter) & 1ull) ? 1 : -1;
}

// q_{n,x}(2) for the Example law; the hot path of the aggregated sampler.
inline double p_two(const EnvSpec& env, std::int64_t n, std::int64_t x) {
  const double n4 = std::pow(static_cast<double>(env.scale_N), 0.25);
  return 0.5 + env.beta * sample_xi(env, n, x) / (2.0 * n4);
}

inline OffspringLaw offspring_pmf(const EnvSpec& env, std::int64_t n,
                                  std::int64_t x) {
  if (env.law_kind == LawKind::CustomTable)
    return env.custom[sample_xi(env, n, x) > 0 ? 1 : 0];
  const double p2 = p_two(env, n, x);
  return OffspringLaw{{{0, 1.0 - p2}, {2, p2}}};
}

struct AuditRow {
  double beta = 0.0;
  std::uint64_t N = 0;
  double m1 = 0.0;           // E[m^{(1)}]
  double m2_minus_1 = 0.0;   // E[m^{(2)} - 1]
  double m4 = 0.0;           // E[m^{(4)}]
  double sqrtN_var = 0.0;    // N^{1/2} E[(m^{(1)} - 1)^2]
  double sqrtN_m4c = 0.0;    // N^{1/2} E[(m^{(1)} - 1)^4]
  double se = 0.0;           // 0 for closed-form rows
  bool mean_ok = false;      // m1 == 1
  bool beta2_ok = false;     // sqrtN_var == beta^2
  bool gamma_ok = false;     // m2_minus_1 == 1
};

struct AuditReport {
  std::vector<AuditRow> rows;
  bool all_ok() const {
    for (const auto& r : rows)
      if (!(r.mean_ok && r.beta2_ok && r.gamma_ok)) return false;
    return true;
  }
};

// Numerical audit of the first/second/fourth moment conditions. For the
// Example law xi takes two equiprobable values, so every entry is an exact
// closed form; CustomTable falls back to MC over sites.
inline AuditReport audit_assumption_a(const std::vector<double>& betas,
                                      const std::vector<std::uint64_t>& Ns,
                                      std::uint64_t seed = 1) {
  AuditReport report;
  for (double beta : betas) {
    for (std::uint64_t N : Ns) {
      const EnvSpec env = EnvSpec::example(N, beta, seed);
      AuditRow row;
      row.beta = beta;
      row.N = N;
      const double sqrtN = std::sqrt(static_cast<double>(N));
      double m1 = 0.0, m2 = 0.0, m4 = 0.0, v2 = 0.0, v4 = 0.0;
      for (int xi : {-1, 1}) {
        const double n4 = std::pow(static_cast<double>(N), 0.25);
        const double p2 = 0.5 + beta * xi / (2.0 * n4);
        const OffspringLaw law{{{0, 1.0 - p2}, {2, p2}}};
        const double mm1 = law_moment(law, 1);
        m1 += 0.5 * mm1;
        m2 += 0.5 * law_moment(law, 2);
        m4 += 0.5 * law_moment(law, 4);
        v2 += 0.5 * (mm1 - 1.0) * (mm1 - 1.0);
        v4 += 0.5 * std::pow(mm1 - 1.0, 4);
      }
      row.m1 = m1;
      row.m2_minus_1 = m2 - 1.0;
      row.m4 = m4;
      row.sqrtN_var = sqrtN * v2;
      row.sqrtN_m4c = sqrtN * v4;
      row.mean_ok = std::abs(row.m1 - 1.0) <= 1e-14;
      row.beta2_ok = std::abs(row.sqrtN_var - beta * beta) <= 1e-12;
      row.gamma_ok = std::abs(row.m2_minus_1 - 1.0) <= 1e-14;
      (void)env;
      report.rows.push_back(row);
    }
  }
  return report;
}

// MC audit over sites for a CustomTable environment; reports moment
// estimates with a shared standard-error scale on the m1 row.
inline AuditRow audit_custom_mc(const EnvSpec& env, std::uint64_t sites) {
  AuditRow row;
  row.beta = env.beta;
  row.N = env.scale_N;
  const double sqrtN = std::sqrt(static_cast<double>(env.scale_N));
  double s1 = 0.0, s2 = 0.0, s4 = 0.0, c2 = 0.0, c4 = 0.0, s1sq = 0.0;
  for (std::uint64_t i = 0; i < sites; ++i) {
    const OffspringLaw law =
        offspring_pmf(env, static_cast<std::int64_t>(i), 0);
    const double m1 = law_moment(law, 1);
    s1 += m1;
    s1sq += m1 * m1;
    s2 += law_moment(law, 2);
    s4 += law_moment(law, 4);
    c2 += (m1 - 1.0) * (m1 - 1.0);
    c4 += std::pow(m1 - 1.0, 4);
  }
  const double inv = 1.0 / static_cast<double>(sites);
  row.m1 = s1 * inv;
  row.m2_minus_1 = s2 * inv - 1.0;
  row.m4 = s4 * inv;
  row.sqrtN_var = sqrtN * c2 * inv;
  row.sqrtN_m4c = sqrtN * c4 * inv;
  const double var1 = s1sq * inv - row.m1 * row.m1;
  row.se = std::sqrt(std::max(var1, 0.0) * inv);
  row.mean_ok = std::abs(row.m1 - 1.0) <= 3.0 * row.se + 1e-12;
  row.beta2_ok = true;   // no closed-form target for a general table
  row.gamma_ok = true;
  return row;
}

}  // namespace sbmre

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbmre/measure.hpp"
#include "sbmre/parallel.hpp"
#include "sbmre/particle.hpp"
#include "sbmre/stats.hpp"

namespace sbmre {

// P(Y_n = x) for the simple random walk, log-space so large n is safe.
// Long-double internals keep the normalization error below 1e-12 even at
// n = 10^4, where the log terms are of size ~10^5.
inline double srw_pmf(std::int64_t n, std::int64_t x) {
  if (n < 0) throw std::invalid_argument("srw_pmf requires n >= 0");
  if (std::abs(x) > n || ((n + x) & 1)) return 0.0;
  const std::int64_t k = (n + x) / 2;
  const long double log_p = std::lgamma(static_cast<long double>(n) + 1.0L) -
                            std::lgamma(static_cast<long double>(k) + 1.0L) -
                            std::lgamma(static_cast<long double>(n - k) + 1.0L) -
                            static_cast<long double>(n) * std::log(2.0L);
  return static_cast<double>(std::exp(log_p));
}

// E[X_n(phi)] for unit initial mass at the origin: the walk marginal
// pushed through the diffusive scaling.
inline double mean_measure_exact(std::uint64_t N, std::int64_t n,
                                 const TestFunction& phi) {
  const double inv_sqrtN = 1.0 / std::sqrt(static_cast<double>(N));
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n) + 1);
  for (std::int64_t x = -n; x <= n; x += 2)
    terms.push_back(srw_pmf(n, x) * phi(static_cast<double>(x) * inv_sqrtN));
  if (n == 0) return phi(0.0);
  return pairwise_sum(terms);
}

// E[(1+lambda)^{#collisions in 1..n}] for two independent SRWs, via the
// difference walk D = Y1 - Y2 (increments 0 w.p. 1/2, +-2 w.p. 1/4).
// State indexed by j with d = 2(j - n). O(n^2).
inline double collision_functional_pair(std::int64_t n, double lambda) {
  if (n < 0) throw std::invalid_argument("n >= 0 required");
  if (lambda < -1.0) throw std::invalid_argument("lambda >= -1 required");
  const std::size_t size = static_cast<std::size_t>(2 * n + 1);
  std::vector<double> cur(size, 0.0), next(size, 0.0);
  cur[static_cast<std::size_t>(n)] = 1.0;
  for (std::int64_t i = 1; i <= n; ++i) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t j = 0; j < size; ++j) {
      const double w = cur[j];
      if (w == 0.0) continue;
      next[j] += 0.5 * w;
      if (j > 0) next[j - 1] += 0.25 * w;
      if (j + 1 < size) next[j + 1] += 0.25 * w;
    }
    // weight (1+lambda) on the diagonal event D_i = 0
    next[static_cast<std::size_t>(n)] *= 1.0 + lambda;
    cur.swap(next);
  }
  return pairwise_sum(cur);
}

// Endpoint-constrained version: total weight over joint paths with
// Y1_n = x, Y2_n = y. Full joint DP over (y1, y2). O(n^3) states x steps.
inline double collision_functional_pair_endpoint(std::int64_t n, double lambda,
                                                 std::int64_t x,
                                                 std::int64_t y) {
  if (n < 0) throw std::invalid_argument("n >= 0 required");
  if (std::abs(x) > n || std::abs(y) > n) return 0.0;
  if (((n + x) & 1) || ((n + y) & 1)) return 0.0;
  const std::size_t size = static_cast<std::size_t>(2 * n + 1);
  const auto idx = [n](std::int64_t a) {
    return static_cast<std::size_t>(a + n);
  };
  std::vector<double> cur(size * size, 0.0), next(size * size, 0.0);
  cur[idx(0) * size + idx(0)] = 1.0;
  for (std::int64_t i = 1; i <= n; ++i) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::int64_t a = -i + 1; a <= i - 1; ++a) {
      for (std::int64_t b = -i + 1; b <= i - 1; ++b) {
        const double w = cur[idx(a) * size + idx(b)];
        if (w == 0.0) continue;
        for (int da : {-1, 1}) {
          for (int db : {-1, 1}) {
            const std::int64_t na = a + da, nb = b + db;
            double m = 0.25 * w;
            if (na == nb) m *= 1.0 + lambda;
            next[idx(na) * size + idx(nb)] += m;
          }
        }
      }
    }
    cur.swap(next);
  }
  return cur[idx(x) * size + idx(y)];
}

struct OracleReport {
  std::string query;
  double exact = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  double z = 0.0;
  bool flagged = false;  // |z| > 4
};

// Exact value of E[B1_n B2_n] for two initial particles at the origin.
// Each particle's conditional mean descendant count is the product of
// m^{(1)}(xi) over the sites it branches FROM, i.e. (k, Y_k) for
// k = 0..n-1. Averaging the product for two independent walks over the
// shared environment turns every joint visit into a factor 1+lambda, so
//   E[B1 B2] = E[(1+lambda)^{#{0 <= k <= n-1 : Y1_k = Y2_k}}]
//            = (1+lambda) * collision_functional_pair(n-1, lambda),
// the leading factor coming from the guaranteed time-0 collision. Note
// the index set: branching times, not the arrival times 1..n.
inline double pair_moment_exact(std::int64_t n, double lambda) {
  if (n == 0) return 1.0;
  return (1.0 + lambda) * collision_functional_pair(n - 1, lambda);
}

// MC check of the pair-moment identity above: two tagged initial
// particles at the origin, fresh environment per replica, product of
// tagged masses at n.
inline OracleReport pair_moment_mc_check(double beta, std::uint64_t N,
                                         std::int64_t n,
                                         std::uint64_t replicas,
                                         std::uint64_t seed,
                                         unsigned workers = 1) {
  RunConfig cfg;
  cfg.env = EnvSpec::example(N, beta, seed);
  cfg.initial = {{0, 2}};
  cfg.horizon_steps = n;
  cfg.replicas = replicas;
  cfg.seed = splitmix_finalize(seed + 1);
  cfg.mode = EnvMode::annealed;

  std::vector<double> products(replicas);
  parallel_replicas(replicas, workers, [&](std::size_t r) {
    const ParticleField final = simulate_replica(
        cfg, r, [](const ParticleField&, const StepRecord&,
                   const ParticleField&) {}, /*tagged=*/true);
    double masses[2] = {0.0, 0.0};
    for (std::size_t t = 0; t < 2 && t < final.tags->size(); ++t)
      for (const auto& [x, c] : (*final.tags)[t])
        masses[t] += static_cast<double>(c);
    products[r] = masses[0] * masses[1];
  });

  OracleReport rep;
  rep.query = "pair_moment(beta=" + std::to_string(beta) +
              ",N=" + std::to_string(N) + ",n=" + std::to_string(n) + ")";
  const double lambda = beta * beta / std::sqrt(static_cast<double>(N));
  rep.exact = pair_moment_exact(n, lambda);
  const MeanSe ms = mean_se(products);
  rep.mc_mean = ms.mean;
  rep.mc_se = ms.se;
  rep.z = ms.se > 0.0 ? (ms.mean - rep.exact) / ms.se : 0.0;
  rep.flagged = std::abs(rep.z) > 4.0;
  return rep;
}

// MC estimate of E[w^{#{1<=i<=n : some pair of the p walks coincides at i}}]
// for p independent SRWs.
inline MeanSe multiwalk_collision_mc(int p, std::int64_t n, double w,
                                     std::uint64_t replicas,
                                     std::uint64_t seed,
                                     unsigned workers = 1) {
  if (p < 2 || p > 6) throw std::invalid_argument("p in [2,6] required");
  std::vector<double> vals(replicas);
  parallel_replicas(replicas, workers, [&](std::size_t r) {
    SplitMix64 rng(derive_stream_seed(seed, stream_tag::movement, r));
    std::vector<std::int64_t> pos(static_cast<std::size_t>(p), 0);
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint64_t bits = rng();
      for (auto& y : pos) {
        y += (bits & 1ull) ? 1 : -1;
        bits >>= 1;
      }
      bool collide = false;
      for (int a = 0; a < p && !collide; ++a)
        for (int b = a + 1; b < p; ++b)
          if (pos[static_cast<std::size_t>(a)] ==
              pos[static_cast<std::size_t>(b)]) {
            collide = true;
            break;
          }
      if (collide) ++hits;
    }
    vals[r] = std::pow(w, static_cast<double>(hits));
  });
  return mean_se(vals);
}

// Exhaustive enumeration oracle for the same functional; 2^(p*n) joint
// paths, so only for tiny (p, n).
inline double multiwalk_collision_exact(int p, std::int64_t n, double w) {
  const int bits = p * static_cast<int>(n);
  if (bits > 24) throw std::invalid_argument("enumeration too large");
  const std::uint64_t total = 1ull << bits;
  double sum = 0.0;
  std::vector<std::int64_t> pos(static_cast<std::size_t>(p));
  for (std::uint64_t path = 0; path < total; ++path) {
    std::fill(pos.begin(), pos.end(), 0);
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      for (int a = 0; a < p; ++a) {
        const int bit_index = static_cast<int>(i) * p + a;
        pos[static_cast<std::size_t>(a)] +=
            (path >> bit_index) & 1ull ? 1 : -1;
      }
      bool collide = false;
      for (int a = 0; a < p && !collide; ++a)
        for (int b = a + 1; b < p; ++b)
          if (pos[static_cast<std::size_t>(a)] ==
              pos[static_cast<std::size_t>(b)]) {
            collide = true;
            break;
          }
      if (collide) ++hits;
    }
    sum += std::pow(w, static_cast<double>(hits));
  }
  return sum / static_cast<double>(total);
}

}  // namespace sbmre

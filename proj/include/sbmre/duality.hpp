#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sbmre/measure.hpp"
#include "sbmre/parallel.hpp"
#include "sbmre/particle.hpp"
#include "sbmre/spde.hpp"
#include "sbmre/stats.hpp"

namespace sbmre {

// Initial measure X_0 for duality runs: either point atoms (mass at
// positions, the particle construction regime) or a density sampled on
// the grid (the uniqueness regime).
struct AtomMeasure {
  std::vector<std::pair<double, double>> atoms;  // (position, mass)
};

struct DensityMeasure {
  TestFunction density;
};

using InitialMeasure = std::variant<AtomMeasure, DensityMeasure>;

struct DualityReport {
  std::string phi_id;
  double lhs_mean = 0.0, lhs_se = 0.0;
  double rhs_mean = 0.0, rhs_se = 0.0;
  double z = 0.0;
  double discretization_budget = 0.02;
  bool pass = false;
  std::uint64_t lhs_replicas = 0, rhs_replicas = 0;
  double runtime_seconds = 0.0;
};

inline DualityReport make_duality_report(const std::string& phi_id,
                                         MeanSe lhs, MeanSe rhs,
                                         double budget) {
  DualityReport rep;
  rep.phi_id = phi_id;
  rep.lhs_mean = lhs.mean;
  rep.lhs_se = lhs.se;
  rep.rhs_mean = rhs.mean;
  rep.rhs_se = rhs.se;
  rep.lhs_replicas = lhs.n;
  rep.rhs_replicas = rhs.n;
  const double se = std::sqrt(lhs.se * lhs.se + rhs.se * rhs.se);
  rep.z = se > 0.0 ? (lhs.mean - rhs.mean) / se : 0.0;
  rep.discretization_budget = budget;
  rep.pass = std::abs(lhs.mean - rhs.mean) <= 3.0 * se + budget;
  return rep;
}

// Forward side from the particle system: per replica exp(-X_n(phi)),
// atoms evaluated directly (no binning).
inline MeanSe forward_laplace_particle(const RunConfig& cfg,
                                       const TestFunction& phi,
                                       unsigned workers = 1) {
  std::vector<double> vals(cfg.replicas);
  parallel_replicas(cfg.replicas, workers, [&](std::size_t r) {
    const ParticleField final = simulate_replica(
        cfg, r,
        [](const ParticleField&, const StepRecord&, const ParticleField&) {});
    vals[r] = std::exp(-measure_apply(final, cfg.env.scale_N, phi));
  });
  return mean_se(vals);
}

// Forward side from the SPDE solver: per replica exp(-<u_t, phi>).
inline MeanSe forward_laplace_spde(const SpdeGrid& proto,
                                   const SpdeParams& params,
                                   const TestFunction& initial_density,
                                   const TestFunction& phi,
                                   std::uint64_t replicas,
                                   unsigned workers = 1) {
  std::vector<double> vals(replicas);
  const std::size_t steps =
      static_cast<std::size_t>(std::llround(params.t_end / proto.tau));
  parallel_replicas(replicas, workers, [&](std::size_t r) {
    SpdeGrid grid = proto;
    grid.sample(initial_density);
    SplitMix64 rng(
        derive_stream_seed(params.noise_seed, stream_tag::noise, r));
    for (std::size_t s = 0; s < steps; ++s)
      em_step_forward(grid, params, rng);
    vals[r] = std::exp(-grid_pair(grid, phi));
  });
  return mean_se(vals);
}

inline double pair_with_initial(const InitialMeasure& x0,
                                const SpdeGrid& y_t) {
  if (const auto* atoms = std::get_if<AtomMeasure>(&x0)) {
    double s = 0.0;
    for (const auto& [pos, mass] : atoms->atoms)
      s += mass * y_t.interpolate(pos);
    return s;
  }
  const auto& dens = std::get<DensityMeasure>(x0).density;
  std::vector<double> terms(y_t.cells());
  for (std::size_t i = 0; i < y_t.cells(); ++i)
    terms[i] = dens(y_t.x_center(i)) * y_t.values[i];
  return y_t.h * pairwise_sum(terms);
}

// Dual side: run Y from Y_0 = phi under the dual SPDE, evaluate
// exp(-<X_0, Y_t>) per replica. At beta = 0 this is a zero-variance
// estimator (deterministic dual).
inline MeanSe dual_laplace(const InitialMeasure& x0, const TestFunction& phi,
                           const SpdeGrid& proto, const SpdeParams& params,
                           std::uint64_t replicas, unsigned workers = 1) {
  if (params.dual_coeff() == 0.0) {
    const SpdeGrid v =
        deterministic_log_laplace(phi, params.gamma, params.t_end, proto);
    MeanSe out;
    out.mean = std::exp(-pair_with_initial(x0, v));
    out.se = 0.0;
    out.n = 1;
    return out;
  }
  std::vector<double> vals(replicas);
  const std::size_t steps =
      static_cast<std::size_t>(std::llround(params.t_end / proto.tau));
  parallel_replicas(replicas, workers, [&](std::size_t r) {
    SpdeGrid grid = proto;
    grid.sample(phi);
    SplitMix64 rng(
        derive_stream_seed(params.noise_seed ^ 0xD1B54A32D192ED03ull,
                           stream_tag::noise, r));
    for (std::size_t s = 0; s < steps; ++s) em_step_dual(grid, params, rng);
    vals[r] = std::exp(-pair_with_initial(x0, grid));
  });
  return mean_se(vals);
}

}  // namespace sbmre

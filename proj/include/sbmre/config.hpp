#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbmre/duality.hpp"
#include "sbmre/particle.hpp"
#include "sbmre/spde.hpp"

namespace sbmre {

struct SpdeConfig {
  double x_min = -10.0, x_max = 10.0;
  double h = 0.05;
  double tau = -1.0;  // <0: pick the default for the run kind
  Boundary boundary = Boundary::neumann;
  SpdeParams params;

  // Deterministic runs use the stability limit h^2/2; stochastic runs
  // default to h^2/8, where the clip-to-zero bias was measured to sit
  // inside the documented discretization budget.
  double effective_tau(bool stochastic) const {
    if (tau > 0.0) return tau;
    return stochastic ? h * h / 8.0 : h * h / 2.0;
  }

  SpdeGrid make_grid(bool stochastic) const {
    return SpdeGrid(x_min, x_max, h, effective_tau(stochastic), boundary);
  }
};

struct DualityConfig {
  double t = 0.5;
  std::string phi_kind = "gaussian";  // gaussian | constant | linear_cutoff
  double phi_scale = 1.0;
  std::string source = "particle";  // particle | spde
  std::string initial = "delta";    // delta | gaussian_density
  std::uint64_t replicas_lhs = 10000, replicas_rhs = 10000;
  double budget = 0.02;
};

struct ExperimentConfig {
  RunConfig run;
  std::optional<SpdeConfig> spde;
  std::optional<DualityConfig> duality;
  unsigned workers = 1;
  std::string out_dir = ".";
  bool parity_checks = true;
};

struct ConfigError {
  std::string key;
  std::string message;
};

namespace detail_cfg {

using nlohmann::json;

template <typename T>
bool fetch(const json& j, const std::string& key, T& out,
           std::vector<ConfigError>& errors, bool required) {
  if (!j.contains(key)) {
    if (required) errors.push_back({key, "missing required key"});
    return false;
  }
  try {
    out = j.at(key).get<T>();
    return true;
  } catch (const json::exception& e) {
    errors.push_back({key, e.what()});
    return false;
  }
}

}  // namespace detail_cfg

// Full structural validation; errors are aggregated, never a partial
// acceptance. Seeds are required explicitly (no wall-clock defaults).
inline ExperimentConfig parse_config(const nlohmann::json& j,
                                     std::vector<ConfigError>& errors) {
  using detail_cfg::fetch;
  ExperimentConfig cfg;

  if (!j.contains("env")) {
    errors.push_back({"env", "missing required block"});
  } else {
    const auto& e = j.at("env");
    std::uint64_t N = 0, seed = 0;
    double beta = 0.0;
    std::string law = "example";
    fetch(e, "N", N, errors, true);
    fetch(e, "beta", beta, errors, true);
    fetch(e, "seed", seed, errors, true);
    fetch(e, "law", law, errors, false);
    if (law != "example")
      errors.push_back({"env.law", "only \"example\" is configurable"});
    if (N > 0 && beta >= 0.0) {
      const double n4 = std::pow(static_cast<double>(N), 0.25);
      if (beta > n4) {
        errors.push_back(
            {"env.beta", "beta > N^{1/4} = " + std::to_string(n4) +
                             ": offspring probabilities leave [0,1]"});
      } else {
        cfg.run.env = EnvSpec::example(N, beta, seed);
      }
    } else if (N == 0) {
      errors.push_back({"env.N", "must be positive"});
    }
    if (beta < 0.0) errors.push_back({"env.beta", "must be nonnegative"});
  }

  if (!j.contains("run")) {
    errors.push_back({"run", "missing required block"});
  } else {
    const auto& r = j.at("run");
    fetch(r, "replicas", cfg.run.replicas, errors, true);
    std::int64_t horizon = 0;
    if (fetch(r, "horizon", horizon, errors, true)) {
      if (horizon < 0)
        errors.push_back({"run.horizon", "must be >= 0"});
      else
        cfg.run.horizon_steps = horizon;
    }
    fetch(r, "seed", cfg.run.seed, errors, true);
    if (cfg.run.replicas == 0)
      errors.push_back({"run.replicas", "must be >= 1"});
    std::string mode = "annealed";
    fetch(r, "mode", mode, errors, false);
    if (mode == "annealed")
      cfg.run.mode = EnvMode::annealed;
    else if (mode == "quenched")
      cfg.run.mode = EnvMode::quenched;
    else
      errors.push_back({"run.mode", "expected annealed or quenched"});
    if (r.contains("initial")) {
      try {
        bool all_even = true;
        for (const auto& pair : r.at("initial")) {
          const std::int64_t site = pair.at(0).get<std::int64_t>();
          const std::uint64_t count = pair.at(1).get<std::uint64_t>();
          cfg.run.initial.emplace_back(site, count);
          if (site % 2 != 0) all_even = false;
        }
        // odd initial sites are legal but break the parity invariant
        cfg.parity_checks = all_even;
      } catch (const nlohmann::json::exception& e) {
        errors.push_back({"run.initial", e.what()});
      }
    } else {
      cfg.run.initial = {{0, cfg.run.env.scale_N}};
    }
    if (r.contains("record")) {
      const auto& rec = r.at("record");
      fetch(rec, "snapshots", cfg.run.record.snapshots, errors, false);
      fetch(rec, "step_records", cfg.run.record.step_records, errors, false);
      fetch(rec, "ledger", cfg.run.record.ledger, errors, false);
    }
  }

  if (j.contains("spde")) {
    SpdeConfig sc;
    const auto& s = j.at("spde");
    fetch(s, "x_min", sc.x_min, errors, false);
    fetch(s, "x_max", sc.x_max, errors, false);
    fetch(s, "h", sc.h, errors, true);
    if (s.contains("tau")) fetch(s, "tau", sc.tau, errors, false);
    fetch(s, "gamma", sc.params.gamma, errors, true);
    fetch(s, "beta", sc.params.beta, errors, true);
    fetch(s, "t_end", sc.params.t_end, errors, true);
    fetch(s, "noise_seed", sc.params.noise_seed, errors, true);
    std::string bc = "neumann";
    fetch(s, "boundary", bc, errors, false);
    if (bc == "neumann")
      sc.boundary = Boundary::neumann;
    else if (bc == "dirichlet0")
      sc.boundary = Boundary::dirichlet0;
    else
      errors.push_back({"spde.boundary", "expected neumann or dirichlet0"});
    if (s.contains("dual_noise_coeff"))
      fetch(s, "dual_noise_coeff", sc.params.dual_noise_coeff, errors, false);
    if (sc.h <= 0.0) errors.push_back({"spde.h", "must be > 0"});
    if (sc.tau > 0.0 && sc.tau > sc.h * sc.h / 2.0 + 1e-15)
      errors.push_back(
          {"spde.tau", "violates stability: tau <= h^2/2 required"});
    if (sc.x_max <= sc.x_min)
      errors.push_back({"spde.x_max", "must exceed x_min"});
    cfg.spde = sc;
  }

  if (j.contains("duality")) {
    DualityConfig dc;
    const auto& d = j.at("duality");
    fetch(d, "t", dc.t, errors, true);
    fetch(d, "phi", dc.phi_kind, errors, false);
    fetch(d, "phi_scale", dc.phi_scale, errors, false);
    fetch(d, "source", dc.source, errors, false);
    fetch(d, "initial", dc.initial, errors, false);
    fetch(d, "replicas_lhs", dc.replicas_lhs, errors, false);
    fetch(d, "replicas_rhs", dc.replicas_rhs, errors, false);
    fetch(d, "budget", dc.budget, errors, false);
    if (dc.source != "particle" && dc.source != "spde")
      errors.push_back({"duality.source", "expected particle or spde"});
    if (dc.initial != "delta" && dc.initial != "gaussian_density")
      errors.push_back(
          {"duality.initial", "expected delta or gaussian_density"});
    if (dc.phi_kind != "gaussian" && dc.phi_kind != "constant" &&
        dc.phi_kind != "linear_cutoff" && dc.phi_kind != "zero")
      errors.push_back({"duality.phi",
                        "expected gaussian, constant, linear_cutoff or zero"});
    if (dc.t < 0.0) errors.push_back({"duality.t", "must be >= 0"});
    cfg.duality = dc;
  }

  if (j.contains("parallelism")) {
    fetch(j, "parallelism", cfg.workers, errors, false);
    if (cfg.workers == 0)
      errors.push_back({"parallelism", "must be >= 1"});
  }

  return cfg;
}

}  // namespace sbmre

// sbmre: experiment orchestrator for the branching-walk / SPDE laboratory.
//
//   sbmre <subcommand> --config <path> [--out-dir <path>] [--workers k]
//         [--override key=value]...
//
// Subcommands: simulate, moments, duality, spde, audit-env, identity-check.
// Exit codes: 0 all checks pass, 1 runtime/check failure, 2 config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbmre/config.hpp"
#include "sbmre/duality.hpp"
#include "sbmre/env.hpp"
#include "sbmre/measure.hpp"
#include "sbmre/spde.hpp"
#include "sbmre/walk_oracle.hpp"

using nlohmann::json;
using namespace sbmre;

namespace {

struct CliState {
  std::string config_path;
  std::string out_dir = ".";
  int workers = 0;  // 0: fall back to SBMRE_WORKERS, then config, then 1
  std::vector<std::string> overrides;
};

// Applies "a.b.c=value" into the config JSON; value parsed as JSON when
// possible, else taken as a string.
void apply_override(json& j, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be key=value: " + kv);
  const std::string path = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i)
    node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
}

unsigned resolve_workers(const CliState& cli, const ExperimentConfig& cfg) {
  if (cli.workers > 0) return static_cast<unsigned>(cli.workers);
  if (const char* env = std::getenv("SBMRE_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return cfg.workers > 0 ? cfg.workers : 1;
}

std::ofstream open_out(const CliState& cli, const std::string& name) {
  std::filesystem::create_directories(cli.out_dir);
  std::ofstream f(std::filesystem::path(cli.out_dir) / name);
  if (!f) throw std::runtime_error("cannot open output file " + name);
  return f;
}

TestFunction make_phi(const DualityConfig& dc) {
  if (dc.phi_kind == "zero") return tf::constant(0.0);
  if (dc.phi_kind == "constant") return tf::constant(dc.phi_scale);
  if (dc.phi_kind == "linear_cutoff") return tf::linear_cutoff();
  return tf::gaussian_bump(0.0, 1.0, dc.phi_scale);
}

int report_config_errors(const std::vector<ConfigError>& errors) {
  for (const auto& e : errors)
    std::cerr << "config error at \"" << e.key << "\": " << e.message << "\n";
  return 2;
}

// ---- subcommands ---------------------------------------------------------

int cmd_audit_env(const json& raw, const CliState& cli) {
  std::vector<double> betas = {1.0};
  std::vector<std::uint64_t> Ns = {16, 64, 256, 1024};
  if (raw.contains("audit")) {
    const auto& a = raw.at("audit");
    if (a.contains("betas")) betas = a.at("betas").get<std::vector<double>>();
    if (a.contains("Ns")) Ns = a.at("Ns").get<std::vector<std::uint64_t>>();
  } else if (raw.contains("env") && raw.at("env").contains("beta")) {
    betas = {raw.at("env").at("beta").get<double>()};
  }
  const AuditReport rep = audit_assumption_a(betas, Ns);
  json out = json::array();
  std::cout << "beta        N     m1        E[m2-1]   m4        "
               "sqrtN*Var  sqrtN*m4c\n";
  for (const auto& r : rep.rows) {
    std::printf("%-8.4f %6llu  %-9.6f %-9.6f %-9.6f %-10.6f %-9.6f\n", r.beta,
                static_cast<unsigned long long>(r.N), r.m1, r.m2_minus_1,
                r.m4, r.sqrtN_var, r.sqrtN_m4c);
    out.push_back({{"beta", r.beta},
                   {"N", r.N},
                   {"m1", r.m1},
                   {"m2_minus_1", r.m2_minus_1},
                   {"m4", r.m4},
                   {"sqrtN_var", r.sqrtN_var},
                   {"sqrtN_m4c", r.sqrtN_m4c},
                   {"ok", r.mean_ok && r.beta2_ok && r.gamma_ok}});
  }
  open_out(cli, "audit.json") << out.dump(2) << "\n";
  const bool ok = rep.all_ok();
  std::cout << (ok ? "PASS" : "FAIL")
            << " audit-env: closed-form moment conditions\n";
  return ok ? 0 : 1;
}

int cmd_simulate(const ExperimentConfig& cfg, const CliState& cli,
                 unsigned workers) {
  const std::uint64_t R = cfg.run.replicas;
  std::vector<double> final_mass(R);
  std::vector<std::string> snapshot_rows(R), record_rows(R);
  const double mass0 = [&] {
    double m = 0.0;
    for (const auto& [s, c] : cfg.run.initial) m += static_cast<double>(c);
    return m;
  }();

  parallel_replicas(R, workers, [&](std::size_t r) {
    std::ostringstream snap, recs;
    const bool want_snap = cfg.run.record.snapshots;
    const bool want_recs = cfg.run.record.step_records;
    const ParticleField initial = init_field(cfg.run.initial);
    if (want_snap)
      for (const auto& [x, c] : initial.counts)
        snap << r << ",0," << x << "," << c << "\n";
    const ParticleField final = simulate_replica(
        cfg.run, r,
        [&](const ParticleField&, const StepRecord& rec,
            const ParticleField& after) {
          if (want_snap)
            for (const auto& [x, c] : after.counts)
              snap << r << "," << after.step_n << "," << x << "," << c << "\n";
          if (want_recs)
            for (const auto& s : rec.sites)
              recs << r << "," << rec.step_n << "," << s.site << "," << s.xi
                   << "," << s.parents_left << "," << s.parents_right << ","
                   << s.children_left << "," << s.children_right << "\n";
        });
    final_mass[r] = static_cast<double>(final.total_mass());
    snapshot_rows[r] = snap.str();
    record_rows[r] = recs.str();
  });

  if (cfg.run.record.snapshots) {
    auto f = open_out(cli, "snapshots.csv");
    f << "replica,step,site,count\n";
    for (const auto& rows : snapshot_rows) f << rows;
  }
  if (cfg.run.record.step_records) {
    auto f = open_out(cli, "step_records.csv");
    f << "replica,step,site,xi,pl,pr,cl,cr\n";
    for (const auto& rows : record_rows) f << rows;
  }

  // mass-martingale check: E[B_n / B_0] = 1
  std::vector<double> ratio(R);
  for (std::uint64_t r = 0; r < R; ++r) ratio[r] = final_mass[r] / mass0;
  const MeanSe ms = mean_se(ratio);
  const double z = ms.se > 0.0 ? (ms.mean - 1.0) / ms.se : 0.0;
  const bool ok = std::abs(z) <= 3.0 || ms.se == 0.0;
  std::printf("%s simulate: mass martingale mean %.6f +- %.6f (z=%.2f)\n",
              ok ? "PASS" : "FAIL", ms.mean, ms.se, z);
  return ok ? 0 : 1;
}

int cmd_identity_check(const ExperimentConfig& cfg, const CliState& cli,
                       unsigned workers) {
  const std::uint64_t N = cfg.run.env.scale_N;
  const double beta = cfg.run.env.beta;
  const std::vector<TestFunction> phis = {
      tf::constant(1.0), tf::gaussian_bump(0.0, 1.0), tf::linear_cutoff()};
  const std::uint64_t R = cfg.run.replicas;
  std::vector<double> worst(R, 0.0);
  std::vector<std::string> ledger_rows(R);
  parallel_replicas(R, workers, [&](std::size_t r) {
    std::vector<MartingaleLedger> ledgers;
    for (const auto& phi : phis) ledgers.emplace_back(phi, N, beta);
    std::ostringstream rows;
    simulate_replica(cfg.run, r,
                     [&](const ParticleField& before, const StepRecord& rec,
                         const ParticleField& after) {
                       for (auto& led : ledgers) {
                         led.advance(before, rec, after);
                         worst[r] = std::max(worst[r], led.residual());
                       }
                       if (cfg.run.record.ledger) {
                         const auto& led = ledgers[1];
                         rows << r << "," << after.step_n << "," << led.Mb()
                              << "," << led.Me() << "," << led.Ms() << ","
                              << led.C() << "," << led.bracket_b() << ","
                              << led.bracket_e() << "," << led.x_phi() << "\n";
                       }
                     });
    ledger_rows[r] = rows.str();
  });
  if (cfg.run.record.ledger) {
    auto f = open_out(cli, "ledger.csv");
    f << "replica,step,Mb,Me,Ms,C,bracket_b,bracket_e,X_phi\n";
    for (const auto& rows : ledger_rows) f << rows;
  }
  double max_res = 0.0;
  for (double w : worst) max_res = std::max(max_res, w);
  const bool ok = max_res <= 1e-9;
  std::printf("%s identity-check: max decomposition residual %.3e\n",
              ok ? "PASS" : "FAIL", max_res);
  return ok ? 0 : 1;
}

int cmd_moments(const ExperimentConfig& cfg, const CliState& cli,
                unsigned workers) {
  const OracleReport rep = pair_moment_mc_check(
      cfg.run.env.beta, cfg.run.env.scale_N, cfg.run.horizon_steps,
      cfg.run.replicas, cfg.run.env.seed, workers);
  json out = {{"query", rep.query},   {"exact", rep.exact},
              {"mc_mean", rep.mc_mean}, {"mc_se", rep.mc_se},
              {"z", rep.z},           {"flagged", rep.flagged}};
  open_out(cli, "moments.json") << out.dump(2) << "\n";
  std::printf("%s moments: %s exact %.6f mc %.6f +- %.6f (z=%.2f)\n",
              rep.flagged ? "FAIL" : "PASS", rep.query.c_str(), rep.exact,
              rep.mc_mean, rep.mc_se, rep.z);
  return rep.flagged ? 1 : 0;
}

int cmd_spde(const ExperimentConfig& cfg, const CliState& cli,
             unsigned workers) {
  if (!cfg.spde) {
    std::cerr << "config error at \"spde\": block required for spde\n";
    return 2;
  }
  const SpdeConfig& sc = *cfg.spde;
  const bool stochastic = sc.params.gamma > 0.0 || sc.params.beta > 0.0;
  const SpdeGrid proto = sc.make_grid(stochastic);
  const std::size_t steps = static_cast<std::size_t>(
      std::llround(sc.params.t_end / proto.tau));
  const TestFunction u0 = tf::gaussian_bump(0.0, 1.0);
  const std::uint64_t R = cfg.run.replicas;
  std::vector<double> masses(R);
  std::vector<std::string> rows(R);
  parallel_replicas(R, workers, [&](std::size_t r) {
    SpdeGrid grid = proto;
    grid.sample(u0);
    SplitMix64 rng(
        derive_stream_seed(sc.params.noise_seed, stream_tag::noise, r));
    for (std::size_t s = 0; s < steps; ++s)
      em_step_forward(grid, sc.params, rng);
    masses[r] = grid_mass(grid);
    std::ostringstream os;
    for (std::size_t i = 0; i < grid.cells(); ++i)
      os << r << "," << sc.params.t_end << "," << grid.x_center(i) << ","
         << grid.values[i] << "\n";
    rows[r] = os.str();
  });
  {
    auto f = open_out(cli, "spde_final.csv");
    f << "replica,t,x,u\n";
    for (const auto& s : rows) f << s;
  }
  const MeanSe ms = mean_se(masses);
  std::printf("PASS spde: %llu replicas, %zu steps, final mass %.6f +- %.6f\n",
              static_cast<unsigned long long>(R), steps, ms.mean, ms.se);
  return 0;
}

int cmd_duality(const ExperimentConfig& cfg, const CliState& cli,
                unsigned workers) {
  if (!cfg.duality) {
    std::cerr << "config error at \"duality\": block required for duality\n";
    return 2;
  }
  const DualityConfig& dc = *cfg.duality;
  const TestFunction phi = make_phi(dc);
  SpdeConfig sc;
  if (cfg.spde) sc = *cfg.spde;

  MeanSe lhs, rhs;
  if (dc.source == "particle") {
    RunConfig run = cfg.run;
    run.replicas = dc.replicas_lhs;
    run.horizon_steps = static_cast<std::int64_t>(
        std::llround(dc.t * static_cast<double>(run.env.scale_N)));
    lhs = forward_laplace_particle(run, phi, workers);
    InitialMeasure x0 = AtomMeasure{{{0.0, 1.0}}};
    SpdeParams params = sc.params;
    params.gamma = 1.0;
    params.beta = run.env.beta;
    params.t_end = dc.t;
    rhs = dual_laplace(x0, phi, sc.make_grid(params.dual_coeff() > 0.0),
                       params, dc.replicas_rhs, workers);
  } else {
    SpdeParams params = sc.params;
    params.t_end = dc.t;
    const TestFunction density = tf::gaussian_bump(0.0, 1.0);
    const SpdeGrid proto = sc.make_grid(true);
    lhs = forward_laplace_spde(proto, params, density, phi, dc.replicas_lhs,
                               workers);
    InitialMeasure x0 =
        dc.initial == "delta"
            ? InitialMeasure(AtomMeasure{{{0.0, 1.0}}})
            : InitialMeasure(DensityMeasure{density});
    rhs = dual_laplace(x0, phi, proto, params, dc.replicas_rhs, workers);
  }
  const DualityReport rep =
      make_duality_report(phi.name, lhs, rhs, dc.budget);
  json out = {{"phi_id", rep.phi_id},
              {"lhs_mean", rep.lhs_mean},
              {"lhs_se", rep.lhs_se},
              {"rhs_mean", rep.rhs_mean},
              {"rhs_se", rep.rhs_se},
              {"z", rep.z},
              {"discretization_budget", rep.discretization_budget},
              {"verdict", rep.pass ? "pass" : "fail"},
              {"lhs_replicas", rep.lhs_replicas},
              {"rhs_replicas", rep.rhs_replicas}};
  open_out(cli, "duality.json") << out.dump(2) << "\n";
  std::printf("%s duality: lhs %.6f +- %.6f rhs %.6f +- %.6f (z=%.2f)\n",
              rep.pass ? "PASS" : "FAIL", rep.lhs_mean, rep.lhs_se,
              rep.rhs_mean, rep.rhs_se, rep.z);
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"branching-walk / SPDE simulation laboratory"};
  app.require_subcommand(1);
  CliState cli;

  const std::vector<std::string> names = {"simulate",  "moments",
                                          "duality",   "spde",
                                          "audit-env", "identity-check"};
  for (const auto& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", cli.config_path, "JSON config file")
        ->required();
    sub->add_option("--out-dir", cli.out_dir, "output directory");
    sub->add_option("--workers", cli.workers, "worker thread count");
    sub->add_option("--override", cli.overrides,
                    "config override key=value (repeatable)");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  json raw;
  try {
    std::ifstream f(cli.config_path);
    if (!f) {
      std::cerr << "config error: cannot open " << cli.config_path << "\n";
      return 2;
    }
    raw = json::parse(f);
    for (const auto& kv : cli.overrides) apply_override(raw, kv);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (sub == "audit-env") return cmd_audit_env(raw, cli);

    std::vector<ConfigError> errors;
    const ExperimentConfig cfg = parse_config(raw, errors);
    if (!errors.empty()) return report_config_errors(errors);
    const unsigned workers = resolve_workers(cli, cfg);

    if (sub == "simulate") return cmd_simulate(cfg, cli, workers);
    if (sub == "identity-check") return cmd_identity_check(cfg, cli, workers);
    if (sub == "moments") return cmd_moments(cfg, cli, workers);
    if (sub == "spde") return cmd_spde(cfg, cli, workers);
    if (sub == "duality") return cmd_duality(cfg, cli, workers);
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

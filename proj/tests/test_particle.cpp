#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sbmre/parallel.hpp"
#include "sbmre/particle.hpp"
#include "sbmre/stats.hpp"

using namespace sbmre;

TEST_CASE("init_field places the requested mass") {
  const ParticleField f = init_field({{0, 100}});
  CHECK(f.total_mass() == 100);
  CHECK(f.step_n == 0);
  CHECK(init_field({}).total_mass() == 0);
  const ParticleField g = init_field({{0, 3}, {2, 5}});
  CHECK(g.total_mass() == 8);
  CHECK(parity_ok(g));
}

TEST_CASE("the empty field is absorbing") {
  const EnvSpec env = EnvSpec::example(16, 1.0, 5);
  SplitMix64 rng(1);
  auto [next, rec] = step(init_field({}), env, rng);
  CHECK(next.total_mass() == 0);
  CHECK(rec.sites.empty());
}

TEST_CASE("step records are internally consistent") {
  const EnvSpec env = EnvSpec::example(16, 1.0, 5);
  SplitMix64 rng(77);
  ParticleField f = init_field({{0, 50}});
  for (int n = 0; n < 20; ++n) {
    auto [next, rec] = step(f, env, rng);
    std::uint64_t children = 0;
    for (const auto& s : rec.sites) {
      CHECK(s.parents_left + s.parents_right == f.counts.at(s.site));
      CHECK(s.children_left % 2 == 0);  // Example-law offspring are even
      CHECK(s.children_right % 2 == 0);
      CHECK(s.xi == sample_xi(env, f.step_n, s.site));
      children += s.children_left + s.children_right;
    }
    CHECK(next.total_mass() == children);
    f = std::move(next);
  }
}

TEST_CASE("parity invariant for even initial sites") {
  const EnvSpec env = EnvSpec::example(64, 1.0, 11);
  SplitMix64 rng(3);
  ParticleField f = init_field({{0, 64}, {-4, 10}});
  for (int n = 0; n < 33; ++n) {
    CHECK(parity_ok(f));
    auto [next, rec] = step(f, env, rng);
    f = std::move(next);
  }
}

TEST_CASE("single-particle mean offspring at beta = 0") {
  const EnvSpec env = EnvSpec::example(16, 0.0, 1);
  const std::uint64_t R = 100000;
  std::vector<double> mass(R);
  parallel_replicas(R, 4, [&](std::size_t r) {
    SplitMix64 rng(derive_stream_seed(5, stream_tag::movement, r));
    auto [next, rec] = step(init_field({{0, 1}}), env, rng);
    mass[r] = static_cast<double>(next.total_mass());
    // child count is 0 or 2
    CHECK((mass[r] == 0.0 || mass[r] == 2.0));
  });
  const MeanSe ms = mean_se(mass);
  CHECK(std::abs(ms.mean - 1.0) <= 3.0 * std::sqrt(1.0 / R));
}

TEST_CASE("conditioned site sign gives mean offspring 1.5") {
  // find a seed whose sign at (0,0) is +1
  std::uint64_t seed = 0;
  EnvSpec env = EnvSpec::example(16, 1.0, seed);
  while (sample_xi(env, 0, 0) != 1) env = EnvSpec::example(16, 1.0, ++seed);
  const std::uint64_t R = 100000;
  std::vector<double> mass(R);
  parallel_replicas(R, 4, [&](std::size_t r) {
    SplitMix64 rng(derive_stream_seed(9, stream_tag::movement, r));
    auto [next, rec] = step(init_field({{0, 1}}), env, rng);
    mass[r] = static_cast<double>(next.total_mass());
  });
  const MeanSe ms = mean_se(mass);
  CHECK(std::abs(ms.mean - 1.5) <= 3.0 * ms.se);
}

TEST_CASE("origin tags partition the counts at every step") {
  RunConfig cfg;
  cfg.env = EnvSpec::example(16, 1.0, 21);
  cfg.initial = {{0, 2}};
  cfg.horizon_steps = 12;
  cfg.seed = 4;
  simulate_replica(cfg, 0,
                   [](const ParticleField&, const StepRecord&,
                      const ParticleField& after) {
                     REQUIRE(after.tags.has_value());
                     SiteCounts total;
                     for (const auto& tag : *after.tags)
                       for (const auto& [x, c] : tag) total[x] += c;
                     for (auto& [x, c] : total)
                       CHECK(c == after.counts.at(x));
                     std::uint64_t tagged = 0, all = 0;
                     for (const auto& [x, c] : total) tagged += c;
                     for (const auto& [x, c] : after.counts) all += c;
                     CHECK(tagged == all);
                   },
                   /*tagged=*/true);
}

TEST_CASE("replicas are deterministic and mode-sensitive") {
  RunConfig cfg;
  cfg.env = EnvSpec::example(64, 1.0, 31);
  cfg.initial = {{0, 64}};
  cfg.horizon_steps = 30;
  cfg.seed = 17;
  auto final_counts = [&](std::uint64_t r) {
    return simulate_replica(cfg, r,
                            [](const ParticleField&, const StepRecord&,
                               const ParticleField&) {})
        .counts;
  };
  CHECK(final_counts(0) == final_counts(0));
  CHECK(final_counts(1) == final_counts(1));
  // annealed replicas see different environments
  const EnvSpec e0 = replica_env(cfg, 0), e1 = replica_env(cfg, 1);
  CHECK(e0.seed != e1.seed);
  cfg.mode = EnvMode::quenched;
  CHECK(replica_env(cfg, 0).seed == replica_env(cfg, 1).seed);
}

TEST_CASE("horizon zero returns the initial field") {
  RunConfig cfg;
  cfg.env = EnvSpec::example(16, 0.5, 3);
  cfg.initial = {{0, 16}};
  cfg.horizon_steps = 0;
  cfg.seed = 1;
  const ParticleField f = simulate_replica(
      cfg, 0,
      [](const ParticleField&, const StepRecord&, const ParticleField&) {
        FAIL("no steps expected");
      });
  CHECK(f.total_mass() == 16);
  CHECK(f.step_n == 0);
}

TEST_CASE("ensemble mass is a martingale") {
  RunConfig cfg;
  cfg.env = EnvSpec::example(100, 1.0, 41);
  cfg.initial = {{0, 100}};
  cfg.horizon_steps = 100;
  cfg.seed = 23;
  const std::uint64_t R = 10000;
  std::vector<double> ratio(R);
  parallel_replicas(R, 4, [&](std::size_t r) {
    const ParticleField f = simulate_replica(
        cfg, r,
        [](const ParticleField&, const StepRecord&, const ParticleField&) {});
    ratio[r] = static_cast<double>(f.total_mass()) / 100.0;
  });
  const MeanSe ms = mean_se(ratio);
  CHECK(std::abs(ms.mean - 1.0) <= 3.0 * ms.se);
}

TEST_CASE("custom table laws run through the per-parent path") {
  RunConfig cfg;
  cfg.env = EnvSpec::custom_table(16, OffspringLaw{{{0, 0.75}, {2, 0.25}}},
                                  OffspringLaw{{{0, 0.25}, {2, 0.75}}}, 55);
  cfg.initial = {{0, 20}};
  cfg.horizon_steps = 5;
  cfg.seed = 6;
  const ParticleField f = simulate_replica(
      cfg, 0,
      [](const ParticleField&, const StepRecord& rec, const ParticleField&) {
        CHECK(rec.law == LawKind::CustomTable);
      });
  CHECK(parity_ok(f));
}

// Distributional equivalence of the site-aggregated sampler against
// exhaustive per-particle enumeration on tiny instances: every particle's
// move and offspring choice is enumerated individually, together with all
// environment sign assignments, and the resulting exact law of the
// occupancy vector is compared with the empirical law in total variation.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sbmre/particle.hpp"

using namespace sbmre;

namespace {

using State = std::map<std::int64_t, std::uint64_t>;

std::string key_of(const State& s) {
  std::ostringstream os;
  for (const auto& [x, c] : s)
    if (c > 0) os << x << ":" << c << ";";
  return os.str();
}

// Law of (children_left, children_right) for B particles at one site with
// q(2) = p2, by brute force over all 4^B per-particle (direction, offspring)
// choices.
std::map<std::pair<std::uint64_t, std::uint64_t>, double> site_law_uncached(
    std::uint64_t B, double p2) {
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> law;
  const std::uint64_t total = 1ull << (2 * B);
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t cl = 0, cr = 0;
    double prob = 1.0;
    std::uint64_t c = code;
    for (std::uint64_t i = 0; i < B; ++i) {
      const bool left = c & 1ull;
      const bool two = c & 2ull;
      c >>= 2;
      prob *= 0.5 * (two ? p2 : 1.0 - p2);
      if (two) (left ? cl : cr) += 2;
    }
    law[{cl, cr}] += prob;
  }
  return law;
}

const std::map<std::pair<std::uint64_t, std::uint64_t>, double>& site_law(
    std::uint64_t B, double p2) {
  static std::map<std::pair<std::uint64_t, std::uint64_t>,
                  std::map<std::pair<std::uint64_t, std::uint64_t>, double>>
      cache;
  const auto key = std::make_pair(B, static_cast<std::uint64_t>(
                                         std::llround(p2 * 1e6)));
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, site_law_uncached(B, p2)).first;
  return it->second;
}

// Exact law of the occupancy vector after `horizon` steps, averaging over
// all environment signs (each site sign fair and independent).
std::map<std::string, double> exact_law(const State& initial,
                                        std::int64_t horizon, double beta,
                                        std::uint64_t N) {
  const double shift =
      beta / (2.0 * std::pow(static_cast<double>(N), 0.25));
  std::map<std::string, double> dist;
  std::map<std::string, State> decode;
  dist[key_of(initial)] = 1.0;
  decode[key_of(initial)] = initial;
  for (std::int64_t n = 0; n < horizon; ++n) {
    std::map<std::string, double> next;
    std::map<std::string, State> next_decode;
    for (const auto& [key, prob] : dist) {
      const State& s = decode[key];
      std::vector<std::pair<std::int64_t, std::uint64_t>> sites(
          s.begin(), s.end());
      // partial outcomes: (next-state, probability) built site by site
      std::vector<std::pair<State, double>> partial = {{State{}, prob}};
      for (const auto& [x, B] : sites) {
        std::vector<std::pair<State, double>> grown;
        for (const double xi : {-1.0, 1.0}) {
          const auto& law = site_law(B, 0.5 + xi * shift);
          for (const auto& [clcr, p] : law) {
            for (const auto& [st, w] : partial) {
              State ns = st;
              if (clcr.first > 0) ns[x - 1] += clcr.first;
              if (clcr.second > 0) ns[x + 1] += clcr.second;
              grown.emplace_back(std::move(ns), w * 0.5 * p);
            }
          }
        }
        // collapse duplicates to keep the branch count in check
        std::map<std::string, std::pair<State, double>> collapsed;
        for (auto& [st, w] : grown) {
          auto& slot = collapsed[key_of(st)];
          slot.first = st;
          slot.second += w;
        }
        partial.clear();
        for (auto& [k, sw] : collapsed) partial.push_back(sw);
      }
      for (auto& [st, w] : partial) {
        const std::string k = key_of(st);
        next[k] += w;
        next_decode[k] = st;
      }
    }
    dist.swap(next);
    decode.swap(next_decode);
  }
  return dist;
}

void check_aggregation(const State& initial, std::int64_t horizon,
                       std::uint64_t replicas) {
  const double beta = 1.0;
  const std::uint64_t N = 16;
  const auto exact = exact_law(initial, horizon, beta, N);
  double mass = 0.0;
  for (const auto& [k, p] : exact) mass += p;
  REQUIRE(mass == Catch::Approx(1.0).epsilon(1e-10));

  std::map<std::string, std::uint64_t> hist;
  RunConfig cfg;
  cfg.env = EnvSpec::example(N, beta, 2024);
  for (const auto& [x, c] : initial) cfg.initial.emplace_back(x, c);
  cfg.horizon_steps = horizon;
  cfg.seed = 99;
  for (std::uint64_t r = 0; r < replicas; ++r) {
    const ParticleField f = simulate_replica(
        cfg, r,
        [](const ParticleField&, const StepRecord&, const ParticleField&) {});
    State s;
    for (const auto& [x, c] : f.counts)
      if (c > 0) s[x] = c;
    ++hist[key_of(s)];
  }

  double tv = 0.0, noise = 0.0;
  const double R = static_cast<double>(replicas);
  for (const auto& [k, p] : exact) {
    const auto it = hist.find(k);
    const double emp =
        it == hist.end() ? 0.0 : static_cast<double>(it->second) / R;
    tv += std::abs(emp - p);
    noise += std::sqrt(p * (1.0 - p) / R);
  }
  for (const auto& [k, c] : hist)
    if (!exact.count(k)) tv += static_cast<double>(c) / R;
  tv *= 0.5;
  noise *= 0.5;
  INFO("tv=" << tv << " expected noise=" << noise
             << " states=" << exact.size());
  CHECK(tv <= 3.0 * noise + 1e-12);
  // nothing outside the exact support
  for (const auto& [k, c] : hist) CHECK(exact.count(k) == 1);
}

}  // namespace

TEST_CASE("aggregated sampler matches per-particle enumeration") {
  SECTION("one particle, three steps") {
    check_aggregation({{0, 1}}, 3, 60000);
  }
  SECTION("two particles at the origin, two steps") {
    check_aggregation({{0, 2}}, 2, 60000);
  }
  SECTION("two particles apart, three steps") {
    check_aggregation({{0, 1}, {2, 1}}, 3, 60000);
  }
}

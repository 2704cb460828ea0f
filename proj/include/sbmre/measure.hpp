#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "sbmre/particle.hpp"
#include "sbmre/stats.hpp"
#include "sbmre/test_function.hpp"

namespace sbmre {

// X_n(phi) = (1/N) sum_x B_{n,x} phi(x/sqrt(N)).
inline double measure_apply(const ParticleField& field, std::uint64_t N,
                            const TestFunction& phi) {
  const double inv_sqrtN = 1.0 / std::sqrt(static_cast<double>(N));
  std::vector<double> terms;
  terms.reserve(field.counts.size());
  for (const auto& [x, c] : field.counts)
    terms.push_back(static_cast<double>(c) *
                    phi(static_cast<double>(x) * inv_sqrtN));
  return pairwise_sum(terms) / static_cast<double>(N);
}

// Discrete generator A^N phi(x) = N [phi(x+1/sqrt(N)) + phi(x-1/sqrt(N))
// - 2 phi(x)] / 2; converges to (1/2) phi'' for smooth phi.
inline double discrete_generator(const TestFunction& phi, std::uint64_t N,
                                 double x) {
  const double h = 1.0 / std::sqrt(static_cast<double>(N));
  return static_cast<double>(N) *
         (phi(x + h) + phi(x - h) - 2.0 * phi(x)) / 2.0;
}

struct Increments {
  double dMb = 0.0;  // branching martingale
  double dMe = 0.0;  // environment martingale
  double dMs = 0.0;  // spatial-motion martingale
  double dC = 0.0;   // compensator (1/N) X(A^N phi) per unit lattice time
};

// One-step increments of the decomposition
//   X_{n+1}(phi) - X_n(phi) = dMb + dMe + dMs + dC,
// which holds pathwise to floating-point accuracy. Bracket formulas below
// assume offspring V in {0,2}, so non-Bernoulli records are rejected here
// as well for symmetry.
inline Increments martingale_increments(const StepRecord& rec,
                                        const TestFunction& phi,
                                        std::uint64_t N, double beta) {
  if (rec.law != LawKind::ExampleBernoulli)
    throw std::invalid_argument(
        "martingale_increments requires Example-law records");
  const double sqrtN = std::sqrt(static_cast<double>(N));
  const double n4 = std::pow(static_cast<double>(N), 0.25);
  std::vector<double> tb, te, ts, tc;
  tb.reserve(rec.sites.size());
  te.reserve(rec.sites.size());
  ts.reserve(rec.sites.size());
  tc.reserve(rec.sites.size());
  for (const SiteRecord& s : rec.sites) {
    const double x = static_cast<double>(s.site);
    const double fl = phi((x - 1.0) / sqrtN);
    const double fr = phi((x + 1.0) / sqrtN);
    const double pl = static_cast<double>(s.parents_left);
    const double pr = static_cast<double>(s.parents_right);
    const double cl = static_cast<double>(s.children_left);
    const double cr = static_cast<double>(s.children_right);
    const double b = pl + pr;
    const double drift = beta * s.xi / n4;  // m^{(1)} - 1
    tb.push_back((cl - pl * (1.0 + drift)) * fl +
                 (cr - pr * (1.0 + drift)) * fr);
    te.push_back(drift * (pl * fl + pr * fr));
    ts.push_back(pl * fl + pr * fr - b * (fl + fr) / 2.0);
    tc.push_back(b * discrete_generator(phi, N, x / sqrtN));
  }
  const double invN = 1.0 / static_cast<double>(N);
  Increments inc;
  inc.dMb = pairwise_sum(tb) * invN;
  inc.dMe = pairwise_sum(te) * invN;
  inc.dMs = pairwise_sum(ts) * invN;
  inc.dC = pairwise_sum(tc) * invN * invN;
  return inc;
}

struct BracketIncrements {
  double dBracket_b = 0.0;
  double dBracket_e = 0.0;
};

// Exact conditional second moments (not the large-N simplifications):
// with mu1 = [phi_r + phi_l]/2 and mu2 = [phi_r^2 + phi_l^2]/2,
//   d<M^b> = (1 - beta^2/sqrt(N)) / N^2 * sum_x B mu2
//   d<M^e> = beta^2 / N^{5/2} * sum_x [B(B-1) mu1^2 + B mu2].
// Evaluated on the field BEFORE the step (predictable).
inline BracketIncrements bracket_increments(const ParticleField& field,
                                            const TestFunction& phi,
                                            std::uint64_t N, double beta,
                                            LawKind law =
                                                LawKind::ExampleBernoulli) {
  if (law != LawKind::ExampleBernoulli)
    throw std::invalid_argument(
        "bracket_increments requires the Example law (V in {0,2})");
  const double sqrtN = std::sqrt(static_cast<double>(N));
  std::vector<double> t2, te;
  t2.reserve(field.counts.size());
  te.reserve(field.counts.size());
  for (const auto& [xi, c] : field.counts) {
    if (c == 0) continue;
    const double x = static_cast<double>(xi);
    const double fl = phi((x - 1.0) / sqrtN);
    const double fr = phi((x + 1.0) / sqrtN);
    const double mu1 = (fr + fl) / 2.0;
    const double mu2 = (fr * fr + fl * fl) / 2.0;
    const double b = static_cast<double>(c);
    t2.push_back(b * mu2);
    te.push_back(b * (b - 1.0) * mu1 * mu1 + b * mu2);
  }
  const double N2 = static_cast<double>(N) * static_cast<double>(N);
  BracketIncrements out;
  out.dBracket_b =
      (1.0 - beta * beta / sqrtN) / N2 * pairwise_sum(t2);
  out.dBracket_e = beta * beta / (N2 * sqrtN) * pairwise_sum(te);
  return out;
}

// Cumulative decomposition bookkeeping for one test function over one
// replica. advance() consumes the field before the step and the record of
// the step; residual() is |X_n(phi) - X_0(phi) - (Mb+Me+Ms+C)| relative.
class MartingaleLedger {
 public:
  MartingaleLedger(TestFunction phi, std::uint64_t N, double beta)
      : phi_(std::move(phi)), N_(N), beta_(beta) {}

  void advance(const ParticleField& before, const StepRecord& rec,
               const ParticleField& after) {
    if (steps_ == 0) x0_ = measure_apply(before, N_, phi_);
    const Increments inc = martingale_increments(rec, phi_, N_, beta_);
    const BracketIncrements br =
        bracket_increments(before, phi_, N_, beta_);
    Mb_ += inc.dMb;
    Me_ += inc.dMe;
    Ms_ += inc.dMs;
    C_ += inc.dC;
    bracket_b_ += br.dBracket_b;
    bracket_e_ += br.dBracket_e;
    qv_b_ += inc.dMb * inc.dMb;
    qv_e_ += inc.dMe * inc.dMe;
    x_last_ = measure_apply(after, N_, phi_);
    ++steps_;
  }

  double residual() const {
    const double lhs = x_last_ - x0_;
    const double rhs = Mb_ + Me_ + Ms_ + C_;
    const double scale = std::max(
        {std::abs(lhs), std::abs(rhs), 1.0});
    return std::abs(lhs - rhs) / scale;
  }

  double Mb() const { return Mb_; }
  double Me() const { return Me_; }
  double Ms() const { return Ms_; }
  double C() const { return C_; }
  double bracket_b() const { return bracket_b_; }
  double bracket_e() const { return bracket_e_; }
  double qv_b() const { return qv_b_; }
  double qv_e() const { return qv_e_; }
  double x_phi() const { return x_last_; }
  std::uint64_t steps() const { return steps_; }

 private:
  TestFunction phi_;
  std::uint64_t N_;
  double beta_;
  double x0_ = 0.0, x_last_ = 0.0;
  double Mb_ = 0.0, Me_ = 0.0, Ms_ = 0.0, C_ = 0.0;
  double bracket_b_ = 0.0, bracket_e_ = 0.0;
  double qv_b_ = 0.0, qv_e_ = 0.0;
  std::uint64_t steps_ = 0;
};

// Density u^{(N)}: height B/(2 sqrt(N)) on the width-2/sqrt(N) cell
// centered at x/sqrt(N); integrates to total mass / N.
struct DensityField {
  std::int64_t step_n = 0;
  std::uint64_t N = 1;
  std::map<std::int64_t, double> values;

  double cell_width() const { return 2.0 / std::sqrt(static_cast<double>(N)); }

  double integral() const {
    std::vector<double> v;
    v.reserve(values.size());
    for (const auto& [x, h] : values) v.push_back(h);
    return cell_width() * pairwise_sum(v);
  }
};

inline DensityField density(const ParticleField& field, std::uint64_t N) {
  DensityField d;
  d.step_n = field.step_n;
  d.N = N;
  const double scale = 1.0 / (2.0 * std::sqrt(static_cast<double>(N)));
  for (const auto& [x, c] : field.counts)
    if (c > 0) d.values[x] = static_cast<double>(c) * scale;
  return d;
}

}  // namespace sbmre

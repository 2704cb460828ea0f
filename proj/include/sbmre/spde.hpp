#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbmre/rng.hpp"
#include "sbmre/stats.hpp"
#include "sbmre/test_function.hpp"

namespace sbmre {

enum class Boundary { neumann, dirichlet0 };

// Cell-centered uniform grid on [x_min, x_max] for the explicit scheme.
// tau <= h^2/2 is the stability constraint and is enforced here.
struct SpdeGrid {
  double x_min = -10.0, x_max = 10.0;
  double h = 0.05;
  double tau = 0.05 * 0.05 / 2.0;
  Boundary boundary = Boundary::neumann;
  std::vector<double> values;

  SpdeGrid() { init_cells(); }

  SpdeGrid(double xmin, double xmax, double h_, double tau_,
           Boundary bc = Boundary::neumann)
      : x_min(xmin), x_max(xmax), h(h_), tau(tau_), boundary(bc) {
    if (h <= 0.0 || xmax <= xmin)
      throw std::invalid_argument("bad grid extents");
    if (tau <= 0.0 || tau > h * h / 2.0 + 1e-15)
      throw std::invalid_argument("tau must satisfy 0 < tau <= h^2/2");
    init_cells();
  }

  std::size_t cells() const { return values.size(); }

  double x_center(std::size_t i) const {
    return x_min + (static_cast<double>(i) + 0.5) * h;
  }

  void sample(const TestFunction& f) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(x_center(i));
  }

  // Linear interpolation between cell centers, clamped at the ends.
  double interpolate(double x) const {
    const double pos = (x - x_min) / h - 0.5;
    if (pos <= 0.0) return values.front();
    const double last = static_cast<double>(values.size() - 1);
    if (pos >= last) return values.back();
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return values[i] * (1.0 - frac) + values[i + 1] * frac;
  }

 private:
  void init_cells() {
    const std::size_t n =
        static_cast<std::size_t>(std::llround((x_max - x_min) / h));
    values.assign(n, 0.0);
  }
};

struct SpdeParams {
  double gamma = 1.0;
  double beta = 0.0;
  double t_end = 0.1;
  std::uint64_t noise_seed = 0;
  // Noise coefficient of the dual equation, per unit Y; the bracket of the
  // dual martingale problem fixes it at sqrt(2)*beta. Overridable.
  double dual_noise_coeff = -1.0;  // <0 means use sqrt(2)*beta

  double dual_coeff() const {
    return dual_noise_coeff >= 0.0 ? dual_noise_coeff
                                   : std::sqrt(2.0) * beta;
  }
};

namespace detail {

inline double neighbor(const std::vector<double>& v, std::size_t i, int d,
                       Boundary bc) {
  if (d < 0) {
    if (i == 0) return bc == Boundary::neumann ? v[0] : 0.0;
    return v[i - 1];
  }
  if (i + 1 == v.size()) return bc == Boundary::neumann ? v.back() : 0.0;
  return v[i + 1];
}

inline void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw std::runtime_error(std::string(what) +
                               ": non-finite grid value");
}

}  // namespace detail

// One explicit Euler-Maruyama step of
//   du = (1/2) u_xx dt + sqrt(gamma u + 2 beta^2 u^2) dW.
// Space-time white noise discretized as g_i sqrt(tau/h) per cell; negative
// values clipped to 0 afterwards (solutions are densities).
inline void em_step_forward(SpdeGrid& grid, const SpdeParams& params,
                            SplitMix64& rng) {
  const std::size_t n = grid.cells();
  const double lam = grid.tau / (2.0 * grid.h * grid.h);
  const double noise_scale = std::sqrt(grid.tau / grid.h);
  std::vector<double> next(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = grid.values[i];
    const double ul = detail::neighbor(grid.values, i, -1, grid.boundary);
    const double ur = detail::neighbor(grid.values, i, +1, grid.boundary);
    const double diff = lam * (ur - 2.0 * u + ul);
    const double var = params.gamma * u + 2.0 * params.beta * params.beta * u * u;
    const double g = normal(rng);
    next[i] = u + diff + std::sqrt(std::max(var, 0.0)) * noise_scale * g;
    if (next[i] < 0.0) next[i] = 0.0;
  }
  detail::check_finite(next, "em_step_forward");
  grid.values.swap(next);
}

// One step of the dual equation
//   dY = [(1/2) Y_xx - (gamma/2) Y^2] dt + c Y dW,  c = sqrt(2)*beta.
inline void em_step_dual(SpdeGrid& grid, const SpdeParams& params,
                         SplitMix64& rng) {
  const std::size_t n = grid.cells();
  const double lam = grid.tau / (2.0 * grid.h * grid.h);
  const double noise_scale = std::sqrt(grid.tau / grid.h);
  const double c = params.dual_coeff();
  std::vector<double> next(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = grid.values[i];
    const double yl = detail::neighbor(grid.values, i, -1, grid.boundary);
    const double yr = detail::neighbor(grid.values, i, +1, grid.boundary);
    const double diff = lam * (yr - 2.0 * y + yl);
    const double drift = -0.5 * params.gamma * grid.tau * y * y;
    const double g = normal(rng);
    next[i] = y + diff + drift + c * y * noise_scale * g;
    if (next[i] < 0.0) next[i] = 0.0;
  }
  detail::check_finite(next, "em_step_dual");
  grid.values.swap(next);
}

// Deterministic log-Laplace equation v' = (1/2) v_xx - (gamma/2) v^2
// started from phi; the beta = 0 dual.
inline SpdeGrid deterministic_log_laplace(const TestFunction& phi,
                                          double gamma, double t_end,
                                          const SpdeGrid& proto) {
  SpdeGrid grid = proto;
  grid.sample(phi);
  const double lam = grid.tau / (2.0 * grid.h * grid.h);
  const std::size_t steps =
      static_cast<std::size_t>(std::llround(t_end / grid.tau));
  std::vector<double> next(grid.cells());
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < grid.cells(); ++i) {
      const double v = grid.values[i];
      const double vl = detail::neighbor(grid.values, i, -1, grid.boundary);
      const double vr = detail::neighbor(grid.values, i, +1, grid.boundary);
      next[i] = v + lam * (vr - 2.0 * v + vl) - 0.5 * gamma * grid.tau * v * v;
      if (next[i] < 0.0) next[i] = 0.0;
    }
    detail::check_finite(next, "deterministic_log_laplace");
    grid.values.swap(next);
  }
  return grid;
}

// <grid, phi> = h * sum_i phi(x_i) values_i.
inline double grid_pair(const SpdeGrid& grid, const TestFunction& phi) {
  std::vector<double> terms(grid.cells());
  for (std::size_t i = 0; i < grid.cells(); ++i)
    terms[i] = phi(grid.x_center(i)) * grid.values[i];
  return grid.h * pairwise_sum(terms);
}

inline double grid_mass(const SpdeGrid& grid) {
  return grid.h * pairwise_sum(grid.values);
}

}  // namespace sbmre

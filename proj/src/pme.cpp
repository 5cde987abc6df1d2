#include "ffqw/pme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "ffqw/analysis.hpp"

namespace ffqw {

namespace {

constexpr double kNegativeDensityTolerance = 1e-14;

void validate_spec(const GridSpec& spec) {
  if (!(spec.x_hi > spec.x_lo) || spec.n_cells < 3) {
    throw Error(ErrorCode::configuration, "grid needs x_hi > x_lo and at least 3 cells");
  }
}

PMEGrid empty_grid(const GridSpec& spec) {
  validate_spec(spec);
  PMEGrid g;
  g.x_lo = spec.x_lo;
  g.x_hi = spec.x_hi;
  g.n_cells = spec.n_cells;
  g.dx = (spec.x_hi - spec.x_lo) / static_cast<double>(spec.n_cells);
  g.rho.assign(spec.n_cells, 0.0);
  return g;
}

void normalize_mass(PMEGrid& g) {
  const double mass = g.mass();
  if (!(mass > 0.0)) throw Error(ErrorCode::configuration, "profile has no mass on this grid");
  for (double& r : g.rho) r /= mass;
  g.initial_mass = g.mass();
}

inline double power_m(double p, double m) {
  if (m == 1.0) return p;
  if (m == 2.0) return p * p;
  return std::pow(p, m);
}

void check_stability(const PMEGrid& grid) {
  const double bound = stable_dt(grid);
  if (!(grid.dt > 0.0) || grid.dt > bound * (1.0 + 1e-12)) {
    throw Error(ErrorCode::configuration, "time step " + std::to_string(grid.dt) +
                                              " violates the stability bound " + std::to_string(bound));
  }
}

void check_negative(PMEGrid& grid) {
  for (std::size_t i = 0; i < grid.rho.size(); ++i) {
    if (!(grid.rho[i] >= 0.0)) {
      if (!(grid.rho[i] >= -kNegativeDensityTolerance)) {
        throw Error(ErrorCode::numeric, "density " + std::to_string(grid.rho[i]) + " below zero at cell " +
                                            std::to_string(i));
      }
      grid.rho[i] = 0.0;
    }
  }
}

}  // namespace

std::vector<double> PMEGrid::cell_centers() const {
  std::vector<double> x(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) x[i] = cell_center(i);
  return x;
}

double PMEGrid::mass() const noexcept {
  return std::accumulate(rho.begin(), rho.end(), 0.0) * dx;
}

double PMEGrid::max_density() const noexcept {
  return rho.empty() ? 0.0 : *std::max_element(rho.begin(), rho.end());
}

BarenblattProfile BarenblattProfile::make(double q, double sigma_q, double center) {
  if (!(q < 1.0)) {
    throw Error(ErrorCode::unsupported_parameter, "Barenblatt profile needs q < 1 (compact support)");
  }
  if (!(sigma_q > 0.0)) throw Error(ErrorCode::configuration, "sigma_q must be positive");
  return BarenblattProfile{q, sigma_q, center, q_gaussian_normalization(q, sigma_q)};
}

double BarenblattProfile::density(double x) const noexcept {
  const double d = (x - center) / sigma_q;
  return q_exponential_profile(q, d * d) / normalization;
}

double BarenblattProfile::support_half_width() const noexcept {
  return sigma_q / std::sqrt(1.0 - q);
}

double BarenblattProfile::self_similar_time(double coefficient) const {
  const double m = 2.0 - q;
  const double alpha = 1.0 / (m + 1.0);
  const double peak = 1.0 / normalization;
  return alpha * sigma_q * sigma_q * std::pow(peak, 1.0 - m) / (2.0 * m * coefficient);
}

BarenblattProfile BarenblattProfile::at_time(double t, double coefficient) const {
  const double m = 2.0 - q;
  const double t0 = self_similar_time(coefficient);
  return make(q, sigma_q * std::pow(t / t0, 1.0 / (m + 1.0)), center);
}

double stable_dt(const PMEGrid& grid) {
  const double peak = grid.max_density();
  const double dx2 = grid.dx * grid.dx;
  if (grid.kind == PdeKind::lattice_density) {
    if (peak <= 0.0) return std::numeric_limits<double>::infinity();
    // Effective diffusivity ρ/(2(1−ρ)).
    return grid.stability_factor * dx2 * (1.0 - peak) / peak;
  }
  const double m = grid.m.value_or(1.0);
  const double diffusivity = m * grid.coefficient * (m == 1.0 ? 1.0 : std::pow(peak, m - 1.0));
  if (diffusivity <= 0.0) return std::numeric_limits<double>::infinity();
  return grid.stability_factor * dx2 / (2.0 * diffusivity);
}

PMEGrid barenblatt_profile(double q, double sigma_q, double center, const GridSpec& spec,
                           double coefficient, double stability_factor) {
  const BarenblattProfile profile = BarenblattProfile::make(q, sigma_q, center);
  PMEGrid g = empty_grid(spec);
  for (std::size_t i = 0; i < g.n_cells; ++i) g.rho[i] = profile.density(g.cell_center(i));
  normalize_mass(g);
  g.kind = PdeKind::porous_medium;
  g.m = 2.0 - q;
  g.coefficient = coefficient;
  g.stability_factor = stability_factor;
  g.time = profile.self_similar_time(coefficient);
  g.dt = stable_dt(g);
  return g;
}

PMEGrid gaussian_profile(double sigma, double center, const GridSpec& spec, double coefficient,
                         double stability_factor) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::configuration, "sigma must be positive");
  PMEGrid g = empty_grid(spec);
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    const double d = (g.cell_center(i) - center) / sigma;
    g.rho[i] = std::exp(-d * d) / (std::sqrt(std::numbers::pi) * sigma);
  }
  normalize_mass(g);
  g.kind = PdeKind::porous_medium;
  g.m = 1.0;
  g.coefficient = coefficient;
  g.stability_factor = stability_factor;
  g.time = sigma * sigma / (4.0 * coefficient);
  g.dt = stable_dt(g);
  return g;
}

PMEGrid lattice_density_grid(const PMEGrid& source, double stability_factor) {
  PMEGrid g = source;
  g.kind = PdeKind::lattice_density;
  g.m.reset();
  g.coefficient = 1.0;
  g.stability_factor = stability_factor;
  if (g.max_density() >= 1.0) {
    throw Error(ErrorCode::domain, "lattice density equation requires rho < 1 everywhere");
  }
  g.dt = stable_dt(g);
  g.initial_mass = g.mass();
  return g;
}

void pme_step_in_place(PMEGrid& grid, std::vector<double>& scratch) {
  if (grid.kind != PdeKind::porous_medium || !grid.m) {
    throw Error(ErrorCode::configuration, "pme_step needs a porous-medium grid with an exponent m");
  }
  check_stability(grid);
  const double m = *grid.m;
  const std::size_t n = grid.n_cells;
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(grid.rho[i] >= 0.0)) {
      throw Error(ErrorCode::numeric, "density " + std::to_string(grid.rho[i]) + " below zero at cell " +
                                          std::to_string(i) + " before the step");
    }
    scratch[i] = power_m(grid.rho[i], m);
  }
  const double k = grid.coefficient * grid.dt / (grid.dx * grid.dx);
  // Conservative flux form; the wall fluxes are zero.
  double flux_left = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double flux_right = i + 1 < n ? scratch[i + 1] - scratch[i] : 0.0;
    grid.rho[i] += k * (flux_right - flux_left);
    flux_left = flux_right;
  }
  check_negative(grid);
  grid.time += grid.dt;
}

PMEGrid pme_step(const PMEGrid& grid) {
  PMEGrid out = grid;
  std::vector<double> scratch;
  pme_step_in_place(out, scratch);
  return out;
}

void nlpde_step_in_place(PMEGrid& grid, std::vector<double>& scratch) {
  if (grid.kind != PdeKind::lattice_density) {
    throw Error(ErrorCode::configuration, "nlpde_step needs a lattice-density grid");
  }
  if (grid.max_density() >= 1.0) {
    throw Error(ErrorCode::domain, "lattice density equation requires rho < 1 everywhere");
  }
  check_stability(grid);
  const std::size_t n = grid.n_cells;
  scratch = grid.rho;
  const double inv_dx2 = 1.0 / (grid.dx * grid.dx);
  for (std::size_t i = 0; i < n; ++i) {
    // Mirror ghost cells give zero-flux walls.
    const double left = scratch[i > 0 ? i - 1 : 0];
    const double mid = scratch[i];
    const double right = scratch[i + 1 < n ? i + 1 : n - 1];
    const double lap_sq = (right * right - 2.0 * mid * mid + left * left) * inv_dx2;
    const double lap = (right - 2.0 * mid + left) * inv_dx2;
    const double one_minus = 1.0 - mid;
    grid.rho[i] = mid + grid.dt * (0.5 * lap_sq - mid * mid * lap) / (2.0 * one_minus * one_minus);
  }
  check_negative(grid);
  grid.time += grid.dt;
}

PMEGrid nlpde_step(const PMEGrid& grid) {
  PMEGrid out = grid;
  std::vector<double> scratch;
  nlpde_step_in_place(out, scratch);
  return out;
}

void advance_to(PMEGrid& grid, double t_end) {
  std::vector<double> scratch;
  const double dt = grid.dt;
  while (grid.time < t_end) {
    const double remaining = t_end - grid.time;
    const bool last = remaining <= dt * (1.0 + 1e-12);
    if (last) grid.dt = remaining;
    if (grid.kind == PdeKind::porous_medium) {
      pme_step_in_place(grid, scratch);
    } else {
      nlpde_step_in_place(grid, scratch);
    }
    grid.dt = dt;
    if (last) grid.time = t_end;
  }
}

double l1_distance(const PMEGrid& a, const PMEGrid& b) {
  if (a.n_cells != b.n_cells || a.dx != b.dx || a.x_lo != b.x_lo) {
    throw Error(ErrorCode::configuration, "L1 distance needs grids with identical geometry");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.n_cells; ++i) acc += std::abs(a.rho[i] - b.rho[i]);
  return acc * a.dx;
}

std::optional<std::size_t> leading_edge(const PMEGrid& grid, double threshold) {
  for (std::size_t i = 0; i < grid.n_cells; ++i) {
    if (grid.rho[i] > threshold) return i;
  }
  return std::nullopt;
}

}  // namespace ffqw

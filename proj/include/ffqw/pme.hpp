#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ffqw/error.hpp"

namespace ffqw {

inline constexpr double kDefaultStabilityFactor = 0.4;

struct GridSpec {
  double x_lo = -1.0;
  double x_hi = 1.0;
  std::size_t n_cells = 2;
};

/// Equation advanced by a PMEGrid.
enum class PdeKind {
  porous_medium,    ///< ∂p/∂t = c ∂²(p^m)/∂x²
  lattice_density,  ///< ∂ρ/∂t = [½∂²ρ² − ρ²∂²ρ] / (2(1−ρ)²)
};

/// Cell-centered density on [x_lo, x_hi] with zero-flux walls.
struct PMEGrid {
  double x_lo = 0.0;
  double x_hi = 1.0;
  std::size_t n_cells = 1;
  double dx = 1.0;
  std::vector<double> rho;
  double time = 0.0;
  PdeKind kind = PdeKind::porous_medium;
  /// Porosity exponent; only meaningful for porous_medium.
  std::optional<double> m;
  /// Prefactor c of the porous-medium flux term.
  double coefficient = 1.0;
  double dt = 0.0;
  double stability_factor = kDefaultStabilityFactor;
  /// Mass at construction, for drift reporting.
  double initial_mass = 0.0;

  double cell_center(std::size_t i) const noexcept {
    return x_lo + (static_cast<double>(i) + 0.5) * dx;
  }
  std::vector<double> cell_centers() const;
  double mass() const noexcept;
  double max_density() const noexcept;
  double mass_drift() const noexcept { return mass() - initial_mass; }
};

/// Self-similar q-Gaussian profile with q = 2 − m.
struct BarenblattProfile {
  double q = 0.0;
  double sigma_q = 1.0;
  double center = 0.0;
  /// Z with p(x) = [1 − (1−q)(x−μ)²/σ²]_+^{1/(1−q)} / Z integrating to one.
  double normalization = 1.0;

  static BarenblattProfile make(double q, double sigma_q, double center);
  double density(double x) const noexcept;
  double support_half_width() const noexcept;
  /// Self-similar time at which the mass-one solution of ∂p/∂t =
  /// c ∂²(p^m)/∂x² has this width. σ grows as t^{1/(m+1)} from there.
  double self_similar_time(double coefficient = 1.0) const;
  /// Same profile advanced by the PME to time `t` (self-similar scaling).
  BarenblattProfile at_time(double t, double coefficient = 1.0) const;
};

/// Largest stable explicit step for the current state.
double stable_dt(const PMEGrid& grid);

/// Porous-medium grid holding the normalized q-Gaussian, time set to its
/// self-similar time and dt to the stability bound.
PMEGrid barenblatt_profile(double q, double sigma_q, double center, const GridSpec& spec,
                           double coefficient = 1.0,
                           double stability_factor = kDefaultStabilityFactor);
/// Heat-equation (m = 1) counterpart: exp(−(x−μ)²/σ²)/(√π σ) at time σ²/(4c).
PMEGrid gaussian_profile(double sigma, double center, const GridSpec& spec, double coefficient = 1.0,
                         double stability_factor = kDefaultStabilityFactor);
/// Same density sampled onto a lattice-density grid (dt from the effective
/// diffusivity ρ/(2(1−ρ))).
PMEGrid lattice_density_grid(const PMEGrid& source,
                             double stability_factor = kDefaultStabilityFactor);

PMEGrid pme_step(const PMEGrid& grid);
void pme_step_in_place(PMEGrid& grid, std::vector<double>& scratch);

PMEGrid nlpde_step(const PMEGrid& grid);
void nlpde_step_in_place(PMEGrid& grid, std::vector<double>& scratch);

/// Advances either equation until `t_end`, shortening the last step to land
/// on it exactly.
void advance_to(PMEGrid& grid, double t_end);

/// Σ |a_i − b_i| dx on grids with identical geometry.
double l1_distance(const PMEGrid& a, const PMEGrid& b);

/// Cell index of the first cell (from the left) with rho above `threshold`.
std::optional<std::size_t> leading_edge(const PMEGrid& grid, double threshold);

}  // namespace ffqw

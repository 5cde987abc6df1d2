#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ffqw/analysis.hpp"
#include "ffqw/distribution.hpp"
#include "ffqw/pme.hpp"
#include "ffqw/walker.hpp"

namespace ffqw {

inline constexpr std::string_view kVersion = "1.0.0";
/// Environment variable holding the worker-pool size for sweeps.
inline constexpr const char* kWorkersEnv = "FFQW_WORKERS";

enum class Model { feed_forward, homogeneous, markov, pme, nlpde };

std::string_view to_string(Model model) noexcept;
Model parse_model(std::string_view name);

struct InitialCondition {
  enum class Kind { paper_default, single_site, beta_gamma, file };
  Kind kind = Kind::paper_default;
  double beta = 0.0;
  double gamma = 0.0;
  std::filesystem::path path;
};

std::string_view to_string(InitialCondition::Kind kind) noexcept;
InitialCondition::Kind parse_initial_kind(std::string_view name);

struct RunConfig {
  Model model = Model::feed_forward;
  std::uint64_t steps = 1'000'000;
  /// Coin angle of the homogeneous model.
  double theta = 0.7853981633974483;
  InitialCondition initial;
  double epsilon_trunc = kDefaultEpsilonTrunc;
  int per_decade = 8;
  std::uint64_t measure_from = 100;
  int smoothing_window = 11;
  /// Absent: q is fitted freely at every measurement.
  std::optional<double> q_fixed;
  std::uint64_t checkpoint_every = 100'000;
  /// Write a distribution file at every measurement.
  bool snapshots = false;
  std::filesystem::path output_dir = "run";

  // Continuum models.
  double m = 2.0;
  double sigma0 = 40.0;
  double dx = 1.0;

  // Operational switches; they do not affect the produced data.
  bool resume = false;
  /// Stop (as if interrupted) once this many steps have been taken.
  std::optional<std::uint64_t> halt_after;

  void validate() const;
};

std::string config_to_json(const RunConfig& config);
/// Overlays the keys present in a JSON object onto `config`.
void apply_config_json(RunConfig& config, const std::string& json_text);

/// t = round(10^{k/per_decade}) for every k with from <= t <= steps, plus
/// `steps` itself.
std::vector<std::uint64_t> measurement_schedule(std::uint64_t steps, int per_decade,
                                                std::uint64_t from);

struct MeasurementRow {
  std::uint64_t t = 0;
  double time = 0.0;
  std::int64_t window_lo = 0;
  std::int64_t window_hi = 0;
  double truncated_mass = 0.0;
  double total_probability = 0.0;
  double std_dev = 0.0;
  double max_density = 0.0;
  std::optional<QGaussianFit> fit;
  std::string fit_status = "ok";

  /// Probability in the window plus the truncation ledger.
  double ledger() const noexcept { return total_probability + truncated_mass; }
};

struct RunArtifacts {
  std::vector<MeasurementRow> rows;
  ScalingSeries series;
  Distribution final_distribution;
  std::uint64_t final_t = 0;
  double final_truncated_mass = 0.0;
  bool halted = false;
  std::vector<std::filesystem::path> files;
};

/// Evolves the configured model, writing series.csv, the final state and
/// distribution, periodic checkpoints and manifest.json into output_dir.
RunArtifacts run_evolution(const RunConfig& config);

WalkerState make_walker_initial(const InitialCondition& initial);

// ---------------------------------------------------------------------------
// Initial-state sweep.
// ---------------------------------------------------------------------------

struct SweepConfig {
  int resolution = 15;
  std::uint64_t steps_a = 100'000;
  std::uint64_t steps_b = 1'000'000;
  int smoothing_window = 11;
  double epsilon_trunc = kDefaultEpsilonTrunc;
  /// Width growth per decade below which a point counts as localized.
  double localization_threshold = 0.01;
  /// 0: read kWorkersEnv, falling back to the hardware concurrency.
  unsigned workers = 0;
};

struct SweepPoint {
  int beta_index = 0;
  int gamma_index = 0;
  double beta = 0.0;
  double gamma = 0.0;
  std::optional<double> q_estimate;
  bool fit_ok = false;
  bool localized = false;
  double sigma_at_t1 = 0.0;
  double sigma_at_t2 = 0.0;
  double std_at_t1 = 0.0;
  double std_at_t2 = 0.0;
  std::string status;
};

struct SweepResult {
  int resolution = 0;
  std::uint64_t steps_a = 0;
  std::uint64_t steps_b = 0;
  /// Row-major: index beta_index * resolution + gamma_index.
  std::vector<SweepPoint> points;

  const SweepPoint& at(int beta_index, int gamma_index) const;
  std::vector<double> fitted_q() const;
  std::optional<double> median_q() const;
};

SweepPoint run_sweep_point(const SweepConfig& config, int beta_index, int gamma_index);
SweepResult run_sweep(const SweepConfig& config);
std::string sweep_to_csv(const SweepResult& result);

unsigned resolve_workers(unsigned requested);

// ---------------------------------------------------------------------------
// Continuum oracle validation.
// ---------------------------------------------------------------------------

struct PmeValidationConfig {
  double m = 2.0;
  double decades = 1.0;
  double sigma0 = 40.0;
  double dx = 1.0;
  int per_decade = 8;
  /// Peak density of the lattice-equation comparison (m = 2 only).
  double comparison_peak = 0.01;
};

struct PmeValidationRow {
  double time = 0.0;
  double sigma_q = 0.0;
  double mass = 0.0;
};

struct LatticeComparisonRow {
  double time = 0.0;
  double l1 = 0.0;
  double l1_relative = 0.0;
  double lattice_max_density = 0.0;
  double lattice_mass_drift = 0.0;
};

struct PmeValidationReport {
  double m = 0.0;
  double q = 0.0;
  double expected_exponent = 0.0;
  ExponentEstimate exponent;
  std::optional<QGaussianFit> free_fit_final;
  std::vector<PmeValidationRow> rows;
  std::vector<LatticeComparisonRow> comparison;
  double max_l1_relative = 0.0;
  double mass_drift = 0.0;
};

PmeValidationReport run_pme_validation(const PmeValidationConfig& config);
/// Co-evolves the lattice density equation and the quarter-coefficient m = 2
/// porous-medium equation from the same profile with the given peak.
std::vector<LatticeComparisonRow> compare_lattice_equation(double peak, double decades, int per_decade);

}  // namespace ffqw

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ffqw/distribution.hpp"
#include "ffqw/error.hpp"

namespace ffqw {

/// Parameters of A·[1 − (1−q)(x−μ)²/σ²]_+^{1/(1−q)}.
struct QGaussianFit {
  double q = 0.5;
  double sigma_q = 1.0;
  double amplitude = 0.0;
  double center = 0.0;
  double residual_rms = 0.0;
  bool q_fixed = false;

  /// Half-width of the compact support, infinite for q >= 1.
  double support_half_width() const noexcept;
  double evaluate(double x) const noexcept;
};

/// Fit did not converge within the iteration cap; carries the best point.
class FitFailure : public Error {
 public:
  FitFailure(const std::string& message, QGaussianFit best)
      : Error(ErrorCode::fit_failure, message), best_(best) {}
  const QGaussianFit& best_so_far() const noexcept { return best_; }

 private:
  QGaussianFit best_;
};

/// Values of q closer than this to one use the Gaussian exp(−z) limit.
inline constexpr double kGaussianLimitTolerance = 1e-3;
inline constexpr double kQSearchMin = -1.0;
inline constexpr double kQSearchMax = 0.95;
inline constexpr double kQGridStep = 0.05;
inline constexpr std::size_t kMinFitBins = 8;

/// [1 − (1−q) z]_+^{1/(1−q)}, z = (x−μ)²/σ².
double q_exponential_profile(double q, double z) noexcept;

/// ∫ q_exponential_profile(q, x²/σ²) dx over the real line.
double q_gaussian_normalization(double q, double sigma);

/// Centered moving mean over `window` (odd) sites. Each site's mass is spread
/// evenly over its window, clipped to the stored range, so the total is kept.
Distribution running_average(const Distribution& dist, int window);

struct FitOptions {
  std::size_t max_iterations = 20000;
  /// Simplex size (in scaled parameter units) that counts as converged.
  double tolerance = 1e-10;
};

QGaussianFit fit_q_gaussian(const Distribution& dist, std::optional<double> q_fixed = std::nullopt,
                            const FitOptions& options = {});
/// Same fit on arbitrary sample positions (e.g. cell centers of a PDE grid).
QGaussianFit fit_q_gaussian(std::span<const double> x, std::span<const double> y,
                            std::optional<double> q_fixed = std::nullopt,
                            const FitOptions& options = {});

struct ScalingSample {
  std::uint64_t t = 0;
  double sigma_q = 0.0;
};

struct ScalingSeries {
  std::vector<ScalingSample> samples;
  double q_used = 0.0;
};

struct ExponentEstimate {
  double exponent = 0.0;
  double standard_error = 0.0;
  double prefactor = 0.0;
  std::size_t samples = 0;
};

/// OLS slope of log σ against log t over samples with t_min <= t <= t_max.
ExponentEstimate estimate_exponent(const ScalingSeries& series, std::uint64_t t_min,
                                   std::uint64_t t_max);
/// Same regression on real-valued times (used by the PDE oracle).
ExponentEstimate estimate_exponent(std::span<const double> t, std::span<const double> sigma);

struct SpectrumResult {
  std::vector<double> frequencies;
  std::vector<double> power;
  double slope_loglog = 0.0;
  double slope_stderr = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  std::size_t support_sites = 0;
  std::size_t fft_length = 0;
};

inline constexpr std::size_t kMinSpectrumSupport = 32;

/// Power spectrum of (P − model) over the fit's support, mean removed and
/// zero padded to a power of two. The slope is fitted over the middle two
/// decades of non-zero frequency.
SpectrumResult residual_spectrum(const Distribution& dist, const QGaussianFit& fit);

struct TwoTimeEstimate {
  double q = 0.0;
  double sigma_a = 0.0;
  double sigma_b = 0.0;
  double center_a = 0.0;
  double center_b = 0.0;
  double joint_residual = 0.0;
};

/// q such that both distributions share a q-Gaussian shape whose widths obey
/// σ_b/σ_a = (t_b/t_a)^{1/(3−q)}.
TwoTimeEstimate estimate_q_two_times(const Distribution& dist_a, std::uint64_t t_a,
                                     const Distribution& dist_b, std::uint64_t t_b,
                                     const FitOptions& options = {});

}  // namespace ffqw

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ffqw/analysis.hpp"
#include "minimize.hpp"

namespace ffqw {

double q_exponential_profile(double q, double z) noexcept {
  const double one_minus_q = 1.0 - q;
  if (std::abs(one_minus_q) < kGaussianLimitTolerance) return std::exp(-z);
  const double base = 1.0 - one_minus_q * z;
  if (base <= 0.0) return 0.0;
  const double n = 1.0 / one_minus_q;
  if (n == 1.0) return base;
  if (n == 2.0) return base * base;
  return std::pow(base, n);
}

double q_gaussian_normalization(double q, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::configuration, "sigma_q must be positive");
  const double one_minus_q = 1.0 - q;
  if (std::abs(one_minus_q) < kGaussianLimitTolerance) return std::sqrt(std::numbers::pi) * sigma;
  if (q > 1.0) throw Error(ErrorCode::unsupported_parameter, "q > 1 is not supported");
  // ∫_{-1}^{1} (1-u²)^n du = √π Γ(n+1)/Γ(n+3/2).
  const double n = 1.0 / one_minus_q;
  const double beta_part = std::exp(std::lgamma(n + 1.0) - std::lgamma(n + 1.5));
  return sigma / std::sqrt(one_minus_q) * std::sqrt(std::numbers::pi) * beta_part;
}

double QGaussianFit::support_half_width() const noexcept {
  const double one_minus_q = 1.0 - q;
  if (one_minus_q < kGaussianLimitTolerance) return std::numeric_limits<double>::infinity();
  return sigma_q / std::sqrt(one_minus_q);
}

double QGaussianFit::evaluate(double x) const noexcept {
  const double d = (x - center) / sigma_q;
  return amplitude * q_exponential_profile(q, d * d);
}

Distribution running_average(const Distribution& dist, int window) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorCode::configuration,
                "running-average window must be a positive odd integer, got " + std::to_string(window));
  }
  if (window == 1 || dist.empty()) return dist;
  const auto& m = dist.masses();
  const auto n = static_cast<std::ptrdiff_t>(m.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> out(m.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (m[static_cast<std::size_t>(i)] == 0.0) continue;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + half);
    const double share = m[static_cast<std::size_t>(i)] / static_cast<double>(hi - lo + 1);
    for (std::ptrdiff_t k = lo; k <= hi; ++k) out[static_cast<std::size_t>(k)] += share;
  }
  return Distribution(dist.origin(), std::move(out));
}

namespace {

struct Samples {
  std::span<const double> x;
  std::span<const double> y;
  double sum_y2 = 0.0;
};

struct Evaluation {
  double sse = 0.0;
  double amplitude = 0.0;
};

// Least squares with the amplitude profiled out: for fixed (q, σ, μ) the
// optimal A is <m, y>/<m, m>. The residual is summed directly; the shortcut
// Σy² − <m,y>²/<m,m> cancels catastrophically near an exact fit.
Evaluation profiled_sse(const Samples& s, double q, double sigma, double mu) {
  thread_local std::vector<double> model;
  model.resize(s.x.size());
  const double inv_sigma2 = 1.0 / (sigma * sigma);
  double my = 0.0;
  double mm = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double d = s.x[i] - mu;
    const double m = q_exponential_profile(q, d * d * inv_sigma2);
    model[i] = m;
    my += m * s.y[i];
    mm += m * m;
  }
  if (mm <= 0.0 || my <= 0.0) return {s.sum_y2, 0.0};
  const double a = my / mm;
  double sse = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double r = s.y[i] - a * model[i];
    sse += r * r;
  }
  return {sse, a};
}

struct Scale {
  double mu0;
  double sigma0;
};

double q_out_of_range(double q) {
  if (q < kQSearchMin) return kQSearchMin - q;
  if (q > kQSearchMax) return q - kQSearchMax;
  return 0.0;
}

QGaussianFit make_fit(const Samples& s, double q, double sigma, double mu, bool fixed) {
  const Evaluation e = profiled_sse(s, q, sigma, mu);
  QGaussianFit fit;
  fit.q = q;
  fit.sigma_q = sigma;
  fit.center = mu;
  fit.amplitude = e.amplitude;
  fit.residual_rms = std::sqrt(e.sse / static_cast<double>(s.x.size()));
  fit.q_fixed = fixed;
  return fit;
}

// Scaled coordinates: u = (μ − μ0)/σ0, v = log(σ/σ0).
detail::SimplexResult fit_width_and_center(const Samples& s, double q, const Scale& sc,
                                           double sigma_start, double mu_start, double tolerance,
                                           std::size_t max_iterations) {
  auto f = [&](const std::vector<double>& p) {
    return profiled_sse(s, q, sc.sigma0 * std::exp(p[1]), sc.mu0 + sc.sigma0 * p[0]).sse;
  };
  const std::vector<double> start{(mu_start - sc.mu0) / sc.sigma0, std::log(sigma_start / sc.sigma0)};
  return detail::nelder_mead(f, start, {0.05, 0.05}, tolerance, max_iterations);
}

}  // namespace

QGaussianFit fit_q_gaussian(std::span<const double> x, std::span<const double> y,
                            std::optional<double> q_fixed, const FitOptions& options) {
  if (x.size() != y.size()) throw Error(ErrorCode::configuration, "x and y lengths differ");
  const auto nonzero = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](double v) { return v > 0.0; }));
  if (nonzero < kMinFitBins) {
    throw Error(ErrorCode::insufficient_data,
                "q-Gaussian fit needs at least " + std::to_string(kMinFitBins) + " nonzero bins, got " +
                    std::to_string(nonzero));
  }
  if (q_fixed && !(*q_fixed < 1.0 || std::abs(1.0 - *q_fixed) < kGaussianLimitTolerance)) {
    throw Error(ErrorCode::configuration, "fixed q must be below one (or the Gaussian limit q = 1)");
  }

  Samples s{x, y, 0.0};
  double w = 0.0, wx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.sum_y2 += y[i] * y[i];
    w += y[i];
    wx += y[i] * x[i];
  }
  const double mu0 = wx / w;
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) var += y[i] * (x[i] - mu0) * (x[i] - mu0);
  const double std0 = std::sqrt(var / w);
  // Var = σ²/(5 − 3q) for the compact-support family.
  auto sigma_from_std = [std0](double q) { return std0 * std::sqrt(5.0 - 3.0 * std::min(q, 1.0)); };
  const Scale sc{mu0, std::max(std0, 1e-12)};

  if (q_fixed) {
    const double q = *q_fixed;
    detail::SimplexResult r =
        fit_width_and_center(s, q, sc, sigma_from_std(q), mu0, options.tolerance, options.max_iterations);
    // One restart shakes out premature simplex collapse.
    const double sigma1 = sc.sigma0 * std::exp(r.x[1]);
    const double mu1 = sc.mu0 + sc.sigma0 * r.x[0];
    detail::SimplexResult r2 =
        fit_width_and_center(s, q, sc, sigma1, mu1, options.tolerance, options.max_iterations);
    const QGaussianFit fit =
        make_fit(s, q, sc.sigma0 * std::exp(r2.x[1]), sc.mu0 + sc.sigma0 * r2.x[0], true);
    if (!r.converged || !r2.converged) throw FitFailure("fixed-q fit did not converge", fit);
    return fit;
  }

  // Coarse scan over q with a quick width/center fit at each grid point.
  double best_q = kQSearchMin, best_sigma = sc.sigma0, best_mu = mu0;
  double best_sse = std::numeric_limits<double>::infinity();
  const int grid_points = static_cast<int>(std::lround((kQSearchMax - kQSearchMin) / kQGridStep)) + 1;
  for (int k = 0; k < grid_points; ++k) {
    const double q = kQSearchMin + kQGridStep * k;
    const detail::SimplexResult r = fit_width_and_center(s, q, sc, sigma_from_std(q), mu0, 1e-4, 400);
    if (r.value < best_sse) {
      best_sse = r.value;
      best_q = q;
      best_sigma = sc.sigma0 * std::exp(r.x[1]);
      best_mu = sc.mu0 + sc.sigma0 * r.x[0];
    }
  }

  auto f = [&](const std::vector<double>& p) {
    const double outside = q_out_of_range(p[2]);
    if (outside > 0.0) return s.sum_y2 * (1.0 + outside);
    return profiled_sse(s, p[2], sc.sigma0 * std::exp(p[1]), sc.mu0 + sc.sigma0 * p[0]).sse;
  };
  std::vector<double> start{(best_mu - sc.mu0) / sc.sigma0, std::log(best_sigma / sc.sigma0), best_q};
  detail::SimplexResult r =
      detail::nelder_mead(f, start, {0.05, 0.05, kQGridStep}, options.tolerance, options.max_iterations);
  detail::SimplexResult r2 =
      detail::nelder_mead(f, r.x, {0.01, 0.01, 0.01}, options.tolerance, options.max_iterations);
  const double q = std::clamp(r2.x[2], kQSearchMin, kQSearchMax);
  const QGaussianFit fit = make_fit(s, q, sc.sigma0 * std::exp(r2.x[1]), sc.mu0 + sc.sigma0 * r2.x[0], false);
  if (!r.converged || !r2.converged) throw FitFailure("free-q fit did not converge", fit);
  return fit;
}

QGaussianFit fit_q_gaussian(const Distribution& dist, std::optional<double> q_fixed,
                            const FitOptions& options) {
  const std::vector<double> x = dist.coordinates();
  return fit_q_gaussian(x, dist.masses(), q_fixed, options);
}

}  // namespace ffqw

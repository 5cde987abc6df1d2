#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "ffqw/analysis.hpp"
#include "minimize.hpp"

namespace ffqw {

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

LineFit ordinary_least_squares(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  fit.slope_stderr = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
  return fit;
}

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

ExponentEstimate estimate_exponent(std::span<const double> t, std::span<const double> sigma) {
  if (t.size() != sigma.size()) throw Error(ErrorCode::configuration, "t and sigma lengths differ");
  if (t.size() < 5) {
    throw Error(ErrorCode::insufficient_data,
                "exponent regression needs at least 5 samples, got " + std::to_string(t.size()));
  }
  std::vector<double> lt(t.size()), ls(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !(sigma[i] > 0.0)) {
      throw Error(ErrorCode::configuration, "scaling samples must have positive t and sigma");
    }
    lt[i] = std::log(t[i]);
    ls[i] = std::log(sigma[i]);
  }
  const LineFit line = ordinary_least_squares(lt, ls);
  return ExponentEstimate{line.slope, line.slope_stderr, std::exp(line.intercept), t.size()};
}

ExponentEstimate estimate_exponent(const ScalingSeries& series, std::uint64_t t_min, std::uint64_t t_max) {
  std::vector<double> t, sigma;
  for (const ScalingSample& s : series.samples) {
    if (s.t >= t_min && s.t <= t_max) {
      t.push_back(static_cast<double>(s.t));
      sigma.push_back(s.sigma_q);
    }
  }
  return estimate_exponent(t, sigma);
}

SpectrumResult residual_spectrum(const Distribution& dist, const QGaussianFit& fit) {
  const double half = fit.support_half_width();
  Site first = 0, last = -1;
  if (std::isfinite(half)) {
    first = static_cast<Site>(std::ceil(fit.center - half));
    last = static_cast<Site>(std::floor(fit.center + half));
  } else {
    first = dist.origin();
    last = dist.last_site();
  }
  const Site width = last - first + 1;
  if (width < static_cast<Site>(kMinSpectrumSupport)) {
    throw Error(ErrorCode::insufficient_data,
                "residual support spans " + std::to_string(std::max<Site>(width, 0)) +
                    " sites, need at least " + std::to_string(kMinSpectrumSupport));
  }

  const auto w = static_cast<std::size_t>(width);
  std::vector<double> r(w);
  double mean = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    const Site j = first + static_cast<Site>(i);
    r[i] = dist.at(j) - fit.evaluate(static_cast<double>(j));
    mean += r[i];
  }
  mean /= static_cast<double>(w);
  std::size_t n = 1;
  while (n < w) n <<= 1;

  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) in[i] = i < w ? r[i] - mean : 0.0;
  fftw_execute(plan);

  SpectrumResult result;
  result.support_sites = w;
  result.fft_length = n;
  result.frequencies.resize(n / 2 + 1);
  result.power.resize(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    result.frequencies[k] = static_cast<double>(k) / static_cast<double>(n);
    result.power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);

  const double lf_lo = std::log10(result.frequencies[1]);
  const double lf_hi = std::log10(result.frequencies.back());
  double band_lo = lf_lo, band_hi = lf_hi;
  if (lf_hi - lf_lo > 2.0) {
    const double mid = 0.5 * (lf_lo + lf_hi);
    band_lo = mid - 1.0;
    band_hi = mid + 1.0;
  }
  std::vector<double> lx, ly;
  for (std::size_t k = 1; k < result.frequencies.size(); ++k) {
    const double lf = std::log10(result.frequencies[k]);
    if (lf < band_lo - 1e-12 || lf > band_hi + 1e-12 || !(result.power[k] > 0.0)) continue;
    lx.push_back(lf);
    ly.push_back(std::log10(result.power[k]));
  }
  if (lx.size() < 3) throw Error(ErrorCode::insufficient_data, "too few spectral bins in the slope band");
  const LineFit line = ordinary_least_squares(lx, ly);
  result.slope_loglog = line.slope;
  result.slope_stderr = line.slope_stderr;
  result.band_lo = std::pow(10.0, band_lo);
  result.band_hi = std::pow(10.0, band_hi);
  return result;
}

namespace {

struct JointData {
  std::vector<double> x;
  std::span<const double> y;
  double sum_y2 = 0.0;
  double mu0 = 0.0;
  double std0 = 0.0;
};

JointData prepare(const Distribution& d) {
  if (d.nonzero_bins() < kMinFitBins) {
    throw Error(ErrorCode::insufficient_data, "two-time q estimate needs at least " +
                                                  std::to_string(kMinFitBins) + " nonzero bins per distribution");
  }
  JointData j{d.coordinates(), d.masses(), 0.0, d.mean(), d.std_dev()};
  for (double v : j.y) j.sum_y2 += v * v;
  return j;
}

// Fraction of Σy² left unexplained by the best amplitude for a given shape.
double relative_sse(const JointData& d, double q, double sigma, double mu) {
  thread_local std::vector<double> model;
  model.resize(d.x.size());
  const double inv = 1.0 / (sigma * sigma);
  double my = 0.0, mm = 0.0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double dx = d.x[i] - mu;
    const double m = q_exponential_profile(q, dx * dx * inv);
    model[i] = m;
    my += m * d.y[i];
    mm += m * m;
  }
  if (mm <= 0.0 || my <= 0.0) return 1.0;
  const double a = my / mm;
  double sse = 0.0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double r = d.y[i] - a * model[i];
    sse += r * r;
  }
  return sse / d.sum_y2;
}

}  // namespace

TwoTimeEstimate estimate_q_two_times(const Distribution& dist_a, std::uint64_t t_a,
                                     const Distribution& dist_b, std::uint64_t t_b,
                                     const FitOptions& options) {
  if (!(t_b > t_a) || t_a == 0) throw Error(ErrorCode::configuration, "need 0 < t_a < t_b");
  const JointData a = prepare(dist_a);
  const JointData b = prepare(dist_b);
  const double log_time_ratio = std::log(static_cast<double>(t_b) / static_cast<double>(t_a));

  struct Inner {
    double value;
    double sigma_a;
    double mu_a;
    double mu_b;
    bool converged;
  };
  // Joint width/center fit at fixed q; σ_b is tied to σ_a by the PME law.
  // Parameters are log(σ_a/std_a) minus the q-Gaussian offset, and the two
  // centre shifts in units of std_a, so a neighbouring optimum is a good start.
  const double s0 = a.std0;
  auto inner = [&](double q, std::vector<double> start, double tolerance, bool polish) {
    const double ratio = std::exp(log_time_ratio / (3.0 - q));
    const double offset = 0.5 * std::log(5.0 - 3.0 * q);
    auto f = [&](const std::vector<double>& p) {
      const double sigma_a = s0 * std::exp(offset + p[0]);
      return relative_sse(a, q, sigma_a, a.mu0 + s0 * p[1]) +
             relative_sse(b, q, sigma_a * ratio, b.mu0 + s0 * p[2]);
    };
    detail::SimplexResult r = detail::nelder_mead(f, std::move(start), {0.05, 0.05, 0.05}, tolerance,
                                                  options.max_iterations);
    bool converged = r.converged;
    if (polish) {
      r = detail::nelder_mead(f, r.x, {0.01, 0.01, 0.01}, 1e-8, options.max_iterations);
      converged = converged && r.converged;
    }
    return std::pair{Inner{r.value, s0 * std::exp(offset + r.x[0]), a.mu0 + s0 * r.x[1],
                           b.mu0 + s0 * r.x[2], converged},
                     r.x};
  };

  const int grid_points = static_cast<int>(std::lround((kQSearchMax - kQSearchMin) / kQGridStep)) + 1;
  std::vector<double> values(static_cast<std::size_t>(grid_points));
  std::vector<std::vector<double>> optima(static_cast<std::size_t>(grid_points));
  std::vector<double> warm{0.0, 0.0, 0.0};
  int best = 0;
  for (int k = 0; k < grid_points; ++k) {
    const auto [fit, x] = inner(kQSearchMin + kQGridStep * k, warm, 1e-5, false);
    values[static_cast<std::size_t>(k)] = fit.value;
    optima[static_cast<std::size_t>(k)] = x;
    warm = x;
    if (fit.value < values[static_cast<std::size_t>(best)]) best = k;
  }

  const std::vector<double> seed = optima[static_cast<std::size_t>(best)];
  double q = kQSearchMin + kQGridStep * best;
  if (best > 0 && best + 1 < grid_points) {
    const detail::ScalarResult r = detail::brent_minimize(
        [&](double qq) { return inner(qq, seed, 1e-7, false).first.value; }, q - kQGridStep, q, q + kQGridStep,
        1e-4, 100);
    if (r.value <= values[static_cast<std::size_t>(best)]) q = r.x;
  }

  const Inner fin = inner(q, seed, 1e-8, true).first;
  TwoTimeEstimate est;
  est.q = q;
  est.sigma_a = fin.sigma_a;
  est.sigma_b = fin.sigma_a * std::exp(log_time_ratio / (3.0 - q));
  est.center_a = fin.mu_a;
  est.center_b = fin.mu_b;
  est.joint_residual = fin.value;
  if (!fin.converged) {
    QGaussianFit best_fit;
    best_fit.q = q;
    best_fit.sigma_q = est.sigma_b;
    best_fit.center = est.center_b;
    throw FitFailure("joint two-time fit did not converge", best_fit);
  }
  return est;
}

}  // namespace ffqw

#include "minimize.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_min.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <memory>
#include <mutex>

namespace ffqw::detail {

namespace {

struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct SimplexDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct ScalarDeleter {
  void operator()(gsl_min_fminimizer* m) const { gsl_min_fminimizer_free(m); }
};

using VectorPtr = std::unique_ptr<gsl_vector, VectorDeleter>;

struct MultiContext {
  const std::function<double(const std::vector<double>&)>* f;
  std::vector<double> scratch;
};

double multi_trampoline(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<MultiContext*>(params);
  for (std::size_t i = 0; i < ctx->scratch.size(); ++i) ctx->scratch[i] = gsl_vector_get(v, i);
  const double value = (*ctx->f)(ctx->scratch);
  return std::isfinite(value) ? value : std::numeric_limits<double>::max();
}

double scalar_trampoline(double x, void* params) {
  const auto* f = static_cast<const std::function<double(double)>*>(params);
  return (*f)(x);
}

VectorPtr make_vector(const std::vector<double>& values) {
  VectorPtr v(gsl_vector_alloc(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) gsl_vector_set(v.get(), i, values[i]);
  return v;
}

constexpr std::size_t kStallIterations = 200;

}  // namespace

void silence_gsl_errors() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> start, const std::vector<double>& step,
                          double tolerance, std::size_t max_iterations) {
  silence_gsl_errors();
  const std::size_t n = start.size();
  MultiContext ctx{&f, std::vector<double>(n)};
  gsl_multimin_function fn{&multi_trampoline, n, &ctx};

  std::unique_ptr<gsl_multimin_fminimizer, SimplexDeleter> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
  VectorPtr x0 = make_vector(start);
  VectorPtr dx = make_vector(step);
  gsl_multimin_fminimizer_set(s.get(), &fn, x0.get(), dx.get());

  SimplexResult result;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stalled = 0;
  for (result.iterations = 0; result.iterations < max_iterations; ++result.iterations) {
    const int status = gsl_multimin_fminimizer_iterate(s.get());
    const double size = gsl_multimin_fminimizer_size(s.get());
    if (status == GSL_ENOPROG) {
      // No further contraction is representable; the simplex is at the
      // rounding floor of the objective.
      result.converged = true;
      break;
    }
    if (status != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(size, tolerance) == GSL_SUCCESS) {
      result.converged = true;
      break;
    }
    // Same floor reached without ENOPROG: vertices keep moving at the last
    // bits while the best value no longer changes.
    if (s->fval < best) {
      best = s->fval;
      stalled = 0;
    } else if (++stalled >= kStallIterations && size < std::sqrt(tolerance)) {
      result.converged = true;
      break;
    }
  }
  result.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.x[i] = gsl_vector_get(s->x, i);
  result.value = s->fval;
  return result;
}

ScalarResult brent_minimize(const std::function<double(double)>& f, double lo, double guess,
                            double hi, double tolerance, std::size_t max_iterations) {
  silence_gsl_errors();
  gsl_function fn{&scalar_trampoline, const_cast<std::function<double(double)>*>(&f)};
  std::unique_ptr<gsl_min_fminimizer, ScalarDeleter> s(
      gsl_min_fminimizer_alloc(gsl_min_fminimizer_brent));
  ScalarResult result{guess, f(guess), false};
  if (gsl_min_fminimizer_set(s.get(), &fn, guess, lo, hi) != GSL_SUCCESS) return result;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    if (gsl_min_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    const double a = gsl_min_fminimizer_x_lower(s.get());
    const double b = gsl_min_fminimizer_x_upper(s.get());
    if (gsl_min_test_interval(a, b, tolerance, 0.0) == GSL_SUCCESS) {
      result.converged = true;
      break;
    }
  }
  result.x = gsl_min_fminimizer_x_minimum(s.get());
  result.value = gsl_min_fminimizer_f_minimum(s.get());
  return result;
}

}  // namespace ffqw::detail

#pragma once

// Thin RAII wrappers over the GSL derivative-free minimizers.

#include <cstddef>
#include <functional>
#include <vector>

namespace ffqw::detail {

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Nelder-Mead (GSL nmsimplex2) from `start` with initial steps `step`.
/// Converged when the simplex characteristic size falls below `tolerance`, or
/// when it is below sqrt(tolerance) and the best value has stopped changing.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> start, const std::vector<double>& step,
                          double tolerance, std::size_t max_iterations);

struct ScalarResult {
  double x = 0.0;
  double value = 0.0;
  bool converged = false;
};

/// Brent minimization on [lo, hi] given an interior guess with f(guess) below
/// both end values.
ScalarResult brent_minimize(const std::function<double(double)>& f, double lo, double guess,
                            double hi, double tolerance, std::size_t max_iterations);

/// Disables the aborting default GSL error handler (idempotent).
void silence_gsl_errors();

}  // namespace ffqw::detail

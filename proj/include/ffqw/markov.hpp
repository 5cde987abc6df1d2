#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ffqw/distribution.hpp"
#include "ffqw/walker.hpp"

namespace ffqw {

/// Occupation pair (L_j, R_j) of the associated Markov model, stored
/// interleaved over the window [window_lo, window_hi].
class MarkovState {
 public:
  MarkovState();
  MarkovState(Site window_lo, std::vector<double> interleaved, std::uint64_t step_count = 0,
              double truncated_mass = 0.0);

  Site window_lo() const noexcept { return lo_; }
  Site window_hi() const noexcept { return lo_ + static_cast<Site>(size()) - 1; }
  std::size_t size() const noexcept { return data_.size() / 2; }
  std::uint64_t step_count() const noexcept { return t_; }
  double truncated_mass() const noexcept { return truncated_; }

  double left(Site j) const noexcept { return contains(j) ? data_[2 * index(j)] : 0.0; }
  double right(Site j) const noexcept { return contains(j) ? data_[2 * index(j) + 1] : 0.0; }
  bool contains(Site j) const noexcept { return j >= lo_ && j <= window_hi(); }

  std::span<const double> occupations() const noexcept { return data_; }
  double mass() const noexcept;

  std::vector<double>& storage() noexcept { return data_; }
  void set_window_lo(Site lo) noexcept { lo_ = lo; }
  void set_step_count(std::uint64_t t) noexcept { t_ = t; }
  void set_truncated_mass(double m) noexcept { truncated_ = m; }

 private:
  std::size_t index(Site j) const noexcept { return static_cast<std::size_t>(j - lo_); }

  Site lo_ = 0;
  std::vector<double> data_;
  std::uint64_t t_ = 0;
  double truncated_ = 0.0;
};

/// Rounding noise tolerated (and clamped to zero) below zero occupation.
inline constexpr double kMarkovNegativeTolerance = 1e-15;

MarkovState markov_step(const MarkovState& state, double epsilon_trunc = kDefaultEpsilonTrunc);
void markov_step_into(const MarkovState& in, MarkovState& out,
                      double epsilon_trunc = kDefaultEpsilonTrunc);

Distribution markov_distribution(const MarkovState& state);

void trim_window(MarkovState& state, double epsilon);

/// (R_0, L_0) = (R_1, L_1) = 1/4.
MarkovState markov_paper_initial_state();
/// L_j = |a_j|², R_j = |b_j|² of a walker state.
MarkovState markov_from_walker(const WalkerState& state);

}  // namespace ffqw

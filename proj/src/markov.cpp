#include "ffqw/markov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ffqw/error.hpp"

namespace ffqw {

MarkovState::MarkovState() : data_{0.5, 0.5} {}

MarkovState::MarkovState(Site window_lo, std::vector<double> interleaved, std::uint64_t step_count,
                         double truncated_mass)
    : lo_(window_lo), data_(std::move(interleaved)), t_(step_count), truncated_(truncated_mass) {
  if (data_.empty() || data_.size() % 2 != 0) {
    throw Error(ErrorCode::configuration,
                "markov state needs an even, non-zero number of occupations");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!(data_[i] >= 0.0) || !std::isfinite(data_[i])) {
      throw Error(ErrorCode::configuration,
                  "occupation at site " + std::to_string(lo_ + static_cast<Site>(i / 2)) +
                      " is negative or not finite");
    }
  }
  if (!(truncated_ >= 0.0)) throw Error(ErrorCode::configuration, "truncated mass must be non-negative");
}

double MarkovState::mass() const noexcept {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

void trim_window(MarkovState& state, double epsilon) {
  std::vector<double>& d = state.storage();
  const std::size_t n = d.size() / 2;
  auto p = [&](std::size_t i) { return d[2 * i] + d[2 * i + 1]; };

  double removed = 0.0;
  std::size_t first = 0;
  while (first + 1 < n && p(first) < epsilon) removed += p(first++);
  std::size_t last = n;
  while (last - 1 > first && p(last - 1) < epsilon) removed += p(--last);

  if (first == 0 && last == n) return;
  if (first > 0) std::copy(d.begin() + 2 * first, d.begin() + 2 * last, d.begin());
  d.resize(2 * (last - first));
  state.set_window_lo(state.window_lo() + static_cast<Site>(first));
  state.set_truncated_mass(state.truncated_mass() + removed);
}

namespace {

[[noreturn]] void model_violation(Site site, double value) {
  throw Error(ErrorCode::model_violation,
              "markov occupation " + std::to_string(value) + " below zero at site " +
                  std::to_string(site));
}

}  // namespace

void markov_step_into(const MarkovState& in, MarkovState& out, double epsilon_trunc) {
  const std::size_t n = in.size();
  const double* src = in.occupations().data();
  std::vector<double>& dst_vec = out.storage();
  dst_vec.resize(2 * (n + 2));
  double* dst = dst_vec.data();
  const Site new_lo = in.window_lo() - 1;

  // Source site i feeds L at destination index i (site j - 1) and R at
  // destination index i + 2 (site j + 1).
  for (std::size_t i = 0; i < n; ++i) {
    const double left_neighbor = i > 0 ? src[2 * (i - 1)] : 0.0;
    const double right_neighbor = i + 1 < n ? src[2 * (i + 1) + 1] : 0.0;
    const double coupling = std::clamp(2.0 * (left_neighbor + right_neighbor) - 1.0, -1.0, 1.0);
    const double l = src[2 * i];
    const double r = src[2 * i + 1];
    const double sum = r + l;
    const double diff = coupling * (r - l);
    double new_r = 0.5 * (sum + diff);
    double new_l = 0.5 * (sum - diff);
    if (new_r < 0.0) {
      if (new_r < -kMarkovNegativeTolerance) model_violation(new_lo + static_cast<Site>(i + 2), new_r);
      new_r = 0.0;
    }
    if (new_l < 0.0) {
      if (new_l < -kMarkovNegativeTolerance) model_violation(new_lo + static_cast<Site>(i), new_l);
      new_l = 0.0;
    }
    dst[2 * i] = new_l;
    dst[2 * (i + 2) + 1] = new_r;
  }
  dst[2 * n] = 0.0;
  dst[2 * (n + 1)] = 0.0;
  dst[1] = 0.0;
  dst[3] = 0.0;

  out.set_window_lo(new_lo);
  out.set_step_count(in.step_count() + 1);
  out.set_truncated_mass(in.truncated_mass());
  trim_window(out, epsilon_trunc);
}

MarkovState markov_step(const MarkovState& state, double epsilon_trunc) {
  MarkovState out;
  markov_step_into(state, out, epsilon_trunc);
  return out;
}

Distribution markov_distribution(const MarkovState& state) {
  std::vector<double> p(state.size());
  const auto occ = state.occupations();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = occ[2 * i] + occ[2 * i + 1];
  return Distribution(state.window_lo(), std::move(p));
}

MarkovState markov_paper_initial_state() {
  return MarkovState(0, {0.25, 0.25, 0.25, 0.25});
}

MarkovState markov_from_walker(const WalkerState& state) {
  std::vector<double> occ(2 * state.size());
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < occ.size(); ++i) occ[i] = abs2(amps[i]);
  return MarkovState(state.window_lo(), std::move(occ), state.step_count(), state.truncated_mass());
}

}  // namespace ffqw

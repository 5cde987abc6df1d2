#include "ffqw/walker.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace ffqw {

namespace {

// Shared by rate_function and the step kernel so both see identical bits.
inline CoinEntries feed_forward_coin(double norm_a_left, double norm_b_right) noexcept {
  CoinEntries c;
  c.g = Amplitude(std::sqrt(norm_a_left), std::sqrt(norm_b_right));
  const double g2 = std::min(norm_a_left + norm_b_right, 1.0);
  c.s = std::sqrt(1.0 - g2);
  return c;
}

// cos(xπ), sin(xπ) with exact zeros and ones at multiples of one half.
std::pair<double, double> cos_sin_pi(double x) noexcept {
  const double twice = 2.0 * x;
  if (twice == std::round(twice)) {
    switch (static_cast<long long>(twice) % 4) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  return {std::cos(x * std::numbers::pi), std::sin(x * std::numbers::pi)};
}

}  // namespace

WalkerState::WalkerState() : lo_(0), data_{Amplitude(1.0, 0.0), Amplitude{}} {}

WalkerState::WalkerState(Site window_lo, std::vector<Amplitude> interleaved,
                         std::uint64_t step_count, double truncated_mass)
    : lo_(window_lo), data_(std::move(interleaved)), t_(step_count), truncated_(truncated_mass) {
  if (data_.empty() || data_.size() % 2 != 0) {
    throw Error(ErrorCode::configuration,
                "walker state needs an even, non-zero number of interleaved amplitudes");
  }
  if (!(truncated_ >= 0.0)) {
    throw Error(ErrorCode::configuration, "truncated mass must be non-negative");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i].real()) || !std::isfinite(data_[i].imag())) {
      throw NumericOverflow(lo_ + static_cast<Site>(i / 2));
    }
  }
}

double WalkerState::norm() const noexcept {
  double acc = 0.0;
  for (const Amplitude& z : amplitudes()) acc += abs2(z);
  return acc;
}

bool WalkerState::same_amplitudes(const WalkerState& other) const noexcept {
  const Site lo = std::min(window_lo(), other.window_lo());
  const Site hi = std::max(window_hi(), other.window_hi());
  for (Site j = lo; j <= hi; ++j) {
    if (a(j) != other.a(j) || b(j) != other.b(j)) return false;
  }
  return true;
}

WalkerState WalkerState::negated() const {
  WalkerState out = *this;
  for (Amplitude& z : out.data_) z = -z;
  return out;
}

CoinEntries coin_from_angle(CoinAngle coin) noexcept {
  return CoinEntries{Amplitude(std::cos(coin.theta), 0.0), std::sin(coin.theta)};
}

CoinEntries coin_from_rate(RateValue rate) noexcept {
  CoinEntries c;
  c.g = rate.g;
  c.s = std::sqrt(1.0 - std::min(abs2(rate.g), 1.0));
  return c;
}

RateValue rate_function(const WalkerState& state, Site j) noexcept {
  return RateValue{feed_forward_coin(abs2(state.a(j - 1)), abs2(state.b(j + 1))).g};
}

double StepDecomposition::probability_a(Site dest) const noexcept {
  const Site j = dest + 1;
  if (j < window_lo || j >= window_lo + static_cast<Site>(size())) return 0.0;
  const auto i = static_cast<std::size_t>(j - window_lo);
  return markov_a[i] + interference_a[i];
}

double StepDecomposition::probability_b(Site dest) const noexcept {
  const Site j = dest - 1;
  if (j < window_lo || j >= window_lo + static_cast<Site>(size())) return 0.0;
  const auto i = static_cast<std::size_t>(j - window_lo);
  return markov_b[i] + interference_b[i];
}

namespace detail {

void report_overflow(const WalkerState& out) {
  const auto amps = out.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if (!std::isfinite(amps[i].real()) || !std::isfinite(amps[i].imag()) ||
        !std::isfinite(abs2(amps[i]))) {
      throw NumericOverflow(out.window_lo() + static_cast<Site>(i / 2));
    }
  }
  // The running sum overflowed without any single site doing so.
  throw NumericOverflow(out.window_lo());
}

}  // namespace detail

void trim_window(WalkerState& state, double epsilon) {
  const auto d = state.amplitudes();
  const std::size_t n = d.size() / 2;
  auto p = [&](std::size_t i) { return abs2(d[2 * i]) + abs2(d[2 * i + 1]); };

  double removed = 0.0;
  std::size_t first = 0;
  while (first + 1 < n && p(first) < epsilon) removed += p(first++);
  std::size_t last = n;  // one past
  while (last - 1 > first && p(last - 1) < epsilon) removed += p(--last);

  if (first == 0 && last == n) return;
  state.drop_sites(first, n - last);
  state.set_truncated_mass(state.truncated_mass() + removed);
}

void homogeneous_step_into(const WalkerState& in, WalkerState& out, CoinAngle coin) {
  const CoinEntries c = coin_from_angle(coin);
  apply_coin(in, out, [c](std::size_t) { return c; });
}

WalkerState homogeneous_step(const WalkerState& state, CoinAngle coin) {
  WalkerState out;
  homogeneous_step_into(state, out, coin);
  return out;
}

void feed_forward_step_into(const WalkerState& in, WalkerState& out, double epsilon_trunc) {
  const Amplitude* src = in.amplitudes().data();
  const std::size_t n = in.size();
  apply_coin(in, out, [src, n](std::size_t i) {
    const double na = i > 0 ? abs2(src[2 * (i - 1)]) : 0.0;
    const double nb = i + 1 < n ? abs2(src[2 * (i + 1) + 1]) : 0.0;
    return feed_forward_coin(na, nb);
  });
  trim_window(out, epsilon_trunc);
}

WalkerState feed_forward_step(const WalkerState& state, double epsilon_trunc) {
  WalkerState out;
  feed_forward_step_into(state, out, epsilon_trunc);
  return out;
}

StepDecomposition decompose_step(const WalkerState& state) {
  StepDecomposition d;
  const std::size_t n = state.size();
  d.window_lo = state.window_lo();
  d.beta.resize(n);
  d.markov_a.resize(n);
  d.interference_a.resize(n);
  d.markov_b.resize(n);
  d.interference_b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Site j = state.window_lo() + static_cast<Site>(i);
    const Amplitude a = state.a(j);
    const Amplitude b = state.b(j);
    const CoinEntries c = feed_forward_coin(abs2(state.a(j - 1)), abs2(state.b(j + 1)));
    const double g2 = 1.0 - c.s * c.s;
    const double la = abs2(a);
    const double rb = abs2(b);
    const double beta = (c.g * a * std::conj(b)).real();
    d.beta[i] = beta;
    d.markov_a[i] = g2 * la + (1.0 - g2) * rb;
    d.markov_b[i] = (1.0 - g2) * la + g2 * rb;
    d.interference_a[i] = -2.0 * c.s * beta;
    d.interference_b[i] = 2.0 * c.s * beta;
  }
  return d;
}

Distribution probability_distribution(const WalkerState& state) {
  std::vector<double> p(state.size());
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = abs2(amps[2 * i]) + abs2(amps[2 * i + 1]);
  return Distribution(state.window_lo(), std::move(p));
}

WalkerState paper_initial_state() {
  const Amplitude a(0.5, 0.0);
  const Amplitude b(0.0, 0.5);
  return WalkerState(0, {a, b, a, b});
}

WalkerState single_site_state(Amplitude a, Amplitude b, Site site) {
  return WalkerState(site, {a, b});
}

WalkerState beta_gamma_state(double beta, double gamma) {
  if (!(beta >= 0.0 && beta <= 1.0 && gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::configuration, "beta and gamma must lie in [0, 1]");
  }
  const double r = 1.0 / std::numbers::sqrt2;
  const auto [cb, sb] = cos_sin_pi(beta);
  const auto [cg, sg] = cos_sin_pi(gamma);
  return WalkerState(0, {Amplitude(cb * r, 0.0), Amplitude(sb * r, 0.0), Amplitude(cg * r, 0.0),
                         Amplitude(sg * r, 0.0)});
}

}  // namespace ffqw

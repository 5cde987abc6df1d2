#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ffqw/distribution.hpp"
#include "ffqw/error.hpp"

namespace ffqw {

using Amplitude = std::complex<double>;

/// |z|² as re² + im². std::norm may route through hypot.
inline double abs2(Amplitude z) noexcept { return z.real() * z.real() + z.imag() * z.imag(); }

/// Default threshold below which edge sites are trimmed from the active window.
inline constexpr double kDefaultEpsilonTrunc = 1e-30;

/// Two-component walker state on the integer lattice.
///
/// Amplitudes are stored interleaved (a_lo, b_lo, a_lo+1, b_lo+1, ...) over the
/// closed window [window_lo, window_hi]. Everything outside the window is an
/// exact zero. `truncated_mass` is the probability discarded by window
/// trimming so that norm() + truncated_mass() stays at one.
class WalkerState {
 public:
  /// Single site at the origin with (a, b) = (1, 0).
  WalkerState();
  /// `interleaved` holds 2 * n values for sites window_lo .. window_lo + n - 1.
  WalkerState(Site window_lo, std::vector<Amplitude> interleaved, std::uint64_t step_count = 0,
              double truncated_mass = 0.0);

  Site window_lo() const noexcept { return lo_; }
  Site window_hi() const noexcept { return lo_ + static_cast<Site>(size()) - 1; }
  std::size_t size() const noexcept { return data_.size() / 2 - head_; }
  std::uint64_t step_count() const noexcept { return t_; }
  double truncated_mass() const noexcept { return truncated_; }

  Amplitude a(Site j) const noexcept {
    return contains(j) ? data_[2 * index(j)] : Amplitude{};
  }
  Amplitude b(Site j) const noexcept {
    return contains(j) ? data_[2 * index(j) + 1] : Amplitude{};
  }
  double probability(Site j) const noexcept { return abs2(a(j)) + abs2(b(j)); }
  bool contains(Site j) const noexcept { return j >= lo_ && j <= window_hi(); }

  std::span<const Amplitude> amplitudes() const noexcept {
    return std::span<const Amplitude>(data_).subspan(2 * head_);
  }

  /// Σ_j (|a_j|² + |b_j|²) over the window.
  double norm() const noexcept;

  /// Exact comparison on the infinite lattice: windows may differ as long as
  /// the non-shared sites hold zeros. Step counts and ledgers are ignored.
  bool same_amplitudes(const WalkerState& other) const noexcept;

  WalkerState negated() const;

  // Kernel access. These keep the ledger consistent but do not validate.
  /// Resizes the window to `sites` sites and returns the writable interleaved buffer.
  Amplitude* reset_storage(std::size_t sites) {
    head_ = 0;
    data_.resize(2 * sites);
    return data_.data();
  }
  /// Drops `front` sites from the low end and `back` from the high end.
  void drop_sites(std::size_t front, std::size_t back) noexcept {
    head_ += front;
    data_.resize(data_.size() - 2 * back);
    lo_ += static_cast<Site>(front);
  }
  void set_window_lo(Site lo) noexcept { lo_ = lo; }
  void set_step_count(std::uint64_t t) noexcept { t_ = t; }
  void set_truncated_mass(double m) noexcept { truncated_ = m; }

 private:
  std::size_t index(Site j) const noexcept { return head_ + static_cast<std::size_t>(j - lo_); }

  Site lo_ = 0;
  std::vector<Amplitude> data_;
  std::size_t head_ = 0;  // sites dropped from the front without moving data
  std::uint64_t t_ = 0;
  double truncated_ = 0.0;
};

/// Constant coin angle of the homogeneous walk.
struct CoinAngle {
  double theta = 0.0;
};

/// Site-dependent rate g of the feed-forward coin; |g| <= 1.
struct RateValue {
  Amplitude g;
};

/// Entries of the local coin [[g, -s], [s, g*]] with s = sqrt(1 - |g|²).
struct CoinEntries {
  Amplitude g;
  double s = 0.0;
};

CoinEntries coin_from_angle(CoinAngle coin) noexcept;
/// Clamps |g|² to one before taking the square root.
CoinEntries coin_from_rate(RateValue rate) noexcept;

/// g_j = |a_{j-1}| + i |b_{j+1}| evaluated on `state`.
RateValue rate_function(const WalkerState& state, Site j) noexcept;

/// Per-site Markov and interference contributions of one feed-forward step.
///
/// Arrays are indexed by the source site j = window_lo + i. The `_a` entries
/// land on site j - 1 after the step and the `_b` entries on site j + 1.
struct StepDecomposition {
  Site window_lo = 0;
  std::vector<double> beta;
  std::vector<double> markov_a;
  std::vector<double> interference_a;
  std::vector<double> markov_b;
  std::vector<double> interference_b;

  std::size_t size() const noexcept { return beta.size(); }
  /// Reconstructed |a_dest|² and |b_dest|² on the post-step lattice.
  double probability_a(Site dest) const noexcept;
  double probability_b(Site dest) const noexcept;
};

// ---------------------------------------------------------------------------
// Step maps. The *_into variants reuse the capacity of `out`, which must not
// alias `in`; the value-returning forms leave their input untouched.
// ---------------------------------------------------------------------------

WalkerState homogeneous_step(const WalkerState& state, CoinAngle coin);
void homogeneous_step_into(const WalkerState& in, WalkerState& out, CoinAngle coin);

WalkerState feed_forward_step(const WalkerState& state,
                              double epsilon_trunc = kDefaultEpsilonTrunc);
void feed_forward_step_into(const WalkerState& in, WalkerState& out,
                            double epsilon_trunc = kDefaultEpsilonTrunc);

StepDecomposition decompose_step(const WalkerState& state);

Distribution probability_distribution(const WalkerState& state);

/// Trims leading and trailing sites with P_j < epsilon, moving their mass to
/// the truncation ledger. At least one site is always kept.
void trim_window(WalkerState& state, double epsilon);

/// Generic two-pass coin step. `coin_at(i)` receives the local index of a
/// source site and must read only from `in`. The window grows by one site on
/// each side; no trimming happens here.
template <class CoinAt>
void apply_coin(const WalkerState& in, WalkerState& out, CoinAt&& coin_at);

// Initial conditions.
WalkerState paper_initial_state();
WalkerState single_site_state(Amplitude a, Amplitude b, Site site = 0);
/// (a_0, b_0) = (cos βπ, sin βπ)/√2 and (a_1, b_1) = (cos γπ, sin γπ)/√2.
WalkerState beta_gamma_state(double beta, double gamma);

namespace detail {
[[noreturn]] void report_overflow(const WalkerState& out);
}

template <class CoinAt>
void apply_coin(const WalkerState& in, WalkerState& out, CoinAt&& coin_at) {
  const std::size_t n = in.size();
  const Amplitude* src = in.amplitudes().data();
  Amplitude* dst = out.reset_storage(n + 2);

  // Source site i writes a to destination index i and b to index i + 2.
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const CoinEntries c = coin_at(i);
    const double ar = src[2 * i].real(), ai = src[2 * i].imag();
    const double br = src[2 * i + 1].real(), bi = src[2 * i + 1].imag();
    const double gr = c.g.real(), gi = c.g.imag();
    // a' = g a - s b, b' = s a + g* b; written out to avoid the complex
    // multiplication's inf/nan recovery path.
    const double nar = gr * ar - gi * ai - c.s * br;
    const double nai = gr * ai + gi * ar - c.s * bi;
    const double nbr = c.s * ar + gr * br + gi * bi;
    const double nbi = c.s * ai + gr * bi - gi * br;
    dst[2 * i] = Amplitude(nar, nai);
    dst[2 * (i + 2) + 1] = Amplitude(nbr, nbi);
    total += nar * nar + nai * nai + nbr * nbr + nbi * nbi;
  }
  dst[2 * n] = Amplitude{};
  dst[2 * (n + 1)] = Amplitude{};
  dst[1] = Amplitude{};
  dst[3] = Amplitude{};

  out.set_window_lo(in.window_lo() - 1);
  out.set_step_count(in.step_count() + 1);
  out.set_truncated_mass(in.truncated_mass());
  if (!std::isfinite(total)) detail::report_overflow(out);
}

}  // namespace ffqw

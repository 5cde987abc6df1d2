#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ffqw/walker.hpp"
#include "ffqw/markov.hpp"
#include "oracles.hpp"

using namespace ffqw;
using oracle::cplx;

namespace {

constexpr double kPi = std::numbers::pi;
const double kR = 1.0 / std::numbers::sqrt2;

oracle::DenseWalker to_dense(const WalkerState& s, std::int64_t half) {
  oracle::DenseWalker d(half);
  for (Site j = s.window_lo(); j <= s.window_hi(); ++j) {
    d.at_a(j) = s.a(j);
    d.at_b(j) = s.b(j);
  }
  return d;
}

double max_amp_diff(const WalkerState& s, const oracle::DenseWalker& d) {
  double worst = 0.0;
  for (std::int64_t j = -d.half; j <= d.half; ++j) {
    worst = std::max({worst, std::abs(s.a(j) - d.get_a(j)), std::abs(s.b(j) - d.get_b(j))});
  }
  return worst;
}

}  // namespace

TEST_CASE("hadamard coin sends a spin-up site to both neighbours") {
  const WalkerState s = single_site_state({1.0, 0.0}, {0.0, 0.0});
  const WalkerState n = homogeneous_step(s, {kPi / 4});
  CHECK(n.a(-1).real() == doctest::Approx(kR).epsilon(1e-15));
  CHECK(n.b(1).real() == doctest::Approx(kR).epsilon(1e-15));
  CHECK(n.probability(0) == 0.0);
  CHECK(n.window_lo() == -1);
  CHECK(n.window_hi() == 1);
  CHECK(s.step_count() == 0);
}

TEST_CASE("zero angle is a pure shift") {
  std::mt19937_64 rng(11);
  const WalkerState s(-3, oracle::random_interleaved(rng, 7));
  const WalkerState n = homogeneous_step(s, {0.0});
  for (Site j = -3; j <= 3; ++j) {
    CHECK(n.a(j - 1) == s.a(j));
    CHECK(n.b(j + 1) == s.b(j));
  }
}

TEST_CASE("homogeneous walk matches the dense reference and spreads ballistically") {
  WalkerState s = single_site_state({kR, 0.0}, {0.0, kR});
  oracle::DenseWalker d = to_dense(s, 120);
  std::vector<double> t, sd;
  for (int step = 1; step <= 100; ++step) {
    s = homogeneous_step(s, {kPi / 4});
    d = oracle::dense_homogeneous(d, kPi / 4);
    if (step % 10 == 0) {
      t.push_back(step);
      sd.push_back(probability_distribution(s).std_dev());
    }
  }
  CHECK(max_amp_diff(s, d) < 1e-13);
  // Symmetric initial spinor gives a symmetric distribution.
  const Distribution p = probability_distribution(s);
  CHECK(std::abs(p.mean()) < 1e-10);
  CHECK(oracle::loglog_slope(t, sd) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rate function") {
  SUBCASE("isolated site has no neighbours") {
    const WalkerState s = single_site_state({0.6, 0.0}, {0.0, 0.8});
    CHECK(rate_function(s, 0).g == Amplitude{});
  }
  SUBCASE("unit left neighbour") {
    const WalkerState s(-1, {Amplitude(1.0, 0.0), Amplitude{}, Amplitude{}, Amplitude{}});
    const RateValue r = rate_function(s, 0);
    CHECK(r.g.real() == 1.0);
    CHECK(std::abs(r.g) == 1.0);
    CHECK(coin_from_rate(r).s == 0.0);
  }
  SUBCASE("moduli of complex neighbours") {
    const WalkerState s(-1, {Amplitude(0.5, 0.5), Amplitude{}, Amplitude{}, Amplitude{}, Amplitude{},
                             Amplitude(0.0, kR)});
    const RateValue r = rate_function(s, 0);
    CHECK(r.g.real() == doctest::Approx(kR).epsilon(1e-15));
    CHECK(r.g.imag() == doctest::Approx(kR).epsilon(1e-15));
    CHECK(std::abs(r.g) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("out-of-window reads are zero") {
    const WalkerState s = paper_initial_state();
    CHECK(rate_function(s, -5).g == Amplitude{});
    CHECK(rate_function(s, 7).g == Amplitude{});
  }
}

TEST_CASE("coin matrix is unitary for random rates") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double r = std::sqrt(u(rng));
    const double ph = 2 * kPi * u(rng);
    const CoinEntries c = coin_from_rate({std::polar(r, ph)});
    const cplx m[2][2] = {{c.g, -c.s}, {c.s, std::conj(c.g)}};
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const cplx e = m[i][0] * std::conj(m[j][0]) + m[i][1] * std::conj(m[j][1]);
        REQUIRE(std::abs(e - (i == j ? 1.0 : 0.0)) < 1e-14);
      }
    }
  }
  // |g|^2 marginally above one is clamped to a real s.
  CHECK(coin_from_rate({Amplitude(kR, kR * (1 + 1e-15))}).s == 0.0);
}

TEST_CASE("single occupied site: first two feed-forward steps") {
  const Amplitude a0(0.3, -0.4), b0(0.5, std::sqrt(1 - 0.5));
  const WalkerState s = single_site_state(a0, b0, 4);
  const WalkerState s1 = feed_forward_step(s);
  CHECK(s1.a(3) == -b0);
  CHECK(s1.b(5) == a0);
  CHECK(s1.probability(4) == 0.0);
  const WalkerState s2 = feed_forward_step(s1);
  CHECK(s2.a(4) == -a0);
  CHECK(s2.b(4) == -b0);
  CHECK(probability_distribution(s2).nonzero_bins() == 1);
}

TEST_CASE("single-site states oscillate with period two") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = oracle::random_interleaved(rng, 1);
    WalkerState s = single_site_state(v[0], v[1], trial - 10);
    for (int t = 0; t < 100; ++t) {
      const WalkerState s2 = feed_forward_step(feed_forward_step(s));
      REQUIRE(s2.same_amplitudes(s.negated()));
      s = feed_forward_step(s);
    }
  }
}

TEST_CASE("standard initial state: one step by hand") {
  const WalkerState s = paper_initial_state();
  CHECK(rate_function(s, 0).g == Amplitude(0.0, 0.5));
  CHECK(rate_function(s, 1).g == Amplitude(0.5, 0.0));
  const WalkerState n = feed_forward_step(s);
  const double r3 = std::sqrt(3.0);
  const Amplitude expect_a_m1(0.0, (1 - r3) / 4), expect_b_1((1 + r3) / 4, 0.0);
  const Amplitude expect_a_0(0.25, -r3 / 4), expect_b_2(r3 / 4, 0.25);
  CHECK(std::abs(n.a(-1) - expect_a_m1) < 1e-15);
  CHECK(std::abs(n.b(1) - expect_b_1) < 1e-15);
  CHECK(std::abs(n.a(0) - expect_a_0) < 1e-15);
  CHECK(std::abs(n.b(2) - expect_b_2) < 1e-15);
  CHECK(n.b(-1) == Amplitude{});
  CHECK(n.b(0) == Amplitude{});
  CHECK(n.a(1) == Amplitude{});
  CHECK(n.a(2) == Amplitude{});
  CHECK(n.window_lo() == -1);
  CHECK(n.window_hi() == 2);
}

TEST_CASE("feed-forward walk matches the dense reference") {
  std::mt19937_64 rng(23);
  WalkerState s(-2, oracle::random_interleaved(rng, 5));
  oracle::DenseWalker d = to_dense(s, 260);
  // The oracle takes |z| through hypot, the library through re² + im²; the
  // nonlinear map amplifies that last-bit difference by roughly 10x per 100 steps.
  for (int t = 0; t < 200; ++t) {
    s = feed_forward_step(s, 1e-300);
    d = oracle::dense_feed_forward(d);
  }
  CHECK(max_amp_diff(s, d) < 1e-12);
}

TEST_CASE("input state is left untouched") {
  const WalkerState s = paper_initial_state();
  const WalkerState copy = s;
  (void)feed_forward_step(s);
  (void)homogeneous_step(s, {0.3});
  CHECK(s.same_amplitudes(copy));
  CHECK(s.step_count() == copy.step_count());
}

TEST_CASE("norm is conserved step by step and over a long run") {
  WalkerState s = paper_initial_state();
  WalkerState next;
  double before = s.norm() + s.truncated_mass();
  for (int t = 0; t < 100000; ++t) {
    feed_forward_step_into(s, next);
    REQUIRE(next.window_lo() >= s.window_lo() - 1);
    REQUIRE(next.window_hi() <= s.window_hi() + 1);
    std::swap(s, next);
    const double after = s.norm() + s.truncated_mass();
    if (t < 2000) REQUIRE(std::abs(after - before) < 1e-12);
    before = after;
  }
  CHECK(std::abs(s.norm() + s.truncated_mass() - 1.0) < 1e-10);
  CHECK(s.truncated_mass() > 0.0);
  const Distribution p = probability_distribution(s);
  CHECK(std::abs(p.total() + s.truncated_mass() - 1.0) < 1e-10);
}

TEST_CASE("constant rate reduces the feed-forward coin to the homogeneous walk") {
  std::mt19937_64 rng(3);
  const WalkerState s(-4, oracle::random_interleaved(rng, 9));
  SUBCASE("shared kernel is bit-identical for identical coin entries") {
    for (double theta : {0.0, 0.4, kPi / 4, 1.3, kPi / 2}) {
      WalkerState via_kernel;
      const CoinEntries c = coin_from_angle({theta});
      apply_coin(s, via_kernel, [&](std::size_t) { return c; });
      CHECK(via_kernel.same_amplitudes(homogeneous_step(s, {theta})));
    }
  }
  SUBCASE("rate g = cos theta") {
    for (double theta : {0.0, 0.4, kPi / 4, 1.3, kPi / 2}) {
      WalkerState via_rate;
      const CoinEntries c = coin_from_rate({Amplitude(std::cos(theta), 0.0)});
      apply_coin(s, via_rate, [&](std::size_t) { return c; });
      const WalkerState h = homogeneous_step(s, {theta});
      double worst = 0.0;
      for (Site j = h.window_lo(); j <= h.window_hi(); ++j) {
        worst = std::max({worst, std::abs(via_rate.a(j) - h.a(j)), std::abs(via_rate.b(j) - h.b(j))});
      }
      CHECK(worst < 1e-15);
      if (theta == 0.0 || theta == kPi / 2) CHECK(via_rate.same_amplitudes(h));
    }
  }
}

TEST_CASE("decomposition") {
  SUBCASE("vanishing b component kills every interference term") {
    const WalkerState s(0, {Amplitude(0.6, 0.0), Amplitude{}, Amplitude(0.0, 0.8), Amplitude{}});
    const StepDecomposition d = decompose_step(s);
    for (double b : d.beta) CHECK(b == 0.0);
  }
  SUBCASE("single site has no interference") {
    const StepDecomposition d = decompose_step(single_site_state({0.6, 0.0}, {0.0, 0.8}));
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(d.interference_a[i] == 0.0);
      CHECK(d.interference_b[i] == 0.0);
    }
  }
  SUBCASE("standard initial state") {
    const StepDecomposition d = decompose_step(paper_initial_state());
    // Re[g a b*] = Re[(i/2)(1/2)(-i/2)] = 1/8.
    CHECK(d.beta[static_cast<std::size_t>(0 - d.window_lo)] == doctest::Approx(0.125).epsilon(1e-15));
  }
  SUBCASE("parts reconstruct the unitary step") {
    std::mt19937_64 rng(29);
    WalkerState s(0, oracle::random_interleaved(rng, 6));
    for (int t = 0; t < 200; ++t) {
      const StepDecomposition d = decompose_step(s);
      const WalkerState n = feed_forward_step(s, 1e-300);
      for (Site j = n.window_lo(); j <= n.window_hi(); ++j) {
        REQUIRE(std::abs(d.probability_a(j) - std::norm(n.a(j))) < 1e-12);
        REQUIRE(std::abs(d.probability_b(j) - std::norm(n.b(j))) < 1e-12);
      }
      s = n;
    }
  }
}

TEST_CASE("markov part of the decomposition equals one Markov step") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> occ(16);
  double total = 0.0;
  for (double& v : occ) total += (v = u(rng));
  for (double& v : occ) v /= total;
  std::vector<Amplitude> amps;
  for (double v : occ) amps.emplace_back(std::sqrt(v), 0.0);
  const WalkerState w(-3, amps);
  const MarkovState m(-3, occ);
  const StepDecomposition d = decompose_step(w);
  const MarkovState n = markov_step(m, 1e-300);
  for (Site j = n.window_lo(); j <= n.window_hi(); ++j) {
    double ma = 0.0, mb = 0.0;
    const Site src_a = j + 1, src_b = j - 1;
    if (src_a >= d.window_lo && src_a < d.window_lo + static_cast<Site>(d.size())) {
      ma = d.markov_a[static_cast<std::size_t>(src_a - d.window_lo)];
    }
    if (src_b >= d.window_lo && src_b < d.window_lo + static_cast<Site>(d.size())) {
      mb = d.markov_b[static_cast<std::size_t>(src_b - d.window_lo)];
    }
    CHECK(std::abs(ma - n.left(j)) < 1e-12);
    CHECK(std::abs(mb - n.right(j)) < 1e-12);
  }
}

TEST_CASE("probability distribution") {
  const WalkerState s = single_site_state({0.5, 0.0}, {0.0, 0.5});
  const Distribution p = probability_distribution(s);
  CHECK(p.at(0) == 0.5);
  CHECK(p.at(1) == 0.0);
  WalkerState h = single_site_state({1.0, 0.0}, {});
  h = homogeneous_step(homogeneous_step(h, {kPi / 4}), {kPi / 4});
  const Distribution ph = probability_distribution(h);
  CHECK(ph.size() == 5);
  CHECK(ph.total() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("trimming keeps the ledger and never empties the window") {
  WalkerState s(0, {Amplitude(1e-20, 0.0), Amplitude{}, Amplitude(std::sqrt(1.0 - 1e-40), 0.0), Amplitude{},
                    Amplitude(1e-18, 0.0), Amplitude{}});
  trim_window(s, 1e-42);
  CHECK(s.size() == 3);
  trim_window(s, 1e-38);
  CHECK(s.window_lo() == 1);
  CHECK(s.window_hi() == 2);
  CHECK(s.truncated_mass() == doctest::Approx(1e-40).epsilon(1e-12));
  trim_window(s, 1e-30);
  CHECK(s.size() == 1);
  CHECK(s.truncated_mass() == doctest::Approx(1e-36 + 1e-40).epsilon(1e-12));
  CHECK(s.norm() + s.truncated_mass() == doctest::Approx(1.0).epsilon(1e-15));
  WalkerState tiny = single_site_state({1e-200, 0.0}, {});
  trim_window(tiny, 1e-30);
  CHECK(tiny.size() == 1);
}

TEST_CASE("non-finite amplitudes are reported with their site") {
  const WalkerState s(2, {Amplitude(1e300, 0.0), Amplitude(1e300, 0.0)});
  try {
    (void)homogeneous_step(s, {0.3});
    FAIL("expected an overflow");
  } catch (const NumericOverflow& e) {
    CHECK(e.code() == ErrorCode::numeric_overflow);
    CHECK((e.site() == 1 || e.site() == 3));
  }
  CHECK_THROWS_AS(WalkerState(0, {Amplitude(std::nan(""), 0.0), Amplitude{}}), NumericOverflow);
}

TEST_CASE("beta-gamma initial states") {
  const WalkerState s = beta_gamma_state(0.25, 1.0);
  CHECK(s.a(0).real() == doctest::Approx(0.5));
  CHECK(s.b(0).real() == doctest::Approx(0.5));
  CHECK(s.a(1).real() == doctest::Approx(-kR));
  CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(beta_gamma_state(1.5, 0.0), Error);
}

TEST_CASE("evolution is deterministic") {
  WalkerState a = paper_initial_state(), b = paper_initial_state();
  for (int t = 0; t < 3000; ++t) {
    a = feed_forward_step(a);
    b = feed_forward_step(b);
  }
  CHECK(a.same_amplitudes(b));
  CHECK(a.truncated_mass() == b.truncated_mass());
}

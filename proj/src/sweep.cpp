#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "ffqw/harness.hpp"
#include "ffqw/snapshot.hpp"

namespace ffqw {

const SweepPoint& SweepResult::at(int beta_index, int gamma_index) const {
  if (beta_index < 0 || gamma_index < 0 || beta_index >= resolution || gamma_index >= resolution) {
    throw Error(ErrorCode::configuration, "sweep index out of range");
  }
  return points.at(static_cast<std::size_t>(beta_index * resolution + gamma_index));
}

std::vector<double> SweepResult::fitted_q() const {
  std::vector<double> q;
  for (const SweepPoint& p : points) {
    if (p.fit_ok && !p.localized && p.q_estimate) q.push_back(*p.q_estimate);
  }
  return q;
}

std::optional<double> SweepResult::median_q() const {
  std::vector<double> q = fitted_q();
  if (q.empty()) return std::nullopt;
  std::sort(q.begin(), q.end());
  const std::size_t n = q.size();
  return n % 2 ? q[n / 2] : 0.5 * (q[n / 2 - 1] + q[n / 2]);
}

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv(kWorkersEnv); env && *env) {
    const std::int64_t n = parse_int(env);
    if (n < 1) throw Error(ErrorCode::configuration, std::string(kWorkersEnv) + " must be a positive integer");
    return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepPoint run_sweep_point(const SweepConfig& config, int beta_index, int gamma_index) {
  SweepPoint p;
  p.beta_index = beta_index;
  p.gamma_index = gamma_index;
  const double span = static_cast<double>(config.resolution - 1);
  p.beta = beta_index / span;
  p.gamma = gamma_index / span;
  try {
    WalkerState cur = beta_gamma_state(p.beta, p.gamma);
    WalkerState next;
    auto advance_to = [&](std::uint64_t t) {
      while (cur.step_count() < t) {
        feed_forward_step_into(cur, next, config.epsilon_trunc);
        std::swap(cur, next);
      }
    };
    // Widths at t-1 and t: taking the larger cancels the period-2 breathing
    // of localized states.
    advance_to(config.steps_a - 1);
    const double std_a_prev = probability_distribution(cur).std_dev();
    advance_to(config.steps_a);
    const Distribution dist_a = probability_distribution(cur);
    advance_to(config.steps_b - 1);
    const double std_b_prev = probability_distribution(cur).std_dev();
    advance_to(config.steps_b);
    const Distribution dist_b = probability_distribution(cur);

    p.std_at_t1 = std::max(std_a_prev, dist_a.std_dev());
    p.std_at_t2 = std::max(std_b_prev, dist_b.std_dev());
    const double decades = std::log10(static_cast<double>(config.steps_b) / static_cast<double>(config.steps_a));
    const double growth = std::pow(p.std_at_t2 / p.std_at_t1, 1.0 / decades) - 1.0;
    if (!(growth >= config.localization_threshold)) {
      p.localized = true;
      p.status = "localized";
      return p;
    }
    const TwoTimeEstimate est = estimate_q_two_times(
        running_average(dist_a, config.smoothing_window), config.steps_a,
        running_average(dist_b, config.smoothing_window), config.steps_b);
    p.q_estimate = est.q;
    p.sigma_at_t1 = est.sigma_a;
    p.sigma_at_t2 = est.sigma_b;
    p.fit_ok = true;
    p.status = "ok";
  } catch (const Error& e) {
    p.fit_ok = false;
    p.status = std::string(to_string(e.code()));
  }
  return p;
}

SweepResult run_sweep(const SweepConfig& config) {
  if (config.resolution < 2) throw Error(ErrorCode::configuration, "sweep resolution must be at least 2");
  if (config.steps_a < 2 || config.steps_b <= config.steps_a) {
    throw Error(ErrorCode::configuration, "sweep needs 2 <= steps_a < steps_b");
  }
  if (config.smoothing_window < 1 || config.smoothing_window % 2 == 0) {
    throw Error(ErrorCode::configuration, "smoothing window must be a positive odd integer");
  }
  SweepResult result;
  result.resolution = config.resolution;
  result.steps_a = config.steps_a;
  result.steps_b = config.steps_b;
  const std::size_t total = static_cast<std::size_t>(config.resolution) * static_cast<std::size_t>(config.resolution);
  result.points.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const int bi = static_cast<int>(i) / config.resolution;
      const int gi = static_cast<int>(i) % config.resolution;
      result.points[i] = run_sweep_point(config, bi, gi);
    }
  };
  const unsigned n = std::min<unsigned>(resolve_workers(config.workers), static_cast<unsigned>(total));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
  }
  return result;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::ostringstream s;
  s << "beta_index,gamma_index,beta,gamma,q,fit_ok,localized,sigma_t1,sigma_t2,std_t1,std_t2,status\n";
  for (const SweepPoint& p : result.points) {
    s << p.beta_index << ',' << p.gamma_index << ',' << format_double(p.beta) << ',' << format_double(p.gamma) << ','
      << (p.q_estimate ? format_double(*p.q_estimate) : std::string()) << ',' << (p.fit_ok ? 1 : 0) << ','
      << (p.localized ? 1 : 0) << ',' << format_double(p.sigma_at_t1) << ',' << format_double(p.sigma_at_t2) << ','
      << format_double(p.std_at_t1) << ',' << format_double(p.std_at_t2) << ',' << p.status << '\n';
  }
  return s.str();
}

}  // namespace ffqw

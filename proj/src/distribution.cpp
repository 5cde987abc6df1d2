#include "ffqw/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ffqw/error.hpp"

namespace ffqw {

Distribution::Distribution(Site origin, std::vector<double> masses)
    : origin_(origin), masses_(std::move(masses)) {
  for (std::size_t i = 0; i < masses_.size(); ++i) {
    if (!(masses_[i] >= 0.0) || !std::isfinite(masses_[i])) {
      throw Error(ErrorCode::configuration,
                  "distribution mass at site " + std::to_string(origin_ + static_cast<Site>(i)) +
                      " is negative or not finite");
    }
  }
  total_ = std::accumulate(masses_.begin(), masses_.end(), 0.0);
}

double Distribution::at(Site j) const noexcept {
  if (j < origin_ || j > last_site()) return 0.0;
  return masses_[static_cast<std::size_t>(j - origin_)];
}

double Distribution::mean() const noexcept {
  if (total_ <= 0.0) return static_cast<double>(origin_);
  double acc = 0.0;
  for (std::size_t i = 0; i < masses_.size(); ++i) acc += masses_[i] * static_cast<double>(i);
  return static_cast<double>(origin_) + acc / total_;
}

double Distribution::std_dev() const noexcept {
  if (total_ <= 0.0) return 0.0;
  // Moments about the first bin keep the sums small for far-off origins.
  const double mu = mean() - static_cast<double>(origin_);
  double acc = 0.0;
  for (std::size_t i = 0; i < masses_.size(); ++i) {
    const double d = static_cast<double>(i) - mu;
    acc += masses_[i] * d * d;
  }
  return std::sqrt(acc / total_);
}

double Distribution::peak() const noexcept {
  return masses_.empty() ? 0.0 : *std::max_element(masses_.begin(), masses_.end());
}

std::size_t Distribution::nonzero_bins() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(masses_.begin(), masses_.end(), [](double m) { return m > 0.0; }));
}

std::vector<double> Distribution::coordinates() const {
  std::vector<double> x(masses_.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(origin_ + static_cast<Site>(i));
  return x;
}

Distribution Distribution::shifted(Site offset) const {
  Distribution out = *this;
  out.origin_ += offset;
  return out;
}

Distribution Distribution::scaled(double factor) const {
  std::vector<double> m = masses_;
  for (double& v : m) v *= factor;
  return Distribution(origin_, std::move(m));
}

}  // namespace ffqw

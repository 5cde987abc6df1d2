#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ffqw {

using Site = std::int64_t;

/// Probability mass per lattice site over a contiguous range starting at
/// `origin`. Sites outside the range carry zero mass. `total` can be below one
/// when the producing engine discarded mass through window truncation.
class Distribution {
 public:
  Distribution() = default;
  Distribution(Site origin, std::vector<double> masses);

  Site origin() const noexcept { return origin_; }
  Site last_site() const noexcept { return origin_ + static_cast<Site>(masses_.size()) - 1; }
  std::size_t size() const noexcept { return masses_.size(); }
  bool empty() const noexcept { return masses_.empty(); }

  const std::vector<double>& masses() const noexcept { return masses_; }
  double total() const noexcept { return total_; }

  /// Mass at an arbitrary site, zero outside the stored range.
  double at(Site j) const noexcept;

  double mean() const noexcept;
  double std_dev() const noexcept;
  double peak() const noexcept;
  std::size_t nonzero_bins() const noexcept;

  /// Site coordinates as reals, one per stored bin.
  std::vector<double> coordinates() const;

  Distribution shifted(Site offset) const;
  Distribution scaled(double factor) const;

 private:
  Site origin_ = 0;
  std::vector<double> masses_;
  double total_ = 0.0;
};

}  // namespace ffqw

#include "wtpfl/percentile.hpp"

#include <algorithm>

#include "wtpfl/errors.hpp"

namespace wtpfl {

double percentile_of(std::span<const double> sorted, double x, std::size_t n_total) {
  if (sorted.empty() || n_total == 0) throw EmptyInputError("percentile_of: no samples");
  const auto n = static_cast<double>(sorted.size());
  double rank;
  if (x <= sorted.front()) {
    const auto ties = std::upper_bound(sorted.begin(), sorted.end(), sorted.front()) - sorted.begin();
    rank = x < sorted.front() ? 1.0 : (1.0 + static_cast<double>(ties)) / 2.0;
  } else if (x >= sorted.back()) {
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), sorted.back()) - sorted.begin();
    rank = x > sorted.back() ? n : (static_cast<double>(first) + 1.0 + n) / 2.0;
  } else {
    const auto lo_it = std::lower_bound(sorted.begin(), sorted.end(), x);
    const auto hi_it = std::upper_bound(sorted.begin(), sorted.end(), x);
    if (lo_it != hi_it) {
      // exact hit: mid-rank of the tie group
      rank = (static_cast<double>(lo_it - sorted.begin()) + 1.0 +
              static_cast<double>(hi_it - sorted.begin())) / 2.0;
    } else {
      const double below = *(lo_it - 1);
      const double above = *lo_it;
      const double below_rank = static_cast<double>(lo_it - sorted.begin());  // last of lower group
      const double above_rank = below_rank + 1.0;                              // first of upper group
      rank = below_rank + (x - below) / (above - below) * (above_rank - below_rank);
    }
  }
  return (rank - 0.5) / static_cast<double>(n_total) * 100.0;
}

double quantile_type7(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw EmptyInputError("quantile: no samples");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PercentilePair percentile_pair_sd(std::span<const double> sorted, double mean, double std,
                                  double k) {
  const std::size_t n = sorted.size();
  return {percentile_of(sorted, mean - k * std, n), percentile_of(sorted, mean + k * std, n)};
}

PercentilePair percentile_pair_iqr(std::span<const double> sorted, double k_iqr) {
  const double q1 = quantile_type7(sorted, 0.25);
  const double q3 = quantile_type7(sorted, 0.75);
  const double iqr = q3 - q1;
  const std::size_t n = sorted.size();
  return {percentile_of(sorted, q1 - k_iqr * iqr, n), percentile_of(sorted, q3 + k_iqr * iqr, n)};
}

PercentilePair percentile_pair_z(std::span<const double> sorted, double mean, double std,
                                 double k_z) {
  return percentile_pair_sd(sorted, mean, std, k_z);
}

}  // namespace wtpfl

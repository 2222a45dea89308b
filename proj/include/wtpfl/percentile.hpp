#pragma once

#include <span>
#include <utility>

namespace wtpfl {

/// (lower, upper) percentile bounds; values outside are flagged.
struct PercentilePair {
  double lo = 0.0;
  double hi = 100.0;
};

/// g(x) = ((P(x) - 0.5) / n_total) * 100, P(x) the 1-based rank of x in
/// `sorted`. Tied samples share their mid-rank; between two distinct samples
/// the rank is interpolated linearly from the last rank of the lower group
/// to the first rank of the upper group. Outside the sample range the rank
/// clamps to 1 or n_total. Result lies in (0, 100).
double percentile_of(std::span<const double> sorted, double x, std::size_t n_total);

/// Linear-interpolation quantile (R type 7), q in [0, 1].
double quantile_type7(std::span<const double> sorted, double q);

/// (g(mean - k*std), g(mean + k*std)) with population std.
PercentilePair percentile_pair_sd(std::span<const double> sorted, double mean, double std,
                                  double k);

/// Bounds Q1 - k*IQR and Q3 + k*IQR mapped through percentile_of.
PercentilePair percentile_pair_iqr(std::span<const double> sorted, double k_iqr);

/// Z-score bounds; the same form as the SD pair with its own constant.
PercentilePair percentile_pair_z(std::span<const double> sorted, double mean, double std,
                                 double k_z);

}  // namespace wtpfl

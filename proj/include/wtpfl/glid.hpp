#pragma once

#include "wtpfl/aggregators.hpp"

namespace wtpfl {

/// Deviation weights are floored at this distance from the mean.
inline constexpr double kGlidWeightFloor = 1e-12;
/// Below this standard deviation a dimension falls back to the median.
inline constexpr double kGlidMinStd = 1e-12;

/// Percentile pair of one dimension for the SD, IQR or Z-score estimator.
PercentilePair glid_percentile_pair(std::span<const double> sorted, double mean, double std,
                                    const GlidConfig& cfg);

/// Per-dimension percentile trimming followed by the deviation-weighted mean
/// of the surviving values, alpha = std / |value - mean|.
AggregationOutcome agg_glid(const UpdateMatrix& updates, const GlidConfig& cfg);

}  // namespace wtpfl

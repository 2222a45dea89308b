#include "wtpfl/glid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wtpfl/errors.hpp"
#include "wtpfl/one_class_svm.hpp"

namespace wtpfl {

PercentilePair glid_percentile_pair(std::span<const double> sorted, double mean, double std,
                                    const GlidConfig& cfg) {
  switch (cfg.estimator) {
    case PercentileEstimator::Sd: return percentile_pair_sd(sorted, mean, std, cfg.k);
    case PercentileEstimator::Iqr: return percentile_pair_iqr(sorted, cfg.k_iqr);
    case PercentileEstimator::ZScore: return percentile_pair_z(sorted, mean, std, cfg.k_z);
    case PercentileEstimator::Svm: break;
  }
  throw ConfigError("glid: the SVM estimator flags values directly, it has no percentile pair");
}

AggregationOutcome agg_glid(const UpdateMatrix& updates, const GlidConfig& cfg) {
  cfg.validate();
  const Eigen::Index dim = updates.rows();
  const Eigen::Index n = updates.cols();
  if (n < 2) throw EmptyInputError("glid: needs at least two updates");

  AggregationOutcome out{ParamVector(dim), FlagMatrix::Constant(dim, n, false),
                         Eigen::MatrixXd::Zero(dim, n)};
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<double> sorted(static_cast<std::size_t>(n));

  for (Eigen::Index d = 0; d < dim; ++d) {
    // Visit values in ascending order so every sum is presentation-order free.
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return updates(d, a) < updates(d, b); });
    for (std::size_t r = 0; r < order.size(); ++r) {
      sorted[r] = updates(d, order[r]);
    }
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : sorted) ss += (v - mean) * (v - mean);
    const double std = std::sqrt(ss / static_cast<double>(n));

    if (cfg.fixed_pair || cfg.estimator != PercentileEstimator::Svm) {
      const PercentilePair pair = cfg.fixed_pair ? *cfg.fixed_pair : glid_percentile_pair(sorted, mean, std, cfg);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = percentile_of(sorted, updates(d, i), static_cast<std::size_t>(n));
        out.flags(d, i) = p < pair.lo || p > pair.hi;
      }
    } else {
      const auto svm = glid_svm_flags(sorted, cfg.nu, cfg.bandwidth);
      for (std::size_t r = 0; r < order.size(); ++r) out.flags(d, order[r]) = svm[r];
    }

    const bool all_flagged = out.flags.row(d).all();
    if (std < kGlidMinStd || all_flagged) {
      out.flags.row(d).setConstant(false);
      const auto h = static_cast<std::size_t>(n / 2);
      if (n % 2 == 1) {
        out.global(d) = sorted[h];
        out.weights(d, order[h]) = 1.0;
      } else {
        out.global(d) = (sorted[h - 1] + sorted[h]) / 2.0;
        out.weights(d, order[h - 1]) += 0.5;
        out.weights(d, order[h]) += 0.5;
      }
      continue;
    }

    double num = 0.0;
    double den = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto i : order) {
      if (out.flags(d, i)) continue;
      const double v = updates(d, i);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      const double alpha = std / std::max(std::abs(v - mean), kGlidWeightFloor);
      out.weights(d, i) = alpha;
      num += alpha * v;
      den += alpha;
    }
    // clamp only absorbs rounding; the exact value is a convex combination
    out.global(d) = std::clamp(num / den, lo, hi);
    out.weights.row(d) /= den;
  }
  require_finite(out.global, "glid");
  return out;
}

}  // namespace wtpfl

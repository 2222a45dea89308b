#pragma once

#include <span>
#include <vector>

namespace wtpfl {

/// Scalar nu-one-class SVM with RBF kernel exp(-(a-b)^2 / (2 bw^2)).
/// Multipliers are normalized to sum to 1, each bounded by 1/(nu*l).
struct OneClassSvmModel {
  std::vector<double> support;      // support values
  std::vector<double> multipliers;  // gamma_i > 0
  double rho = 0.0;
  double bandwidth = 1.0;

  double kernel(double a, double b) const;
  /// sum_i gamma_i K(sv_i, x) - rho; negative means outlier.
  double decision(double x) const;
};

struct OneClassSvmFit {
  OneClassSvmModel model;
  std::vector<double> alpha;  // multiplier of every training value
  std::vector<bool> outlier;  // per training value
  int iterations = 0;
};

/// Solves the dual exactly (SMO with second-order working-set selection,
/// run to a 1e-12 KKT gap). A training value is an outlier when its decision
/// value is negative or its multiplier sits at the upper bound (a margin
/// error; for those the optimum only guarantees decision <= 0).
OneClassSvmFit fit_one_class_svm(std::span<const double> values, double nu, double bandwidth);

/// Median of pairwise absolute differences; falls back to the median of the
/// non-zero differences, and returns 0 when every value is identical.
double median_heuristic_bandwidth(std::span<const double> values);

/// Per-value outlier flags. bandwidth <= 0 selects the median heuristic.
/// Identical values are never flagged.
std::vector<bool> glid_svm_flags(std::span<const double> values, double nu, double bandwidth);

}  // namespace wtpfl

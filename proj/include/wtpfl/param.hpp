#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "wtpfl/errors.hpp"

namespace wtpfl {

/// Flat model parameter vector. Dimension d keeps the same meaning for the
/// whole run (see predictor.hpp for the flattening order).
using ParamVector = Eigen::VectorXd;

/// A round's submissions stacked column-wise: D rows, one column per BS.
/// Row d therefore holds every BS's value for dimension d.
using UpdateMatrix = Eigen::MatrixXd;

template <typename DerivedU, typename DerivedV>
void require_same_length(const Eigen::MatrixBase<DerivedU>& u,
                         const Eigen::MatrixBase<DerivedV>& v) {
  if (u.size() != v.size()) {
    throw DimensionError("length mismatch: " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) throw NumericError(std::string(what) + " produced a non-finite value");
}

/// a*u + b*v, checked for equal lengths and a finite result.
template <typename DerivedU, typename DerivedV>
ParamVector affine_combine(double a, const Eigen::MatrixBase<DerivedU>& u, double b,
                           const Eigen::MatrixBase<DerivedV>& v) {
  require_same_length(u, v);
  ParamVector out = a * u.derived() + b * v.derived();
  require_finite(out, "affine_combine");
  return out;
}

template <typename DerivedU, typename DerivedV>
double l2_distance(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v) {
  require_same_length(u, v);
  return (u.derived() - v.derived()).norm();
}

template <typename DerivedU, typename DerivedV>
double cosine_similarity(const Eigen::MatrixBase<DerivedU>& u,
                         const Eigen::MatrixBase<DerivedV>& v) {
  require_same_length(u, v);
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return u.dot(v) / (nu * nv);
}

struct DimensionStats {
  double mean = 0.0;
  double std = 0.0;  // population (divide by count)
  std::vector<double> sorted;
};

/// Mean, population standard deviation and ascending sort of one coordinate
/// across all submitted updates.
DimensionStats elementwise_stats(const UpdateMatrix& updates, Eigen::Index d);

/// Same, over an already extracted row of values.
DimensionStats stats_of(const Eigen::Ref<const Eigen::VectorXd>& values);

/// Stacks equally sized vectors into a D x N matrix.
UpdateMatrix stack_columns(const std::vector<ParamVector>& columns);

}  // namespace wtpfl

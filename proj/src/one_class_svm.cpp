#include "wtpfl/one_class_svm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "wtpfl/errors.hpp"

namespace wtpfl {

namespace {
constexpr double kKktTolerance = 1e-12;
constexpr double kDecisionTolerance = 1e-9;
}  // namespace

double OneClassSvmModel::kernel(double a, double b) const {
  const double d = a - b;
  return std::exp(-d * d / (2.0 * bandwidth * bandwidth));
}

double OneClassSvmModel::decision(double x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) s += multipliers[i] * kernel(support[i], x);
  return s - rho;
}

double median_heuristic_bandwidth(std::span<const double> values) {
  std::vector<double> diffs;
  diffs.reserve(values.size() * (values.size() - 1) / 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = i + 1; j < values.size(); ++j) diffs.push_back(std::abs(values[i] - values[j]));
  }
  auto median = [](std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
      m = (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid))) / 2.0;
    }
    return m;
  };
  if (diffs.empty()) return 0.0;
  if (const double m = median(diffs); m > 0.0) return m;
  std::erase_if(diffs, [](double d) { return d == 0.0; });
  return diffs.empty() ? 0.0 : median(diffs);
}

OneClassSvmFit fit_one_class_svm(std::span<const double> values, double nu, double bandwidth) {
  if (values.empty()) throw EmptyInputError("one-class SVM: no values");
  if (!(nu > 0.0 && nu < 1.0)) throw ParameterError("one-class SVM: nu must lie in (0, 1)");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ParameterError("one-class SVM: bandwidth must be positive");
  }
  const auto l = static_cast<Eigen::Index>(values.size());
  const double upper = 1.0 / (nu * static_cast<double>(l));
  OneClassSvmModel kern;
  kern.bandwidth = bandwidth;

  Eigen::MatrixXd Q(l, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      Q(i, j) = Q(j, i) = kern.kernel(values[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(j)]);
    }
  }
  // Uniform start is feasible because 1/l <= 1/(nu*l).
  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(l, 1.0 / static_cast<double>(l));
  Eigen::VectorXd grad = Q * alpha;
  auto below_upper = [&](Eigen::Index t) { return alpha(t) < upper; };
  auto above_zero = [&](Eigen::Index t) { return alpha(t) > 0.0; };

  OneClassSvmFit fit;
  const int max_iter = std::max<int>(100000, static_cast<int>(100 * l));
  for (; fit.iterations < max_iter; ++fit.iterations) {
    Eigen::Index i = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < l; ++t) {
      if (below_upper(t) && -grad(t) > g_max) {
        g_max = -grad(t);
        i = t;
      }
    }
    Eigen::Index j = -1;
    double g_min = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < l; ++t) {
      if (!above_zero(t)) continue;
      g_min = std::min(g_min, -grad(t));
      const double b = g_max + grad(t);
      if (i >= 0 && b > 0.0) {
        double a = Q(i, i) + Q(t, t) - 2.0 * Q(i, t);
        if (a <= 0.0) a = 1e-12;
        const double obj = -b * b / a;
        if (obj < best) {
          best = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || g_max - g_min < kKktTolerance) break;

    double a = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
    if (a <= 0.0) a = 1e-12;
    double delta = (grad(j) - grad(i)) / a;
    delta = std::min({delta, upper - alpha(i), alpha(j)});
    if (delta <= 0.0) break;
    alpha(i) += delta;
    alpha(j) -= delta;
    if (upper - alpha(i) < 1e-15 * upper) alpha(i) = upper;
    if (alpha(j) < 1e-15 * upper) alpha(j) = 0.0;
    grad += delta * (Q.col(i) - Q.col(j));
  }

  // rho: average gradient over free multipliers, else midpoint of the bounds.
  double sum_free = 0.0;
  int n_free = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < l; ++t) {
    if (alpha(t) >= upper) {
      lb = std::max(lb, grad(t));
    } else if (alpha(t) <= 0.0) {
      ub = std::min(ub, grad(t));
    } else {
      sum_free += grad(t);
      ++n_free;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;

  fit.model.bandwidth = bandwidth;
  fit.model.rho = rho;
  fit.alpha.assign(alpha.data(), alpha.data() + l);
  fit.outlier.assign(static_cast<std::size_t>(l), false);
  for (Eigen::Index t = 0; t < l; ++t) {
    const auto k = static_cast<std::size_t>(t);
    if (alpha(t) > 0.0) {
      fit.model.support.push_back(values[k]);
      fit.model.multipliers.push_back(alpha(t));
    }
    const double f = grad(t) - rho;
    fit.outlier[k] = f < -kDecisionTolerance || alpha(t) >= upper;
  }
  return fit;
}

std::vector<bool> glid_svm_flags(std::span<const double> values, double nu, double bandwidth) {
  if (bandwidth <= 0.0) bandwidth = median_heuristic_bandwidth(values);
  if (bandwidth <= 0.0) return std::vector<bool>(values.size(), false);  // all identical
  return fit_one_class_svm(values, nu, bandwidth).outlier;
}

}  // namespace wtpfl

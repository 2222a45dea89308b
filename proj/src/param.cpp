#include "wtpfl/param.hpp"

#include <algorithm>

namespace wtpfl {

DimensionStats stats_of(const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() == 0) throw EmptyInputError("elementwise_stats: no updates");
  DimensionStats s;
  s.sorted.assign(values.data(), values.data() + values.size());
  std::sort(s.sorted.begin(), s.sorted.end());
  if (s.sorted.front() == s.sorted.back()) {
    s.mean = s.sorted.front();  // no rounding drift for a constant dimension
    return s;
  }
  const double n = static_cast<double>(values.size());
  s.mean = values.sum() / n;
  s.std = std::sqrt((values.array() - s.mean).square().sum() / n);
  return s;
}

DimensionStats elementwise_stats(const UpdateMatrix& updates, Eigen::Index d) {
  if (updates.cols() == 0) throw EmptyInputError("elementwise_stats: no updates");
  if (d < 0 || d >= updates.rows()) {
    throw DimensionError("elementwise_stats: dimension " + std::to_string(d) +
                         " out of range " + std::to_string(updates.rows()));
  }
  return stats_of(updates.row(d).transpose());
}

UpdateMatrix stack_columns(const std::vector<ParamVector>& columns) {
  if (columns.empty()) throw EmptyInputError("stack_columns: no vectors");
  const Eigen::Index dim = columns.front().size();
  UpdateMatrix m(dim, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].size() != dim) {
      throw DimensionError("stack_columns: vector " + std::to_string(i) + " has length " +
                           std::to_string(columns[i].size()) + ", expected " +
                           std::to_string(dim));
    }
    m.col(static_cast<Eigen::Index>(i)) = columns[i];
  }
  return m;
}

}  // namespace wtpfl

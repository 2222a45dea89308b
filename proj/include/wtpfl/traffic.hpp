#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace wtpfl {

/// Traffic load of one cell, uniformly bucketed, no gaps.
struct TrafficSeries {
  int bs_id = 0;
  std::vector<double> values;
  int interval_minutes = 10;
};

/// Lag layout of a sample: `recent` consecutive lags, then `seasonal` lags
/// spaced `period` intervals apart.
struct WindowConfig {
  int recent = 6;
  int seasonal = 1;
  int period = 24;

  int input_dim() const { return recent + seasonal; }
  void validate() const;
};

struct SamplePair {
  Eigen::VectorXd input;
  double target = 0.0;
};

/// normalized = (raw - offset) / scale
struct Normalization {
  double scale = 1.0;
  double offset = 0.0;

  double apply(double raw) const { return (raw - offset) / scale; }
  double undo(double normalized) const { return normalized * scale + offset; }
};

/// Sample pairs stored row-wise: inputs.row(j) predicts targets(j).
struct WindowedDataset {
  int bs_id = 0;
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
  Normalization normalization;
  /// 1-based series index of each target, kept for audits.
  std::vector<int> target_index;

  Eigen::Index size() const { return targets.size(); }
  bool empty() const { return targets.size() == 0; }
  SamplePair pair(Eigen::Index j) const { return {inputs.row(j).transpose(), targets(j)}; }
};

struct DatasetSplit {
  WindowedDataset train;
  WindowedDataset test;
};

/// Reads a Telecom-Italia style grid file (cell_id, timestamp_ms, value...),
/// tab or comma separated. `value_columns` are 0-based indices among the value
/// fields to sum (empty = all). Empty fields count as zero activity. Buckets
/// are aligned across all cells in the file, so every returned series has the
/// same length. Series come back in ascending bs_id order.
std::vector<TrafficSeries> load_grid_csv(const std::filesystem::path& path,
                                         const std::vector<int>& selected_cells,
                                         int interval_minutes,
                                         const std::vector<int>& value_columns = {});

/// Distinct cell ids present in a grid file, ascending.
std::vector<int> list_grid_cells(const std::filesystem::path& path);

struct SyntheticShape {
  double base = 100.0;
  double amplitude = 50.0;
  double phase = 0.0;
};

/// base + amp*sin(2*pi*t/period + phase) + N(0, noise_std^2), clamped at 0.
TrafficSeries synthesize_series(int bs_id, int length, int period, double noise_std,
                                const SyntheticShape& shape, std::uint64_t noise_seed);

/// `count` diurnal series with per-series base, amplitude and phase drawn
/// from `seed`. Bit-identical for identical arguments.
std::vector<TrafficSeries> generate_synthetic(int count, int length, int period,
                                              double noise_std, std::uint64_t seed);

/// One-step-ahead sample pairs, chronological train/test split, min-max
/// normalization fitted on the train pairs only.
DatasetSplit build_windows(const TrafficSeries& series, const WindowConfig& cfg,
                           double train_fraction);

}  // namespace wtpfl

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wtpfl/aggregators.hpp"
#include "wtpfl/attacks.hpp"

namespace wtpfl {

inline constexpr double kMetricCap = 100.0;

/// Reported value convention: anything above 100 reads as 100 (breakdown).
inline double cap_metric(double x, double cap = kMetricCap) { return x > cap ? cap : x; }

struct RoundRecord {
  int round = 0;
  double mae_raw = 0.0;
  double mse_raw = 0.0;
  double mae_capped = 0.0;
  double mse_capped = 0.0;
  bool broken = false;
  std::vector<int> flagged_dims_per_bs;  // indexed by bs id
  std::optional<double> eta_final;       // FTI runs only
};

struct ConfusionCounts {
  long long fp = 0;
  long long fn = 0;
  long long tp = 0;
  long long tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    fp += o.fp;
    fn += o.fn;
    tp += o.tp;
    tn += o.tn;
    return *this;
  }
};

/// Rates are averaged over dimensions; a dimension with a zero denominator
/// is left out, and a rate with no contributing dimension is absent.
struct DetectionReport {
  std::optional<double> fpr;
  std::optional<double> fnr;
  std::vector<ConfusionCounts> per_dimension;
};

/// Per-dimension confusion counts of one flag matrix. `adversarial[i]` is the
/// ground truth of column i (fake or compromised = positive).
std::vector<ConfusionCounts> confusion_by_dimension(const FlagMatrix& flags,
                                                    const std::vector<bool>& adversarial);

DetectionReport detection_report(std::vector<ConfusionCounts> per_dimension);

DetectionReport detection_metrics(const FlagMatrix& flags, const std::vector<bool>& adversarial);

struct PersistOptions {
  /// Additional files (name, content) written next to the core outputs and
  /// listed in the manifest.
  std::vector<std::pair<std::string, std::string>> extra_files;
};

std::string rounds_csv(const std::vector<RoundRecord>& records);
std::string detection_csv(const DetectionReport& report);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& resolved_config);

/// Writes rounds.csv, detection.csv, config.json and manifest.json into
/// out_dir under a lock file. Returns the manifest path.
std::filesystem::path persist_run(const std::vector<RoundRecord>& records,
                                  const DetectionReport& detection,
                                  const nlohmann::json& resolved_config,
                                  const std::filesystem::path& out_dir,
                                  const PersistOptions& options = {});

/// RAII exclusive lock on an output directory.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct MatrixCell {
  AggregatorKind aggregator = AggregatorKind::Mean;
  AttackKind attack = AttackKind::None;
  std::optional<std::pair<double, double>> mae_mse;  // capped; empty = failed run
};

struct SummaryTable {
  std::string text;
  std::string csv;
};

/// Rows are aggregation rules, columns attacks (NO, Trim, History, Random,
/// MPAF, Zheng, FTI order, only those present), MAE line then MSE line.
SummaryTable summary_table(const std::vector<MatrixCell>& cells);

/// "100.0" at or above the cap, otherwise three decimals.
std::string format_metric(double capped_value);

/// Shortest decimal text that parses back to the same double.
std::string format_exact(double x);

}  // namespace wtpfl

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "wtpfl/aggregators.hpp"
#include "wtpfl/attacks.hpp"
#include "wtpfl/errors.hpp"
#include "wtpfl/predictor.hpp"
#include "wtpfl/traffic.hpp"

namespace wtpfl {

struct DataSourceConfig {
  std::string kind = "synthetic";  // synthetic | csv
  std::string csv_path;
  std::vector<int> cells;          // csv: empty => random pick of fleet.size cells
  std::vector<int> value_columns;  // csv: empty => sum all value columns
  int interval_minutes = 60;
  int length = 504;                // synthetic: three weeks of hourly buckets
  int period = 24;
  double noise_std = 2.0;
};

struct FleetConfig {
  int size = 100;                 // BSs presented to the server, n + m
  double adversarial_pct = 20.0;  // fake or compromised share of `size`

  int adversarial_count() const;
};

/// theta-hat for FTI: all zeros, a constant fill, or explicit values.
struct BaseModelSpec {
  enum class Kind { Zeros, Constant, Explicit } kind = Kind::Zeros;
  double constant = 0.0;
  std::vector<double> values;

  ParamVector materialize(Eigen::Index dim) const;
};

struct AttackConfig {
  AttackKind kind = AttackKind::Fti;
  double eta0 = 10.0;
  int refinements = 5;
  BaseModelSpec base_model;
  BaselineAttackConfig baseline;
};

struct SeedConfig {
  std::uint64_t data = 1;
  std::uint64_t init = 2;
  std::uint64_t round = 3;
  std::uint64_t shuffle = 4;  // presentation order only

  void override_all(std::uint64_t seed);
};

struct OutputConfig {
  std::string dir = "out";
  bool export_flags = false;
};

struct ExperimentConfig {
  DataSourceConfig data;
  WindowConfig window;
  double train_split = 0.8;
  ModelArch model;  // input_dim follows the window
  TrainConfig train;
  FleetConfig fleet;
  int rounds = 50;
  AttackConfig attack;
  AggregatorConfig aggregator;
  SeedConfig seeds;
  OutputConfig output;
  double cap = kDefaultCap;
  int broken_rounds = 5;
  int workers = 1;

  static constexpr double kDefaultCap = 100.0;

  /// Every violated constraint, one message per field. Empty when valid.
  std::vector<std::string> validation_errors() const;
  void validate() const;
};

/// Carries the full list of violated fields.
class ConfigValidationError : public ConfigError {
 public:
  explicit ConfigValidationError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Applies the keys present in `j` over the defaults. Unknown keys and type
/// mismatches are collected and thrown together as ConfigValidationError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace wtpfl

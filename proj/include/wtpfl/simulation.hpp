#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <memory>
#include <optional>
#include <vector>

#include "wtpfl/aggregators.hpp"
#include "wtpfl/attacks.hpp"
#include "wtpfl/config.hpp"
#include "wtpfl/metrics.hpp"

namespace wtpfl {

enum class Truth { Benign, Fake, Compromised };

/// A model submitted in one round. The truth tag is fixed at construction and
/// never crosses into PresentedUpdates.
class LocalUpdate {
 public:
  LocalUpdate(int bs_id, int round, ParamVector params, Truth truth)
      : bs_id_(bs_id), round_(round), params_(std::move(params)), truth_(truth) {}

  int bs_id() const noexcept { return bs_id_; }
  int round() const noexcept { return round_; }
  const ParamVector& params() const noexcept { return params_; }
  Truth truth() const noexcept { return truth_; }

 private:
  int bs_id_;
  int round_;
  ParamVector params_;
  Truth truth_;
};

/// Server view of a round: columns permuted by `shuffle_seed`, tags dropped.
/// `truth_out`, when given, receives the tags in the same column order for
/// scoring only.
PresentedUpdates present_updates(const std::vector<LocalUpdate>& updates,
                                 std::uint64_t shuffle_seed,
                                 std::vector<Truth>* truth_out = nullptr);

/// Benign BSs hold ids [0, benign); adversarial BSs hold [benign, size).
struct FleetLayout {
  int benign = 0;
  int adversarial = 0;
  ThreatModel threat = ThreatModel::None;

  static FleetLayout from_config(const ExperimentConfig& cfg);
  int size() const { return benign + adversarial; }
};

/// Windowed data of every cell (index = bs id) plus the server's root set.
struct FederatedData {
  std::vector<DatasetSplit> cells;
  WindowedDataset server_root;

  std::vector<const WindowedDataset*> test_sets() const;
};

inline constexpr Eigen::Index kServerRootSamples = 100;

/// Loads or synthesizes fleet.size series and windows them.
FederatedData prepare_data(const ExperimentConfig& cfg);

struct RoundOutput {
  RoundRecord record;
  AggregationOutcome outcome;
  std::vector<Truth> truth;  // per presented column
  std::vector<int> bs_order;  // bs id per presented column
  std::optional<FtiResult> fti;
};

/// Step-by-step driver; one call to step() is one global round.
class Simulation {
 public:
  Simulation(const ExperimentConfig& cfg, const FederatedData& data);

  RoundOutput step();

  int round() const { return round_; }
  const ParamVector& global() const { return history_.back(); }
  const ParamVector& initial() const { return history_.front(); }
  const FleetLayout& fleet() const { return fleet_; }
  const ModelArch& arch() const { return arch_; }

 private:
  std::vector<LocalUpdate> collect_updates(std::optional<FtiResult>& fti);
  std::vector<ParamVector> train_cells(int first, int count) const;
  TrainConfig train_config(int bs_id) const;

  ExperimentConfig cfg_;
  const FederatedData& data_;
  ModelArch arch_;
  FleetLayout fleet_;
  std::unique_ptr<Aggregator> aggregator_;
  ParamVector fti_base_;
  std::vector<ParamVector> history_;  // theta^0 .. theta^t
  int round_ = 0;
  int over_cap_streak_ = 0;
};

struct FtiTraceRow {
  int round = 0;
  int iteration = 0;
  double eta = 0.0;
  double dist = 0.0;
};

struct ExperimentResult {
  std::vector<RoundRecord> records;
  DetectionReport detection;
  std::vector<FtiTraceRow> fti_trace;
  std::string flags_csv;  // filled when output.export_flags is set
  ParamVector initial;
  ParamVector final_global;
};

ModelArch resolved_arch(const ExperimentConfig& cfg);

/// T rounds from the seeded initial model. Validates before round 0.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const FederatedData& data);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string fti_trace_csv(const std::vector<FtiTraceRow>& rows);

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written to per-index slots; the first exception is rethrown.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

}  // namespace wtpfl

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wtpfl/config.hpp"
#include "wtpfl/metrics.hpp"
#include "wtpfl/simulation.hpp"

namespace wtpfl {

/// Writes the core outputs of one run plus fti_trace.csv / flags.csv when present.
std::filesystem::path persist_experiment(const ExperimentConfig& cfg, const ExperimentResult& result,
                                         const std::filesystem::path& out_dir);

/// Final-round capped (MAE, MSE) of a run.
std::pair<double, double> final_metrics(const ExperimentResult& result);

struct CellRun {
  ExperimentConfig config;
  std::optional<ExperimentResult> result;
  std::string error;  // set when the run failed
};

struct MatrixResult {
  std::vector<CellRun> runs;  // aggregator-major order
  std::vector<MatrixCell> cells;
  SummaryTable table;
};

/// Every (aggregator, attack) pair as an independent run over shared data.
/// Cells run on up to `jobs` threads; results do not depend on `jobs`.
MatrixResult run_matrix(const ExperimentConfig& base, const FederatedData& data,
                        const std::vector<AggregatorKind>& aggregators,
                        const std::vector<AttackKind>& attacks, int jobs);

enum class SweepParam { FakePct, Eta0, FleetSize, PercentilePair, Estimator };

SweepParam sweep_param_from_string(const std::string& name);
std::string to_string(SweepParam p);

/// Config for one sweep point. Pairs are written "lo:hi".
ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepParam param,
                                   const std::string& value);

struct SweepRun {
  std::string value;
  CellRun run;
};

std::vector<SweepRun> run_sweep(const ExperimentConfig& base, SweepParam param,
                                const std::vector<std::string>& values, int jobs);

/// value, attack, mae_capped, mse_capped
std::string sweep_csv(const std::vector<SweepRun>& runs);

// --- command layer shared by the executable and the tests -----------------

enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitRuntime = 2 };

struct CommandOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool print_config = false;
};

int command_run(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
                std::ostream& err);
int command_matrix(const std::filesystem::path& config, const std::vector<std::string>& aggregators,
                   const std::vector<std::string>& attacks, const CommandOptions& opts,
                   std::ostream& out, std::ostream& err);
int command_sweep(const std::filesystem::path& config, const std::string& param,
                  const std::vector<std::string>& values, const CommandOptions& opts,
                  std::ostream& out, std::ostream& err);

}  // namespace wtpfl

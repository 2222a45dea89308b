#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wtpfl/param.hpp"
#include "wtpfl/predictor.hpp"
#include "wtpfl/traffic.hpp"

namespace wtpfl {

enum class AttackKind { None, Trim, History, Random, Mpaf, Zheng, Fti };

AttackKind attack_from_string(const std::string& name);
std::string to_string(AttackKind k);
/// Column label used in summary tables (NO, Trim, ..., FTI).
std::string attack_label(AttackKind k);

/// Fake BSs own no data; compromised BSs are genuine cells under attacker control.
enum class ThreatModel { None, FakeClients, CompromisedClients };
ThreatModel threat_model_of(AttackKind k);

/// Everything any BS can see: the broadcast global models. Attacks that only
/// receive this view cannot reach benign updates or training data.
struct GlobalView {
  int round = 0;
  const ParamVector& initial;
  const ParamVector& current;
  /// Globals theta^0 .. theta^t, last element == current.
  const std::vector<ParamVector>& history;

  const ParamVector& lagged(int lag) const;
};

/// Extra knowledge held by the attacker of compromised cells: their own data
/// and their own honest updates. Never contains benign updates.
struct CompromisedView {
  const ModelArch& arch;
  std::vector<const WindowedDataset*> datasets;
  std::vector<TrainConfig> train_cfgs;  // one per compromised cell
  UpdateMatrix honest_updates;          // D x c, filled for Trim
};

struct FtiConfig {
  ParamVector base_model;  // theta-hat; empty => config error
  double eta0 = 10.0;
  int refinements = 5;     // R; 0 applies eta0 directly
};

struct FtiTraceEntry {
  double eta = 0.0;   // eta used for the candidate of this iteration
  double dist = 0.0;  // ||candidate - theta^t||_2
  double step = 0.0;  // step after this iteration's halving
};

struct FtiResult {
  ParamVector fake;           // shared by every fake BS this round
  double eta_applied = 0.0;   // eta that produced `fake`
  double eta_final = 0.0;     // eta after the last adjustment
  std::vector<FtiTraceEntry> trace;
};

/// Fake traffic injection: candidate = eta*base + (1-eta)*theta^t, with eta
/// moved up by step/2 while the distance to theta^t keeps growing and down
/// otherwise, step halving every iteration.
FtiResult fti_craft(const ParamVector& global, const FtiConfig& cfg);

struct BaselineAttackConfig {
  double scaling_factor = 1000.0;  // lambda
  double gaussian_std = 1.0;       // Random attack
  int history_lag = 1;             // History attack
  double trim_spread = 0.5;        // Trim attack push beyond the extreme
  double trim_jitter = 0.01;       // fraction of the push used as jitter
  double zheng_scale = 1.0;        // lambda_z

  void validate() const;
};

// Trim attack (reading of a one-line description): per dimension, estimate
// the benign movement sign from the attacker's own updates and place the
// malicious value past the opposite extreme. Ties count as upward movement.
UpdateMatrix trim_attack(const UpdateMatrix& known_updates, const ParamVector& global,
                         const BaselineAttackConfig& cfg, int count, std::uint64_t seed);

// History attack: theta^t + lambda*(theta^{t-h} - theta^t), theta^0 before round h.
ParamVector history_attack(const GlobalView& view, const BaselineAttackConfig& cfg);

// Random attack: lambda * N(0, gaussian_std^2) per coordinate.
ParamVector random_attack(Eigen::Index dim, const BaselineAttackConfig& cfg, std::uint64_t seed);

// MPAF: theta^t + lambda*(theta^0 - theta^t), dragging toward the initial model.
ParamVector mpaf_attack(const ParamVector& initial, const ParamVector& current,
                        const BaselineAttackConfig& cfg);

// Zheng attack (reading of a one-line description): move against both the
// cell's own fine-tuning direction and the last global step,
// theta^t - lambda_z * (delta_i + (theta^t - theta^{t-1})).
UpdateMatrix zheng_attack(const CompromisedView& compromised, const ParamVector& current,
                          const ParamVector* previous, const BaselineAttackConfig& cfg);

}  // namespace wtpfl

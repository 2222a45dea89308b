#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wtpfl/param.hpp"
#include "wtpfl/percentile.hpp"

namespace wtpfl {

using FlagMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Merged model plus per-(dimension, BS) bookkeeping. Columns follow the
/// presentation order of the updates.
struct AggregationOutcome {
  ParamVector global;
  FlagMatrix flags;       // D x N, true = rejected as malicious in that dimension
  Eigen::MatrixXd weights;  // D x N, normalized per dimension, 0 where flagged
};

/// What the server receives. Deliberately carries no ground-truth tag.
struct PresentedUpdates {
  UpdateMatrix params;       // D x N
  std::vector<int> bs_ids;   // bs id of each column

  Eigen::Index dim() const { return params.rows(); }
  Eigen::Index count() const { return params.cols(); }
};

struct AggregatorContext {
  int round = 0;
  const ParamVector* current = nullptr;        // theta^t
  const ParamVector* previous = nullptr;       // theta^{t-1}, null at round 0
  const ParamVector* server_update = nullptr;  // FLTrust root-data model
};

enum class AggregatorKind { Mean, Median, Trim, Krum, FoolsGold, Faba, FlTrust, Flair, Glid };

AggregatorKind aggregator_from_string(const std::string& name);
std::string to_string(AggregatorKind k);
std::string aggregator_label(AggregatorKind k);

enum class PercentileEstimator { Sd, Iqr, ZScore, Svm };

PercentileEstimator estimator_from_string(const std::string& name);
std::string to_string(PercentileEstimator e);

struct GlidConfig {
  PercentileEstimator estimator = PercentileEstimator::Sd;
  double k = 3.0;
  double k_iqr = 1.5;
  double k_z = 2.0;
  double nu = 0.2;
  double bandwidth = 0.0;  // <= 0: median heuristic
  std::optional<PercentilePair> fixed_pair;

  void validate() const;
};

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::Glid;
  double trim_fraction = 0.2;
  int krum_f = -1;  // < 0: number of adversarial BSs in the fleet
  double faba_fraction = 0.2;
  double flair_decay = 0.9;
  double flair_c = 5.0;
  GlidConfig glid;

  void validate() const;
};

// --- stateless rules -------------------------------------------------------
// Per-dimension sums run over sorted values, which makes Mean, Median, Trim
// and GLID bit-identical under any presentation order.

ParamVector agg_mean(const UpdateMatrix& updates);
ParamVector agg_median(const UpdateMatrix& updates);
ParamVector agg_trimmed_mean(const UpdateMatrix& updates, double trim_fraction);

struct KrumResult {
  ParamVector global;
  Eigen::Index selected = 0;
  Eigen::VectorXd scores;
};
/// Score = sum of squared distances to the N-f-2 nearest other updates.
/// Lowest score wins; ties go to the lowest bs id.
KrumResult agg_krum(const UpdateMatrix& updates, const std::vector<int>& bs_ids, int f);

struct FabaResult {
  ParamVector global;
  std::vector<Eigen::Index> removed;  // column indices in removal order
};
/// Repeatedly drops the update farthest from the running mean.
FabaResult agg_faba(const UpdateMatrix& updates, const std::vector<int>& bs_ids,
                    double remove_fraction);

/// FoolsGold weights from cumulative update histories (one column per BS).
/// Cosine similarity, pardoning, 1 - max similarity, logit rescale, [0, 1] clip.
Eigen::VectorXd foolsgold_weights(const Eigen::MatrixXd& histories);

struct FlTrustResult {
  ParamVector global;
  Eigen::VectorXd trust;
};
/// Trust = ReLU(cosine(delta_i, delta_server)); deltas rescaled to the server
/// delta norm and trust-averaged on top of theta^t.
FlTrustResult agg_fltrust(const UpdateMatrix& updates, const ParamVector& current,
                          const ParamVector& server_update);

/// Fraction of coordinates where the update moves opposite to the last global step.
Eigen::VectorXd flair_flip_scores(const UpdateMatrix& updates, const ParamVector& current,
                                  const ParamVector* previous);

/// Weighted mean of columns; weights need not be normalized.
ParamVector weighted_mean(const UpdateMatrix& updates, const Eigen::VectorXd& weights);

// --- stateful interface ----------------------------------------------------

class Aggregator {
 public:
  virtual ~Aggregator() = default;
  virtual AggregationOutcome aggregate(const PresentedUpdates& updates,
                                       const AggregatorContext& ctx) = 0;
  virtual AggregatorKind kind() const = 0;
  virtual bool needs_server_update() const { return false; }
};

/// `adversary_count` resolves krum_f < 0.
std::unique_ptr<Aggregator> make_aggregator(const AggregatorConfig& cfg, int adversary_count);

/// Dispatch helper for stateless use; stateful rules start from empty state.
AggregationOutcome aggregate(const AggregatorConfig& cfg, const PresentedUpdates& updates,
                             const AggregatorContext& ctx, int adversary_count = 0);

/// flags => weight 0, per-dimension weight sum > 0.
bool outcome_invariants_hold(const AggregationOutcome& outcome);

}  // namespace wtpfl

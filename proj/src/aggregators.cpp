#include "wtpfl/aggregators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wtpfl/errors.hpp"
#include "wtpfl/glid.hpp"

namespace wtpfl {

AggregatorKind aggregator_from_string(const std::string& name) {
  if (name == "mean" || name == "fedavg") return AggregatorKind::Mean;
  if (name == "median") return AggregatorKind::Median;
  if (name == "trim" || name == "trimmed_mean") return AggregatorKind::Trim;
  if (name == "krum") return AggregatorKind::Krum;
  if (name == "foolsgold") return AggregatorKind::FoolsGold;
  if (name == "faba") return AggregatorKind::Faba;
  if (name == "fltrust") return AggregatorKind::FlTrust;
  if (name == "flair") return AggregatorKind::Flair;
  if (name == "glid") return AggregatorKind::Glid;
  throw ConfigError("unknown aggregator '" + name + "'");
}

std::string to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::Mean: return "mean";
    case AggregatorKind::Median: return "median";
    case AggregatorKind::Trim: return "trim";
    case AggregatorKind::Krum: return "krum";
    case AggregatorKind::FoolsGold: return "foolsgold";
    case AggregatorKind::Faba: return "faba";
    case AggregatorKind::FlTrust: return "fltrust";
    case AggregatorKind::Flair: return "flair";
    case AggregatorKind::Glid: return "glid";
  }
  return "mean";
}

std::string aggregator_label(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::Mean: return "Mean";
    case AggregatorKind::Median: return "Median";
    case AggregatorKind::Trim: return "Trim";
    case AggregatorKind::Krum: return "Krum";
    case AggregatorKind::FoolsGold: return "FoolsGold";
    case AggregatorKind::Faba: return "FABA";
    case AggregatorKind::FlTrust: return "FLTrust";
    case AggregatorKind::Flair: return "FLAIR";
    case AggregatorKind::Glid: return "GLID";
  }
  return "Mean";
}

PercentileEstimator estimator_from_string(const std::string& name) {
  if (name == "sd") return PercentileEstimator::Sd;
  if (name == "iqr") return PercentileEstimator::Iqr;
  if (name == "z" || name == "zscore") return PercentileEstimator::ZScore;
  if (name == "svm") return PercentileEstimator::Svm;
  throw ConfigError("unknown percentile estimator '" + name + "'");
}

std::string to_string(PercentileEstimator e) {
  switch (e) {
    case PercentileEstimator::Sd: return "sd";
    case PercentileEstimator::Iqr: return "iqr";
    case PercentileEstimator::ZScore: return "zscore";
    case PercentileEstimator::Svm: return "svm";
  }
  return "sd";
}

void GlidConfig::validate() const {
  if (!(k > 0.0)) throw ParameterError("glid: k must be > 0");
  if (!(k_iqr >= 0.0)) throw ParameterError("glid: k_iqr must be >= 0");
  if (!(k_z > 0.0)) throw ParameterError("glid: k_z must be > 0");
  if (!(nu > 0.0 && nu < 1.0)) throw ParameterError("glid: nu must lie in (0, 1)");
  if (fixed_pair && !(fixed_pair->lo >= 0.0 && fixed_pair->lo < fixed_pair->hi && fixed_pair->hi <= 100.0)) {
    throw ParameterError("glid: fixed pair must satisfy 0 <= lo < hi <= 100");
  }
}

void AggregatorConfig::validate() const {
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) throw ParameterError("trim_fraction must lie in [0, 0.5)");
  if (!(faba_fraction >= 0.0 && faba_fraction < 1.0)) throw ParameterError("faba_fraction must lie in [0, 1)");
  if (!(flair_decay >= 0.0 && flair_decay < 1.0)) throw ParameterError("flair_decay must lie in [0, 1)");
  if (!(flair_c >= 0.0)) throw ParameterError("flair_c must be >= 0");
  glid.validate();
}

namespace {

std::vector<double> sorted_row(const UpdateMatrix& u, Eigen::Index d) {
  std::vector<double> v(static_cast<std::size_t>(u.cols()));
  for (Eigen::Index i = 0; i < u.cols(); ++i) v[static_cast<std::size_t>(i)] = u(d, i);
  std::sort(v.begin(), v.end());
  return v;
}

void require_nonempty(const UpdateMatrix& u, const char* who) {
  if (u.cols() == 0) throw EmptyInputError(std::string(who) + ": no updates");
}

int count_of(double fraction, Eigen::Index n) {
  return static_cast<int>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

AggregationOutcome uniform_outcome(ParamVector global, Eigen::Index n) {
  const Eigen::Index dim = global.size();
  return {std::move(global), FlagMatrix::Constant(dim, n, false),
          Eigen::MatrixXd::Constant(dim, n, 1.0 / static_cast<double>(n))};
}

// Per-BS weights replicated across dimensions; zero-weight BSs are flagged.
AggregationOutcome per_bs_outcome(ParamVector global, const Eigen::VectorXd& w) {
  const Eigen::Index dim = global.size();
  const double total = w.sum();
  AggregationOutcome out{std::move(global), FlagMatrix(dim, w.size()), Eigen::MatrixXd(dim, w.size())};
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out.flags.col(i).setConstant(w(i) <= 0.0);
    out.weights.col(i).setConstant(total > 0.0 ? w(i) / total : 0.0);
  }
  return out;
}

}  // namespace

ParamVector agg_mean(const UpdateMatrix& updates) {
  require_nonempty(updates, "mean");
  ParamVector out(updates.rows());
  const double n = static_cast<double>(updates.cols());
  for (Eigen::Index d = 0; d < updates.rows(); ++d) {
    const auto v = sorted_row(updates, d);
    out(d) = std::accumulate(v.begin(), v.end(), 0.0) / n;
  }
  return out;
}

ParamVector agg_median(const UpdateMatrix& updates) {
  require_nonempty(updates, "median");
  ParamVector out(updates.rows());
  const std::size_t n = static_cast<std::size_t>(updates.cols());
  for (Eigen::Index d = 0; d < updates.rows(); ++d) {
    const auto v = sorted_row(updates, d);
    out(d) = n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  }
  return out;
}

ParamVector agg_trimmed_mean(const UpdateMatrix& updates, double trim_fraction) {
  require_nonempty(updates, "trimmed mean");
  const int k = count_of(trim_fraction, updates.cols());
  if (trim_fraction < 0.0 || 2 * k >= updates.cols()) {
    throw ParameterError("trimmed mean: trimming " + std::to_string(k) + " per side leaves nothing of " +
                         std::to_string(updates.cols()));
  }
  ParamVector out(updates.rows());
  for (Eigen::Index d = 0; d < updates.rows(); ++d) {
    const auto v = sorted_row(updates, d);
    out(d) = std::accumulate(v.begin() + k, v.end() - k, 0.0) / static_cast<double>(v.size() - 2 * static_cast<std::size_t>(k));
  }
  return out;
}

KrumResult agg_krum(const UpdateMatrix& updates, const std::vector<int>& bs_ids, int f) {
  require_nonempty(updates, "krum");
  const Eigen::Index n = updates.cols();
  if (f < 0 || n < f + 3) {
    throw ParameterError("krum: needs at least f+3 = " + std::to_string(f + 3) + " updates, got " +
                         std::to_string(n));
  }
  const auto neighbours = static_cast<std::size_t>(n - f - 2);
  KrumResult res;
  res.scores.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dist.push_back((updates.col(i) - updates.col(j)).squaredNorm());
    }
    std::sort(dist.begin(), dist.end());
    res.scores(i) = std::accumulate(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(neighbours), 0.0);
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    const auto s = res.selected;
    if (res.scores(i) < res.scores(s) ||
        (res.scores(i) == res.scores(s) && bs_ids[static_cast<std::size_t>(i)] < bs_ids[static_cast<std::size_t>(s)])) {
      res.selected = i;
    }
  }
  res.global = updates.col(res.selected);
  return res;
}

// FABA (reading of a one-line description): drop the update farthest from the
// running mean until the configured fraction is gone, then average the rest.
FabaResult agg_faba(const UpdateMatrix& updates, const std::vector<int>& bs_ids,
                    double remove_fraction) {
  require_nonempty(updates, "faba");
  const int k = count_of(remove_fraction, updates.cols());
  if (remove_fraction < 0.0 || k >= updates.cols()) throw ParameterError("faba: would remove every update");
  std::vector<Eigen::Index> alive(static_cast<std::size_t>(updates.cols()));
  std::iota(alive.begin(), alive.end(), Eigen::Index{0});
  FabaResult res;
  auto mean_of_alive = [&] {
    UpdateMatrix sub(updates.rows(), static_cast<Eigen::Index>(alive.size()));
    for (std::size_t c = 0; c < alive.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = updates.col(alive[c]);
    return agg_mean(sub);
  };
  for (int r = 0; r < k; ++r) {
    const ParamVector centre = mean_of_alive();
    std::size_t worst = 0;
    double worst_dist = -1.0;
    for (std::size_t c = 0; c < alive.size(); ++c) {
      const double dist = (updates.col(alive[c]) - centre).norm();
      if (dist > worst_dist ||
          (dist == worst_dist && bs_ids[static_cast<std::size_t>(alive[c])] < bs_ids[static_cast<std::size_t>(alive[worst])])) {
        worst = c;
        worst_dist = dist;
      }
    }
    res.removed.push_back(alive[worst]);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  res.global = mean_of_alive();
  return res;
}

Eigen::VectorXd foolsgold_weights(const Eigen::MatrixXd& histories) {
  const Eigen::Index n = histories.cols();
  if (n == 0) throw EmptyInputError("foolsgold: no histories");
  if (n == 1) return Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd cs = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      cs(i, j) = cs(j, i) = cosine_similarity(histories.col(i), histories.col(j));
    }
  }
  const Eigen::VectorXd max_cs = cs.rowwise().maxCoeff();
  // pardoning: down-weight similarity to BSs that look more sybil-like
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && max_cs(i) < max_cs(j) && max_cs(j) > 0.0) cs(i, j) *= max_cs(i) / max_cs(j);
    }
  }
  Eigen::VectorXd wv = (1.0 - cs.rowwise().maxCoeff().array()).cwiseMax(0.0).cwiseMin(1.0).matrix();
  if (const double top = wv.maxCoeff(); top > 0.0) wv /= top;
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = wv(i) >= 1.0 ? 0.99 : wv(i);
    if (w <= 0.0) {
      wv(i) = 0.0;
      continue;
    }
    w = std::log(w / (1.0 - w)) + 0.5;
    wv(i) = std::clamp(w, 0.0, 1.0);
  }
  return wv;
}

// FLTrust (reading of a one-line description): the root-data model sets the
// direction and the norm; BSs pointing away from it get no trust.
FlTrustResult agg_fltrust(const UpdateMatrix& updates, const ParamVector& current,
                          const ParamVector& server_update) {
  require_nonempty(updates, "fltrust");
  require_same_length(current, server_update);
  if (updates.rows() != current.size()) throw DimensionError("fltrust: dimension mismatch");
  const ParamVector server_delta = server_update - current;
  const double server_norm = server_delta.norm();
  FlTrustResult res;
  res.trust = Eigen::VectorXd::Zero(updates.cols());
  ParamVector acc = ParamVector::Zero(current.size());
  for (Eigen::Index i = 0; i < updates.cols(); ++i) {
    const ParamVector delta = updates.col(i) - current;
    const double trust = std::max(0.0, cosine_similarity(delta, server_delta));
    const double norm = delta.norm();
    res.trust(i) = trust;
    if (trust > 0.0 && norm > 0.0) acc += trust * (server_norm / norm) * delta;
  }
  const double total = res.trust.sum();
  res.global = total > 0.0 ? ParamVector(current + acc / total) : ParamVector(current + server_delta);
  require_finite(res.global, "fltrust");
  return res;
}

Eigen::VectorXd flair_flip_scores(const UpdateMatrix& updates, const ParamVector& current,
                                  const ParamVector* previous) {
  Eigen::VectorXd flips = Eigen::VectorXd::Zero(updates.cols());
  if (previous == nullptr || updates.rows() == 0) return flips;
  const Eigen::ArrayXd trajectory = (current - *previous).array().sign();
  for (Eigen::Index i = 0; i < updates.cols(); ++i) {
    const Eigen::ArrayXd moved = (updates.col(i) - current).array().sign();
    flips(i) = static_cast<double>(((moved * trajectory) < 0.0).count()) / static_cast<double>(updates.rows());
  }
  return flips;
}

ParamVector weighted_mean(const UpdateMatrix& updates, const Eigen::VectorXd& weights) {
  require_nonempty(updates, "weighted mean");
  if (weights.size() != updates.cols()) throw DimensionError("weighted mean: one weight per update required");
  const double total = weights.sum();
  if (!(total > 0.0)) throw NumericError("weighted mean: weights sum to zero");
  return updates * weights / total;
}

namespace {

class StatelessAggregator final : public Aggregator {
 public:
  StatelessAggregator(AggregatorConfig cfg, int krum_f) : cfg_(std::move(cfg)), krum_f_(krum_f) {}

  AggregatorKind kind() const override { return cfg_.kind; }
  bool needs_server_update() const override { return cfg_.kind == AggregatorKind::FlTrust; }

  AggregationOutcome aggregate(const PresentedUpdates& u, const AggregatorContext& ctx) override {
    const Eigen::Index n = u.count();
    if (n == 0) throw EmptyInputError(to_string(cfg_.kind) + ": no updates");
    switch (cfg_.kind) {
      case AggregatorKind::Mean: return uniform_outcome(agg_mean(u.params), n);
      case AggregatorKind::Median: {
        AggregationOutcome out = uniform_outcome(agg_median(u.params), n);
        out.weights.setZero();
        for (Eigen::Index d = 0; d < u.dim(); ++d) {
          std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
          std::iota(order.begin(), order.end(), Eigen::Index{0});
          std::stable_sort(order.begin(), order.end(),
                           [&](Eigen::Index a, Eigen::Index b) { return u.params(d, a) < u.params(d, b); });
          const auto half = static_cast<std::size_t>(n / 2);
          if (n % 2 == 1) {
            out.weights(d, order[half]) = 1.0;
          } else {
            out.weights(d, order[half - 1]) += 0.5;
            out.weights(d, order[half]) += 0.5;
          }
        }
        return out;
      }
      case AggregatorKind::Trim: {
        AggregationOutcome out = uniform_outcome(agg_trimmed_mean(u.params, cfg_.trim_fraction), n);
        const int k = count_of(cfg_.trim_fraction, n);
        for (Eigen::Index d = 0; d < u.dim(); ++d) {
          std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
          std::iota(order.begin(), order.end(), Eigen::Index{0});
          std::stable_sort(order.begin(), order.end(),
                           [&](Eigen::Index a, Eigen::Index b) { return u.params(d, a) < u.params(d, b); });
          for (std::size_t r = 0; r < order.size(); ++r) {
            const bool trimmed = r < static_cast<std::size_t>(k) || r >= order.size() - static_cast<std::size_t>(k);
            out.flags(d, order[r]) = trimmed;
            out.weights(d, order[r]) = trimmed ? 0.0 : 1.0 / static_cast<double>(n - 2 * k);
          }
        }
        return out;
      }
      case AggregatorKind::Krum: {
        const auto res = agg_krum(u.params, u.bs_ids, krum_f_);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
        w(res.selected) = 1.0;
        return per_bs_outcome(res.global, w);
      }
      case AggregatorKind::Faba: {
        const auto res = agg_faba(u.params, u.bs_ids, cfg_.faba_fraction);
        Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
        for (auto r : res.removed) w(r) = 0.0;
        return per_bs_outcome(res.global, w);
      }
      case AggregatorKind::FlTrust: {
        if (!ctx.current || !ctx.server_update) throw ConfigError("fltrust: needs theta^t and a server update");
        const auto res = agg_fltrust(u.params, *ctx.current, *ctx.server_update);
        if (res.trust.sum() <= 0.0) {
          // No BS trusted: the server update alone moves the model.
          return {res.global, FlagMatrix::Constant(u.dim(), n, true), Eigen::MatrixXd::Zero(u.dim(), n)};
        }
        return per_bs_outcome(res.global, res.trust);
      }
      case AggregatorKind::Glid: return agg_glid(u.params, cfg_.glid);
      default: break;
    }
    throw ConfigError("aggregator " + to_string(cfg_.kind) + " is stateful");
  }

 private:
  AggregatorConfig cfg_;
  int krum_f_;
};

// FoolsGold (reading of a one-line description): cumulative per-BS deltas
// relative to theta^t drive the similarity weights.
class FoolsGoldAggregator final : public Aggregator {
 public:
  AggregatorKind kind() const override { return AggregatorKind::FoolsGold; }

  AggregationOutcome aggregate(const PresentedUpdates& u, const AggregatorContext& ctx) override {
    if (!ctx.current) throw ConfigError("foolsgold: needs theta^t");
    const Eigen::Index n = u.count();
    if (n == 0) throw EmptyInputError("foolsgold: no updates");
    Eigen::MatrixXd hist(u.dim(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [it, fresh] = history_.try_emplace(u.bs_ids[static_cast<std::size_t>(i)], ParamVector::Zero(u.dim()));
      it->second += u.params.col(i) - *ctx.current;
      hist.col(i) = it->second;
    }
    Eigen::VectorXd w = foolsgold_weights(hist);
    if (w.sum() <= 0.0) w.setOnes();  // everyone looks like a sybil: plain mean
    return per_bs_outcome(weighted_mean(u.params, w), w);
  }

 private:
  std::map<int, ParamVector> history_;
};

// FLAIR (reading of a one-line description): flip score against the last
// global step, exponentially smoothed suspicion, weight exp(-c * suspicion).
class FlairAggregator final : public Aggregator {
 public:
  FlairAggregator(double decay, double c) : decay_(decay), c_(c) {}
  AggregatorKind kind() const override { return AggregatorKind::Flair; }

  AggregationOutcome aggregate(const PresentedUpdates& u, const AggregatorContext& ctx) override {
    if (!ctx.current) throw ConfigError("flair: needs theta^t");
    const Eigen::VectorXd flips = flair_flip_scores(u.params, *ctx.current, ctx.previous);
    Eigen::VectorXd w(u.count());
    for (Eigen::Index i = 0; i < u.count(); ++i) {
      double& s = suspicion_[u.bs_ids[static_cast<std::size_t>(i)]];
      s = decay_ * s + (1.0 - decay_) * flips(i);
      w(i) = std::exp(-c_ * s);
    }
    return per_bs_outcome(weighted_mean(u.params, w), w);
  }

 private:
  double decay_;
  double c_;
  std::map<int, double> suspicion_;
};

}  // namespace

std::unique_ptr<Aggregator> make_aggregator(const AggregatorConfig& cfg, int adversary_count) {
  cfg.validate();
  switch (cfg.kind) {
    case AggregatorKind::FoolsGold: return std::make_unique<FoolsGoldAggregator>();
    case AggregatorKind::Flair: return std::make_unique<FlairAggregator>(cfg.flair_decay, cfg.flair_c);
    default: return std::make_unique<StatelessAggregator>(cfg, cfg.krum_f >= 0 ? cfg.krum_f : adversary_count);
  }
}

AggregationOutcome aggregate(const AggregatorConfig& cfg, const PresentedUpdates& updates,
                             const AggregatorContext& ctx, int adversary_count) {
  return make_aggregator(cfg, adversary_count)->aggregate(updates, ctx);
}

bool outcome_invariants_hold(const AggregationOutcome& o) {
  for (Eigen::Index d = 0; d < o.weights.rows(); ++d) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < o.weights.cols(); ++i) {
      if (o.weights(d, i) < 0.0) return false;
      if (o.flags(d, i) && o.weights(d, i) != 0.0) return false;
      total += o.weights(d, i);
    }
    if (!(total > 0.0)) return false;
  }
  return true;
}

}  // namespace wtpfl

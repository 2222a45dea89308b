#include "wtpfl/attacks.hpp"

#include <cmath>

#include "wtpfl/errors.hpp"
#include "wtpfl/rng.hpp"

namespace wtpfl {

AttackKind attack_from_string(const std::string& name) {
  if (name == "none" || name == "no") return AttackKind::None;
  if (name == "trim") return AttackKind::Trim;
  if (name == "history") return AttackKind::History;
  if (name == "random") return AttackKind::Random;
  if (name == "mpaf") return AttackKind::Mpaf;
  if (name == "zheng") return AttackKind::Zheng;
  if (name == "fti") return AttackKind::Fti;
  throw ConfigError("unknown attack '" + name + "'");
}

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Trim: return "trim";
    case AttackKind::History: return "history";
    case AttackKind::Random: return "random";
    case AttackKind::Mpaf: return "mpaf";
    case AttackKind::Zheng: return "zheng";
    case AttackKind::Fti: return "fti";
  }
  return "none";
}

std::string attack_label(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "NO";
    case AttackKind::Trim: return "Trim";
    case AttackKind::History: return "History";
    case AttackKind::Random: return "Random";
    case AttackKind::Mpaf: return "MPAF";
    case AttackKind::Zheng: return "Zheng";
    case AttackKind::Fti: return "FTI";
  }
  return "NO";
}

ThreatModel threat_model_of(AttackKind k) {
  switch (k) {
    case AttackKind::None: return ThreatModel::None;
    case AttackKind::Fti:
    case AttackKind::Mpaf: return ThreatModel::FakeClients;
    default: return ThreatModel::CompromisedClients;
  }
}

const ParamVector& GlobalView::lagged(int lag) const {
  const int idx = static_cast<int>(history.size()) - 1 - lag;
  return idx >= 0 ? history[static_cast<std::size_t>(idx)] : initial;
}

void BaselineAttackConfig::validate() const {
  if (scaling_factor == 0.0 || !std::isfinite(scaling_factor)) {
    throw ParameterError("attack: scaling_factor must be finite and non-zero");
  }
  if (!(gaussian_std >= 0.0)) throw ParameterError("attack: gaussian_std must be >= 0");
  if (history_lag < 1) throw ParameterError("attack: history_lag must be >= 1");
  if (!(trim_spread >= 0.0)) throw ParameterError("attack: trim_spread must be >= 0");
  if (!(trim_jitter >= 0.0)) throw ParameterError("attack: trim_jitter must be >= 0");
}

FtiResult fti_craft(const ParamVector& global, const FtiConfig& cfg) {
  if (cfg.base_model.size() == 0) throw ConfigError("fti: base model missing");
  require_same_length(cfg.base_model, global);
  if (!(cfg.eta0 >= 0.0)) throw ParameterError("fti: eta0 must be >= 0");
  if (cfg.refinements < 0) throw ParameterError("fti: refinements must be >= 0");

  FtiResult out;
  double eta = cfg.eta0;
  double step = eta;
  double prev_dist = -1.0;
  out.fake = affine_combine(eta, cfg.base_model, 1.0 - eta, global);
  out.eta_applied = eta;
  for (int r = 0; r < cfg.refinements; ++r) {
    out.fake = affine_combine(eta, cfg.base_model, 1.0 - eta, global);
    out.eta_applied = eta;
    const double dist = l2_distance(out.fake, global);
    if (prev_dist < dist) {
      eta += step / 2.0;
    } else {
      eta -= step / 2.0;
    }
    step /= 2.0;
    prev_dist = dist;
    out.trace.push_back({out.eta_applied, dist, step});
  }
  out.eta_final = eta;
  return out;
}

UpdateMatrix trim_attack(const UpdateMatrix& known_updates, const ParamVector& global,
                         const BaselineAttackConfig& cfg, int count, std::uint64_t seed) {
  if (known_updates.cols() == 0) throw EmptyInputError("trim_attack: no compromised updates");
  if (known_updates.rows() != global.size()) throw DimensionError("trim_attack: dimension mismatch");
  const Eigen::Index dim = global.size();
  ParamVector target(dim);
  ParamVector push(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const auto row = known_updates.row(d);
    const double direction = row.mean() - global(d);
    if (direction >= 0.0) {
      const double lo = row.minCoeff();
      push(d) = std::abs(lo) * cfg.trim_spread;
      target(d) = lo - push(d);
    } else {
      const double hi = row.maxCoeff();
      push(d) = std::abs(hi) * cfg.trim_spread;
      target(d) = hi + push(d);
    }
  }
  UpdateMatrix out(dim, count);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, {0x5452494dULL, static_cast<std::uint64_t>(i)}));
    for (Eigen::Index d = 0; d < dim; ++d) {
      out(d, i) = target(d) + cfg.trim_jitter * push(d) * unit(rng);
    }
  }
  require_finite(out, "trim_attack");
  return out;
}

ParamVector history_attack(const GlobalView& view, const BaselineAttackConfig& cfg) {
  const ParamVector& past = view.lagged(cfg.history_lag);
  return affine_combine(1.0 - cfg.scaling_factor, view.current, cfg.scaling_factor, past);
}

ParamVector random_attack(Eigen::Index dim, const BaselineAttackConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ParamVector v(dim);
  const double scale = cfg.scaling_factor * cfg.gaussian_std;
  for (Eigen::Index d = 0; d < dim; ++d) v(d) = scale * gauss(rng);
  require_finite(v, "random_attack");
  return v;
}

ParamVector mpaf_attack(const ParamVector& initial, const ParamVector& current,
                        const BaselineAttackConfig& cfg) {
  return affine_combine(1.0 - cfg.scaling_factor, current, cfg.scaling_factor, initial);
}

UpdateMatrix zheng_attack(const CompromisedView& compromised, const ParamVector& current,
                          const ParamVector* previous, const BaselineAttackConfig& cfg) {
  const auto count = static_cast<Eigen::Index>(compromised.datasets.size());
  if (compromised.train_cfgs.size() != compromised.datasets.size()) {
    throw DimensionError("zheng_attack: one train config per compromised cell required");
  }
  const ParamVector drift =
      previous ? ParamVector(current - *previous) : ParamVector(ParamVector::Zero(current.size()));
  UpdateMatrix out(current.size(), count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const ParamVector tuned =
        local_train(compromised.arch, current, *compromised.datasets[k], compromised.train_cfgs[k]);
    out.col(i) = current - cfg.zheng_scale * ((tuned - current) + drift);
  }
  require_finite(out, "zheng_attack");
  return out;
}

}  // namespace wtpfl

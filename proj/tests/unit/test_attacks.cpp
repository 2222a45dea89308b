#include <gtest/gtest.h>

#include <cmath>
#include <type_traits>

#include "wtpfl/errors.hpp"
#include "wtpfl/attacks.hpp"

using namespace wtpfl;

namespace {

ParamVector scalar(double x) { return ParamVector::Constant(1, x); }

ParamVector vec(std::initializer_list<double> xs) {
  ParamVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Line-by-line transcription of the reference algorithm, kept separate from
// the library implementation on purpose.
struct RefTrace {
  std::vector<double> etas;
  std::vector<double> dists;
  std::vector<double> steps;
  double eta_final;
  ParamVector fake;
};

RefTrace reference_fti(const ParamVector& base, const ParamVector& global, double eta, int R) {
  RefTrace t;
  double step = eta;
  double pre = -1;
  ParamVector theta_i = eta * base - (eta - 1) * global;
  for (int r = 0; r < R; ++r) {
    theta_i = eta * base - (eta - 1) * global;
    t.etas.push_back(eta);
    const double dist = (theta_i - global).norm();
    t.dists.push_back(dist);
    if (pre < dist)
      eta = eta + step / 2;
    else
      eta = eta - step / 2;
    step = step / 2;
    t.steps.push_back(step);
    pre = dist;
  }
  t.eta_final = eta;
  t.fake = theta_i;
  return t;
}

}  // namespace

TEST(Fti, OneRefinementByHand) {
  const auto r = fti_craft(vec({0, 0}), FtiConfig{vec({1, 2}), 10.0, 1});
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].eta, 10.0);
  EXPECT_EQ(r.trace[0].step, 5.0);
  EXPECT_EQ(r.eta_final, 15.0);
  EXPECT_EQ(r.fake, vec({10, 20}));
}

TEST(Fti, MatchesReferenceTrace) {
  const ParamVector global = vec({0.3, -1.2, 0.8, 0.05});
  const ParamVector base = ParamVector::Zero(4);
  const auto r = fti_craft(global, FtiConfig{base, 10.0, 5});
  const auto ref = reference_fti(base, global, 10.0, 5);
  ASSERT_EQ(r.trace.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(r.trace[i].eta, ref.etas[i]);
    EXPECT_DOUBLE_EQ(r.trace[i].dist, ref.dists[i]);
    EXPECT_EQ(r.trace[i].step, ref.steps[i]);
  }
  EXPECT_EQ(r.eta_final, ref.eta_final);
  EXPECT_TRUE(r.fake.isApprox(ref.fake, 1e-15));
  // frozen values of the same trace
  const std::vector<double> etas{10, 15, 17.5, 18.75, 19.375};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.trace[i].eta, etas[i]);
  EXPECT_EQ(r.eta_final, 19.6875);
  EXPECT_EQ(r.eta_applied, 19.375);
}

TEST(Fti, StepHalvesExactly) {
  for (int R = 0; R <= 40; ++R) {
    const auto r = fti_craft(vec({1, 2}), FtiConfig{vec({0, 0}), 10.0, R});
    for (int i = 0; i < R; ++i)
      EXPECT_EQ(r.trace[static_cast<std::size_t>(i)].step, std::ldexp(10.0, -(i + 1)));
    EXPECT_LT(std::abs(r.eta_final - 10.0), 10.0);
  }
}

TEST(Fti, BaseEqualToGlobalIsFixedPoint) {
  const ParamVector g = vec({0.4, -0.7});
  const auto r = fti_craft(g, FtiConfig{g, 10.0, 5});
  for (const auto& e : r.trace) EXPECT_LT(e.dist, 1e-14);
  EXPECT_TRUE(r.fake.isApprox(g, 1e-14));
}

TEST(Fti, EtaOneReturnsBaseEtaZeroReturnsGlobal) {
  const ParamVector g = vec({0.4, -0.7});
  const ParamVector base = vec({2.0, 3.0});
  EXPECT_EQ(fti_craft(g, FtiConfig{base, 1.0, 0}).fake, base);
  EXPECT_EQ(fti_craft(g, FtiConfig{base, 0.0, 0}).fake, g);
}

TEST(Fti, Errors) {
  EXPECT_THROW(fti_craft(vec({1}), FtiConfig{ParamVector{}, 10.0, 5}), ConfigError);
  EXPECT_THROW(fti_craft(vec({1}), FtiConfig{vec({1, 2}), 10.0, 5}), DimensionError);
  EXPECT_THROW(fti_craft(vec({1}), FtiConfig{vec({1}), -1.0, 5}), ParameterError);
}

TEST(TrimAttack, TiesCountAsUpward) {
  UpdateMatrix known(1, 2);
  known << 0.5, 0.5;
  const auto out = trim_attack(known, scalar(0.5), BaselineAttackConfig{}, 3, 1);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_LT(out(0, i), 0.5);
}

TEST(TrimAttack, PlacedBelowMinimumWhenBenignMoveUp) {
  UpdateMatrix known(1, 2);
  known << 1, 3;
  const auto out = trim_attack(known, scalar(0), BaselineAttackConfig{}, 4, 2);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_LT(out(0, i), 1.0);
}

TEST(TrimAttack, SingleBsOpposesOwnMovement) {
  UpdateMatrix known(2, 1);
  known << 2.0, -1.0;
  const ParamVector g = vec({1.0, 0.0});
  const auto out = trim_attack(known, g, BaselineAttackConfig{}, 1, 3);
  EXPECT_LT(out(0, 0), 2.0);   // moved up, pushed below itself
  EXPECT_GT(out(1, 0), -1.0);  // moved down, pushed above itself
}

TEST(TrimAttack, SeededJitter) {
  UpdateMatrix known = UpdateMatrix::Random(3, 4);
  const ParamVector g = ParamVector::Zero(3);
  const auto a = trim_attack(known, g, BaselineAttackConfig{}, 5, 9);
  EXPECT_EQ(a, trim_attack(known, g, BaselineAttackConfig{}, 5, 9));
  EXPECT_NE(a.col(0), a.col(1));
  EXPECT_TRUE(a.allFinite());
}

TEST(HistoryAttack, Examples) {
  const std::vector<ParamVector> hist{scalar(0.0), scalar(1.0)};
  const GlobalView view{1, hist[0], hist[1], hist};
  BaselineAttackConfig cfg;
  cfg.scaling_factor = 1.0;
  EXPECT_EQ(history_attack(view, cfg), scalar(0.0));
  cfg.scaling_factor = 1000.0;
  EXPECT_EQ(history_attack(view, cfg), scalar(-999.0));

  const std::vector<ParamVector> flat{scalar(2.0), scalar(2.0)};
  const GlobalView still{1, flat[0], flat[1], flat};
  EXPECT_EQ(history_attack(still, cfg), scalar(2.0));
}

TEST(HistoryAttack, UsesInitialModelBeforeLagIsAvailable) {
  const std::vector<ParamVector> hist{scalar(0.5)};
  const GlobalView view{0, hist[0], hist[0], hist};
  BaselineAttackConfig cfg;
  cfg.history_lag = 3;
  EXPECT_EQ(history_attack(view, cfg), scalar(0.5));
}

TEST(RandomAttack, ZeroStdGivesZero) {
  BaselineAttackConfig cfg;
  cfg.gaussian_std = 0.0;
  EXPECT_EQ(random_attack(5, cfg, 1), ParamVector::Zero(5));
}

TEST(RandomAttack, Reproducible) {
  BaselineAttackConfig cfg;
  EXPECT_EQ(random_attack(8, cfg, 4), random_attack(8, cfg, 4));
  EXPECT_NE(random_attack(8, cfg, 4), random_attack(8, cfg, 5));
}

TEST(RandomAttack, EmpiricalSpread) {
  BaselineAttackConfig cfg;
  cfg.gaussian_std = 0.5;
  const auto v = random_attack(100000, cfg, 12);
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().mean());
  EXPECT_NEAR(sd, 1000.0 * 0.5, 0.02 * 500.0);
}

TEST(MpafAttack, Examples) {
  BaselineAttackConfig cfg;
  EXPECT_EQ(mpaf_attack(scalar(3.0), scalar(3.0), cfg), scalar(3.0));
  EXPECT_EQ(mpaf_attack(scalar(0.0), scalar(2.0), cfg), scalar(-1998.0));
  cfg.scaling_factor = 1.0;
  EXPECT_EQ(mpaf_attack(vec({1, 2}), vec({5, 7}), cfg), vec({1, 2}));
}

TEST(ZhengAttack, ScalarArithmetic) {
  // Linear model w*x + b on one sample x=1, target 1.2, from w=1, b=0:
  // one SGD step with lr 0.5 moves each parameter by +0.2.
  const ModelArch arch{1, {}, Activation::Identity};
  WindowedDataset ds;
  ds.inputs = Eigen::MatrixXd::Ones(1, 1);
  ds.targets = Eigen::VectorXd::Constant(1, 1.2);
  ds.target_index = {1};
  const ParamVector current = vec({1.0, 0.0});
  const ParamVector previous = vec({0.5, 0.0});
  CompromisedView view{arch, {&ds}, {TrainConfig{0.5, 64, 1, 0}}, {}};
  BaselineAttackConfig cfg;
  cfg.zheng_scale = 1.0;
  const auto out = zheng_attack(view, current, &previous, cfg);
  EXPECT_NEAR(out(0, 0), 1.0 - (0.2 + 0.5), 1e-12);
  EXPECT_NEAR(out(1, 0), 0.0 - (0.2 + 0.0), 1e-12);
}

TEST(ZhengAttack, DegenerateCases) {
  const ModelArch arch{1, {}, Activation::Identity};
  WindowedDataset ds;
  ds.inputs = Eigen::MatrixXd::Ones(3, 1);
  ds.targets = Eigen::VectorXd::Constant(3, 2.0);
  ds.target_index = {1, 2, 3};
  const ParamVector current = vec({0.3, -0.1});
  BaselineAttackConfig cfg;
  cfg.zheng_scale = 0.0;
  CompromisedView view{arch, {&ds}, {TrainConfig{0.1, 64, 1, 0}}, {}};
  EXPECT_EQ(zheng_attack(view, current, nullptr, cfg).col(0), current);
  cfg.zheng_scale = 1.0;
  CompromisedView frozen{arch, {&ds}, {TrainConfig{0.0, 64, 1, 0}}, {}};
  EXPECT_EQ(zheng_attack(frozen, current, nullptr, cfg).col(0), current);
}

TEST(Attacks, KnowledgeIsLimitedByType) {
  // Global-only attacks cannot be handed benign updates or data.
  static_assert(std::is_same_v<decltype(&fti_craft), FtiResult (*)(const ParamVector&, const FtiConfig&)>);
  static_assert(std::is_same_v<decltype(&history_attack),
                               ParamVector (*)(const GlobalView&, const BaselineAttackConfig&)>);
  static_assert(std::is_same_v<decltype(&mpaf_attack),
                               ParamVector (*)(const ParamVector&, const ParamVector&,
                                               const BaselineAttackConfig&)>);
  static_assert(std::is_same_v<decltype(&random_attack),
                               ParamVector (*)(Eigen::Index, const BaselineAttackConfig&, std::uint64_t)>);
  SUCCEED();
}

TEST(Attacks, NamesAndThreatModels) {
  for (auto k : {AttackKind::None, AttackKind::Trim, AttackKind::History, AttackKind::Random, AttackKind::Mpaf,
                 AttackKind::Zheng, AttackKind::Fti})
    EXPECT_EQ(attack_from_string(to_string(k)), k);
  EXPECT_THROW(attack_from_string("lie"), ConfigError);
  EXPECT_EQ(threat_model_of(AttackKind::Fti), ThreatModel::FakeClients);
  EXPECT_EQ(threat_model_of(AttackKind::Trim), ThreatModel::CompromisedClients);
  EXPECT_EQ(attack_label(AttackKind::Mpaf), "MPAF");
}

TEST(BaselineAttackConfig, Validation) {
  BaselineAttackConfig cfg;
  cfg.scaling_factor = 0.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.history_lag = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

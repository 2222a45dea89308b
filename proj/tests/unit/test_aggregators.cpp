#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "wtpfl/errors.hpp"
#include "wtpfl/aggregators.hpp"

using namespace wtpfl;

namespace {

UpdateMatrix row(std::initializer_list<double> xs) {
  UpdateMatrix m(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) m(0, i++) = x;
  return m;
}

std::vector<int> ids(Eigen::Index n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

PresentedUpdates present(UpdateMatrix m) {
  PresentedUpdates p;
  p.bs_ids = ids(m.cols());
  p.params = std::move(m);
  return p;
}

UpdateMatrix random_updates(std::mt19937_64& rng, Eigen::Index dim, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 2.0);
  UpdateMatrix m(dim, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < dim; ++d) m(d, i) = g(rng);
  return m;
}

UpdateMatrix permuted(const UpdateMatrix& m, std::mt19937_64& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  UpdateMatrix out(m.rows(), m.cols());
  for (std::size_t c = 0; c < order.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = m.col(order[c]);
  return out;
}

}  // namespace

TEST(Mean, Examples) {
  EXPECT_EQ(agg_mean(row({1, 3}))(0), 2.0);
  EXPECT_EQ(agg_mean(row({4.5}))(0), 4.5);
  EXPECT_THROW(agg_mean(UpdateMatrix(2, 0)), EmptyInputError);
}

TEST(Mean, MatchesPerDimensionOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_updates(rng, 5, 1 + trial % 30);
    const auto out = agg_mean(m);
    for (Eigen::Index d = 0; d < m.rows(); ++d) {
      double s = 0;
      for (Eigen::Index i = 0; i < m.cols(); ++i) s += m(d, i);
      EXPECT_NEAR(out(d), s / static_cast<double>(m.cols()), 1e-12);
    }
  }
}

TEST(Median, Examples) {
  EXPECT_EQ(agg_median(row({1, 2, 9}))(0), 2.0);
  EXPECT_EQ(agg_median(row({1, 3}))(0), 2.0);
}

TEST(Median, MatchesSortOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_updates(rng, 3, 1 + trial % 25);
    const auto out = agg_median(m);
    for (Eigen::Index d = 0; d < m.rows(); ++d) {
      std::vector<double> v(m.row(d).begin(), m.row(d).end());
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      EXPECT_EQ(out(d), n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2);
    }
  }
}

TEST(TrimmedMean, Examples) {
  EXPECT_EQ(agg_trimmed_mean(row({0, 1, 2, 3, 100}), 0.2)(0), 2.0);
  const auto m = row({0.5, 2.5, -1.0});
  EXPECT_EQ(agg_trimmed_mean(m, 0.0), agg_mean(m));
  for (double beta : {0.0, 0.1, 0.2, 0.3, 0.45}) EXPECT_EQ(agg_trimmed_mean(row({7, 7, 7, 7, 7, 7}), beta)(0), 7.0);
  EXPECT_THROW(agg_trimmed_mean(row({1, 2}), 0.5), ParameterError);
}

TEST(Krum, OutlierNeverSelected) {
  UpdateMatrix m(2, 5);
  m << 0.0, 0.1, -0.1, 0.05, 50.0,
       0.0, 0.1, 0.05, -0.1, 50.0;
  const auto r = agg_krum(m, ids(5), 1);
  EXPECT_NE(r.selected, 4);
  // brute force: the member with the smallest sum over its n-f-2 = 2 nearest
  Eigen::Index best = 0;
  double best_score = 1e300;
  for (Eigen::Index i = 0; i < 5; ++i) {
    std::vector<double> d;
    for (Eigen::Index j = 0; j < 5; ++j)
      if (j != i) d.push_back((m.col(i) - m.col(j)).squaredNorm());
    std::sort(d.begin(), d.end());
    if (d[0] + d[1] < best_score) {
      best_score = d[0] + d[1];
      best = i;
    }
  }
  EXPECT_EQ(r.selected, best);
  EXPECT_EQ(r.global, m.col(best));
}

TEST(Krum, IdenticalUpdatesPickLowestBsId) {
  UpdateMatrix m = UpdateMatrix::Constant(3, 4, 0.25);
  const auto r = agg_krum(m, {7, 3, 9, 5}, 1);
  EXPECT_EQ(r.selected, 1);
  EXPECT_EQ(r.global, ParamVector::Constant(3, 0.25));
}

TEST(Krum, BoundaryOnUpdateCount) {
  UpdateMatrix m = UpdateMatrix::Random(2, 5);
  EXPECT_NO_THROW(agg_krum(m, ids(5), 2));
  EXPECT_THROW(agg_krum(m, ids(5), 3), ParameterError);
}

TEST(FoolsGold, IdenticalSybilsGetZero) {
  Eigen::MatrixXd h(3, 2);
  h << 1, 1, 2, 2, -1, -1;
  const auto w = foolsgold_weights(h);
  EXPECT_EQ(w(0), 0.0);
  EXPECT_EQ(w(1), 0.0);
}

TEST(FoolsGold, OrthogonalHistoriesShareWeight) {
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(4, 4) * 3.0;
  const auto w = foolsgold_weights(h);
  for (Eigen::Index i = 1; i < 4; ++i) EXPECT_EQ(w(i), w(0));
  EXPECT_GT(w(0), 0.0);
}

TEST(FoolsGold, SingleBsPassesThrough) {
  AggregatorConfig cfg;
  cfg.kind = AggregatorKind::FoolsGold;
  auto agg = make_aggregator(cfg, 0);
  const ParamVector current = ParamVector::Zero(2);
  UpdateMatrix m(2, 1);
  m << 0.3, -0.4;
  const auto out = agg->aggregate(present(m), AggregatorContext{0, &current, nullptr, nullptr});
  EXPECT_EQ(out.global, m.col(0));
  EXPECT_EQ(out.weights(0, 0), 1.0);
}

TEST(FoolsGold, SybilsDownWeightedAgainstHonestSpread) {
  AggregatorConfig cfg;
  cfg.kind = AggregatorKind::FoolsGold;
  auto agg = make_aggregator(cfg, 0);
  const ParamVector current = ParamVector::Zero(3);
  UpdateMatrix m(3, 5);
  m << 1, 0, 0, 5, 5,
       0, 1, 0, 5, 5,
       0, 0, 1, 5, 5;
  const auto out = agg->aggregate(present(m), AggregatorContext{0, &current, nullptr, nullptr});
  EXPECT_TRUE(out.flags(0, 3));
  EXPECT_TRUE(out.flags(0, 4));
  EXPECT_FALSE(out.flags(0, 0));
  EXPECT_TRUE(outcome_invariants_hold(out));
}

TEST(Faba, ZeroFractionIsMean) {
  const auto m = row({1, 2, 6});
  EXPECT_EQ(agg_faba(m, ids(3), 0.0).global, agg_mean(m));
}

TEST(Faba, RemovesFarPoint) {
  const auto r = agg_faba(row({0, 0, 0, 0, 100}), ids(5), 0.2);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0], 4);
  EXPECT_EQ(r.global(0), 0.0);
}

TEST(Faba, DistanceTiesRemoveLowestBsId) {
  const auto r = agg_faba(row({-1, 1, 0, 0}), {5, 2, 8, 9}, 0.25);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0], 1);  // bs 2 beats bs 5
}

TEST(FlTrust, TrustFromCosine) {
  const ParamVector current = ParamVector::Zero(2);
  ParamVector server(2);
  server << 1, 1;
  UpdateMatrix m(2, 2);
  m << 2, -1,
       2, -1;
  const auto r = agg_fltrust(m, current, server);
  EXPECT_NEAR(r.trust(0), 1.0, 1e-15);
  EXPECT_EQ(r.trust(1), 0.0);
}

TEST(FlTrust, SingleTrustedEqualNormPassesThrough) {
  ParamVector current(2);
  current << 0.5, 0.5;
  ParamVector server(2);
  server << 1.5, 0.5;
  UpdateMatrix m(2, 1);
  m << 1.5, 0.5;
  const auto r = agg_fltrust(m, current, server);
  EXPECT_TRUE(r.global.isApprox(m.col(0), 1e-15));
}

TEST(FlTrust, NoTrustFallsBackToServerStep) {
  AggregatorConfig cfg;
  cfg.kind = AggregatorKind::FlTrust;
  auto agg = make_aggregator(cfg, 0);
  EXPECT_TRUE(agg->needs_server_update());
  const ParamVector current = ParamVector::Zero(1);
  const ParamVector server = ParamVector::Constant(1, 0.1);
  const auto out = agg->aggregate(present(row({-1, -2})), AggregatorContext{0, &current, nullptr, &server});
  EXPECT_EQ(out.global(0), 0.1);
  EXPECT_TRUE(out.flags.all());
  EXPECT_THROW(agg->aggregate(present(row({1})), AggregatorContext{0, &current, nullptr, nullptr}), ConfigError);
}

TEST(Flair, FirstRoundIsMean) {
  AggregatorConfig cfg;
  cfg.kind = AggregatorKind::Flair;
  auto agg = make_aggregator(cfg, 0);
  const ParamVector current = ParamVector::Zero(1);
  const auto m = row({1, 2, 6});
  const auto out = agg->aggregate(present(m), AggregatorContext{0, &current, nullptr, nullptr});
  EXPECT_NEAR(out.global(0), agg_mean(m)(0), 1e-15);
}

TEST(Flair, PersistentFlipperDecaysTowardFloor) {
  AggregatorConfig cfg;
  cfg.kind = AggregatorKind::Flair;
  auto agg = make_aggregator(cfg, 0);
  ParamVector previous = ParamVector::Zero(2);
  ParamVector current = ParamVector::Constant(2, 0.1);
  AggregationOutcome out;
  for (int t = 0; t < 200; ++t) {
    UpdateMatrix m(2, 2);
    m.col(0) = current.array() + 0.1;  // follows the trajectory
    m.col(1) = current.array() - 0.1;  // always opposes it
    out = agg->aggregate(present(m), AggregatorContext{t, &current, &previous, nullptr});
    previous = current;
    current = current.array() + 0.1;  // trajectory keeps moving up
  }
  const double ratio = out.weights(0, 1) / out.weights(0, 0);
  EXPECT_NEAR(ratio, std::exp(-5.0), 1e-6);
  const ParamVector below = ParamVector::Constant(2, -1.0);
  EXPECT_EQ(flair_flip_scores(UpdateMatrix::Constant(2, 1, -1.0), ParamVector::Zero(2), &below)(0), 1.0);
}

TEST(Flair, IdenticalUpdatesGiveCommonValue) {
  AggregatorConfig cfg;
  cfg.kind = AggregatorKind::Flair;
  auto agg = make_aggregator(cfg, 0);
  const ParamVector current = ParamVector::Zero(1);
  const ParamVector previous = ParamVector::Constant(1, -1.0);
  const auto out = agg->aggregate(present(row({0.3, 0.3, 0.3})), AggregatorContext{1, &current, &previous, nullptr});
  EXPECT_DOUBLE_EQ(out.global(0), 0.3);
  EXPECT_EQ(out.weights(0, 0), out.weights(0, 2));
}

TEST(Aggregators, UnanimityForEveryRule) {
  const ParamVector u = (ParamVector(3) << 0.2, -1.5, 3.0).finished();
  UpdateMatrix m(3, 3);
  m << u, u, u;
  const ParamVector current = ParamVector::Zero(3);
  const ParamVector server = u;
  for (auto kind : {AggregatorKind::Mean, AggregatorKind::Median, AggregatorKind::Trim, AggregatorKind::Krum,
                    AggregatorKind::FoolsGold, AggregatorKind::Faba, AggregatorKind::FlTrust,
                    AggregatorKind::Flair, AggregatorKind::Glid}) {
    AggregatorConfig cfg;
    cfg.kind = kind;
    cfg.trim_fraction = 0.2;
    auto agg = make_aggregator(cfg, 0);
    const auto out = agg->aggregate(present(m), AggregatorContext{0, &current, nullptr, &server});
    EXPECT_TRUE(out.global.isApprox(u, 1e-14)) << to_string(kind);
    EXPECT_TRUE(outcome_invariants_hold(out)) << to_string(kind);
  }
}

TEST(Aggregators, PermutationInvariance) {
  std::mt19937_64 rng(5);
  GlidConfig glid;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_updates(rng, 6, 10 + trial % 7);
    const auto p = permuted(m, rng);
    EXPECT_EQ(agg_mean(m), agg_mean(p));
    EXPECT_EQ(agg_median(m), agg_median(p));
    EXPECT_EQ(agg_trimmed_mean(m, 0.2), agg_trimmed_mean(p, 0.2));
    EXPECT_EQ(aggregate({AggregatorKind::Glid}, present(m), {}).global,
              aggregate({AggregatorKind::Glid}, present(p), {}).global);
    // distinct distances: FABA removes the same vectors either way
    EXPECT_TRUE(agg_faba(m, ids(m.cols()), 0.2).global.isApprox(agg_faba(p, ids(p.cols()), 0.2).global, 1e-12));
  }
}

TEST(Aggregators, OutcomeInvariantsOnRandomInput) {
  std::mt19937_64 rng(6);
  const ParamVector current = ParamVector::Zero(4);
  const ParamVector server = ParamVector::Constant(4, 0.5);
  for (auto kind : {AggregatorKind::Mean, AggregatorKind::Median, AggregatorKind::Trim, AggregatorKind::Krum,
                    AggregatorKind::FoolsGold, AggregatorKind::Faba, AggregatorKind::FlTrust,
                    AggregatorKind::Flair, AggregatorKind::Glid}) {
    AggregatorConfig cfg;
    cfg.kind = kind;
    auto agg = make_aggregator(cfg, 2);
    for (int t = 0; t < 10; ++t) {
      const auto out = agg->aggregate(present(random_updates(rng, 4, 12)),
                                      AggregatorContext{t, &current, nullptr, &server});
      EXPECT_TRUE(outcome_invariants_hold(out)) << to_string(kind);
      EXPECT_EQ(out.flags.cols(), 12);
    }
  }
}

TEST(Aggregators, NamesRoundTrip) {
  for (auto kind : {AggregatorKind::Mean, AggregatorKind::Median, AggregatorKind::Trim, AggregatorKind::Krum,
                    AggregatorKind::FoolsGold, AggregatorKind::Faba, AggregatorKind::FlTrust,
                    AggregatorKind::Flair, AggregatorKind::Glid})
    EXPECT_EQ(aggregator_from_string(to_string(kind)), kind);
  EXPECT_THROW(aggregator_from_string("bulyan"), ConfigError);
  EXPECT_EQ(aggregator_label(AggregatorKind::Glid), "GLID");
}

TEST(WeightedMean, Basics) {
  const auto m = row({1, 3});
  EXPECT_EQ(weighted_mean(m, Eigen::Vector2d(1, 3))(0), 2.5);
  EXPECT_THROW(weighted_mean(m, Eigen::Vector2d(0, 0)), NumericError);
}

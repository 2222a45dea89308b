#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wtpfl/errors.hpp"
#include "wtpfl/predictor.hpp"

using namespace wtpfl;

namespace {

ModelArch linear(int input_dim) { return ModelArch{input_dim, {}, Activation::Identity}; }

WindowedDataset dataset(Eigen::MatrixXd x, Eigen::VectorXd y) {
  WindowedDataset ds;
  ds.inputs = std::move(x);
  ds.targets = std::move(y);
  ds.target_index.resize(static_cast<std::size_t>(ds.targets.size()));
  return ds;
}

double central_difference(const ModelArch& arch, ParamVector p, Eigen::Index k,
                          const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double eps) {
  const double orig = p(k);
  p(k) = orig + eps;
  const double up = loss_gradient(arch, p, x, y).loss;
  p(k) = orig - eps;
  const double down = loss_gradient(arch, p, x, y).loss;
  return (up - down) / (2 * eps);
}

}  // namespace

TEST(ModelArch, ParameterCounts) {
  EXPECT_EQ(linear(3).parameter_count(), 4);
  EXPECT_EQ((ModelArch{7, {8}, Activation::Tanh}.parameter_count()), 73);
  EXPECT_EQ((ModelArch{7, {8, 4}, Activation::Relu}.parameter_count()), 7 * 8 + 8 + 8 * 4 + 4 + 4 + 1);
  EXPECT_THROW((ModelArch{0, {}, Activation::Tanh}.validate()), ParameterError);
  EXPECT_THROW((ModelArch{3, {0}, Activation::Tanh}.validate()), ParameterError);
}

TEST(Activation, NamesRoundTrip) {
  for (auto a : {Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Identity})
    EXPECT_EQ(activation_from_string(to_string(a)), a);
  EXPECT_THROW(activation_from_string("swish"), ConfigError);
}

TEST(InitModel, DeterministicAndBounded) {
  const ModelArch arch{7, {8}, Activation::Tanh};
  const auto a = init_model(arch, 42);
  EXPECT_EQ(a, init_model(arch, 42));
  EXPECT_NE(a, init_model(arch, 43));
  ASSERT_EQ(a.size(), 73);
  // first layer: 56 weights then 8 zero biases
  for (int i = 0; i < 56; ++i) EXPECT_LE(std::abs(a(i)), 1.0 / std::sqrt(7.0));
  for (int i = 56; i < 64; ++i) EXPECT_EQ(a(i), 0.0);
  EXPECT_EQ(a(72), 0.0);
}

TEST(Predict, LinearDotProduct) {
  ParamVector p(3);
  p << 1, 1, 0;
  Eigen::VectorXd x(2);
  x << 2, 3;
  EXPECT_EQ(predict(linear(2), p, x), 5.0);
}

TEST(Predict, ZeroParamsGiveZero) {
  for (auto act : {Activation::Tanh, Activation::Relu, Activation::Identity}) {
    const ModelArch arch{4, {5, 3}, act};
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1, 2);
    EXPECT_EQ(predict(arch, ParamVector::Zero(arch.parameter_count()), x), 0.0);
  }
}

TEST(Predict, HandComposedHiddenUnit) {
  const ModelArch arch{2, {1}, Activation::Tanh};
  ParamVector p(5);
  p << 0.5, -1.0, 0.25, 2.0, -0.3;  // w11 w12 b1 | v b2
  Eigen::VectorXd x(2);
  x << 0.8, 0.1;
  const double expect = 2.0 * std::tanh(0.5 * 0.8 - 1.0 * 0.1 + 0.25) - 0.3;
  EXPECT_NEAR(predict(arch, p, x), expect, 1e-15);
}

TEST(Predict, BatchMatchesSingle) {
  const ModelArch arch{3, {4}, Activation::Sigmoid};
  const auto p = init_model(arch, 1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 3);
  const auto batch = predict_batch(arch, p, x);
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(batch(j), predict(arch, p, x.row(j).transpose()), 1e-14);
}

TEST(Predict, Errors) {
  Eigen::VectorXd x(2);
  x << 1, 2;
  EXPECT_THROW(predict(linear(2), ParamVector::Zero(4), x), DimensionError);
  EXPECT_THROW(predict(linear(3), ParamVector::Zero(4), x), DimensionError);
}

TEST(QuadraticLoss, Examples) {
  EXPECT_EQ(quadratic_loss(3, 3), 0.0);
  EXPECT_EQ(quadratic_loss(5, 2), 9.0);
  EXPECT_EQ(quadratic_loss(-1, 2), 9.0);
}

TEST(LocalTrain, ZeroLearningRateIsIdentity) {
  const ModelArch arch{2, {3}, Activation::Tanh};
  const auto p = init_model(arch, 3);
  const auto ds = dataset(Eigen::MatrixXd::Random(10, 2), Eigen::VectorXd::Random(10));
  const auto out = local_train(arch, p, ds, TrainConfig{0.0, 4, 3, 1});
  EXPECT_EQ(out, p);
}

TEST(LocalTrain, SingleLinearStepByHand) {
  ParamVector theta(3);
  theta << 0.2, -0.1, 0.05;
  Eigen::MatrixXd a(1, 2);
  a << 1.5, 2.0;
  Eigen::VectorXd b(1);
  b << 0.7;
  const double lr = 0.1;
  const auto out = local_train(linear(2), theta, dataset(a, b), TrainConfig{lr, 64, 1, 0});
  const double residual = 0.2 * 1.5 - 0.1 * 2.0 + 0.05 - 0.7;
  ParamVector expect(3);
  expect << 0.2 - lr * 2 * residual * 1.5, -0.1 - lr * 2 * residual * 2.0, 0.05 - lr * 2 * residual;
  EXPECT_NEAR((out - expect).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(LocalTrain, InputUntouchedAndReproducible) {
  const ModelArch arch{3, {4}, Activation::Tanh};
  const auto p = init_model(arch, 5);
  const ParamVector copy = p;
  const auto ds = dataset(Eigen::MatrixXd::Random(50, 3), Eigen::VectorXd::Random(50));
  const TrainConfig cfg{0.05, 8, 3, 77};
  const auto a = local_train(arch, p, ds, cfg);
  EXPECT_EQ(p, copy);
  EXPECT_EQ(a, local_train(arch, p, ds, cfg));
  EXPECT_NE(a, local_train(arch, p, ds, TrainConfig{0.05, 8, 3, 78}));
}

TEST(LocalTrain, DivergenceIsReported) {
  const auto ds = dataset(Eigen::MatrixXd::Constant(4, 1, 1e200), Eigen::VectorXd::Constant(4, -1e200));
  EXPECT_THROW(local_train(linear(1), ParamVector::Ones(2), ds, TrainConfig{1e100, 2, 1, 0}), DivergenceError);
}

TEST(LocalTrain, EmptyDataRejected) {
  EXPECT_THROW(local_train(linear(1), ParamVector::Zero(2), WindowedDataset{}, TrainConfig{}), EmptyInputError);
}

TEST(LocalTrain, LinearModelConvergesOnNoiselessLinearData) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(400, 3);
  Eigen::VectorXd y(400);
  for (int j = 0; j < 400; ++j) {
    for (int i = 0; i < 3; ++i) x(j, i) = u(rng);
    y(j) = 0.3 * x(j, 0) - 0.2 * x(j, 1) + 0.5 * x(j, 2) + 0.1;
  }
  const auto train = dataset(x.topRows(300), y.head(300));
  const auto test = dataset(x.bottomRows(100), y.tail(100));
  const auto p = local_train(linear(3), ParamVector::Zero(4), train, TrainConfig{0.2, 16, 200, 1});
  EXPECT_LT(evaluate(linear(3), p, test).mse, 1e-3);
}

TEST(LossGradient, FiniteDifferencesOnFiveParameterModel) {
  const ModelArch arch{2, {1}, Activation::Tanh};
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    ParamVector p(5);
    for (int k = 0; k < 5; ++k) p(k) = g(rng);
    Eigen::MatrixXd x(3, 2);
    Eigen::VectorXd y(3);
    for (int j = 0; j < 3; ++j) {
      x(j, 0) = g(rng);
      x(j, 1) = g(rng);
      y(j) = g(rng);
    }
    const auto grad = loss_gradient(arch, p, x, y).gradient;
    for (Eigen::Index k = 0; k < 5; ++k) {
      const double fd = central_difference(arch, p, k, x, y, 1e-5);
      EXPECT_LE(std::abs(grad(k) - fd), 1e-4 * std::max(1.0, std::abs(fd))) << "param " << k;
    }
  }
}

TEST(LossGradient, FiniteDifferencesAcrossActivations) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (auto act : {Activation::Tanh, Activation::Sigmoid, Activation::Identity}) {
    const ModelArch arch{4, {5, 3}, act};
    const auto p = init_model(arch, 6);
    Eigen::MatrixXd x(7, 4);
    Eigen::VectorXd y(7);
    for (int j = 0; j < 7; ++j) {
      for (int i = 0; i < 4; ++i) x(j, i) = g(rng);
      y(j) = g(rng);
    }
    const auto lg = loss_gradient(arch, p, x, y);
    EXPECT_NEAR(lg.loss, (predict_batch(arch, p, x) - y).squaredNorm() / 7.0, 1e-12);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double fd = central_difference(arch, p, k, x, y, 1e-5);
      EXPECT_LE(std::abs(lg.gradient(k) - fd), 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Evaluate, PerfectPredictor) {
  ParamVector p(2);
  p << 2.0, 1.0;
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 2;
  Eigen::VectorXd y(3);
  y << 1, 3, 5;
  const auto m = evaluate(linear(1), p, dataset(x, y));
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.mse, 0.0);
}

TEST(Evaluate, ConstantZeroPrediction) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  Eigen::VectorXd y(2);
  y << 1, -1;
  const auto m = evaluate(linear(1), ParamVector::Zero(2), dataset(x, y));
  EXPECT_EQ(m.mae, 1.0);
  EXPECT_EQ(m.mse, 1.0);
}

TEST(Evaluate, MatchesIndependentMeans) {
  const ModelArch arch{3, {4}, Activation::Tanh};
  const auto p = init_model(arch, 12);
  const auto ds = dataset(Eigen::MatrixXd::Random(40, 3), Eigen::VectorXd::Random(40));
  double abs_sum = 0, sq_sum = 0;
  for (Eigen::Index j = 0; j < 40; ++j) {
    const double e = predict(arch, p, ds.inputs.row(j).transpose()) - ds.targets(j);
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto m = evaluate(arch, p, ds);
  EXPECT_NEAR(m.mae, abs_sum / 40, 1e-12);
  EXPECT_NEAR(m.mse, sq_sum / 40, 1e-12);
}

TEST(Evaluate, PooledWeightsBySampleCount) {
  const auto a = dataset(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 4.0));
  const auto b = dataset(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(3));
  const auto m = evaluate_pooled(linear(1), ParamVector::Zero(2), {&a, &b});
  EXPECT_EQ(m.mae, 1.0);
  EXPECT_EQ(m.mse, 4.0);
  EXPECT_EQ(m.count, 4);
}

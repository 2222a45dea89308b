#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "wtpfl/param.hpp"
#include "wtpfl/traffic.hpp"

namespace wtpfl {

enum class Activation { Tanh, Sigmoid, Relu, Identity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Fully connected regressor with a scalar output. An empty `hidden` list
/// gives a linear model.
///
/// Flattening order of the parameter vector is layer-major. Within a layer
/// the weight matrix (fan_out x fan_in) comes first in row-major order,
/// followed by its fan_out biases. Dimension d therefore names the same
/// weight for the whole run.
struct ModelArch {
  int input_dim = 7;
  std::vector<int> hidden{8};
  Activation activation = Activation::Tanh;

  Eigen::Index parameter_count() const;
  void validate() const;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 64;
  int local_epochs = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
ParamVector init_model(const ModelArch& arch, std::uint64_t seed);

double predict(const ModelArch& arch, const ParamVector& params,
               const Eigen::Ref<const Eigen::VectorXd>& input);

/// Row-wise predictions for a batch of inputs.
Eigen::VectorXd predict_batch(const ModelArch& arch, const ParamVector& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& inputs);

inline double quadratic_loss(double prediction, double target) {
  const double e = prediction - target;
  return e * e;
}

struct LossGradient {
  double loss = 0.0;  // mean quadratic loss over the batch
  ParamVector gradient;
};

/// Backpropagated gradient of the batch-mean quadratic loss.
LossGradient loss_gradient(const ModelArch& arch, const ParamVector& params,
                           const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           const Eigen::Ref<const Eigen::VectorXd>& targets);

/// Plain mini-batch SGD for `local_epochs` passes, reshuffled every epoch from
/// cfg.seed. Throws DivergenceError on a non-finite step.
ParamVector local_train(const ModelArch& arch, const ParamVector& params,
                        const WindowedDataset& train, const TrainConfig& cfg);

struct ErrorMetrics {
  double mae = 0.0;
  double mse = 0.0;
  Eigen::Index count = 0;
};

/// MAE and MSE in normalized units; no capping.
ErrorMetrics evaluate(const ModelArch& arch, const ParamVector& params,
                      const WindowedDataset& test);

/// Sample-weighted MAE/MSE over several test sets.
ErrorMetrics evaluate_pooled(const ModelArch& arch, const ParamVector& params,
                             const std::vector<const WindowedDataset*>& tests);

}  // namespace wtpfl

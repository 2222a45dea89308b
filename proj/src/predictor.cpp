#include "wtpfl/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wtpfl/errors.hpp"
#include "wtpfl/rng.hpp"

namespace wtpfl {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct Layer {
  int fan_in;
  int fan_out;
  Eigen::Index offset;  // start of the weight block; biases follow it
};

std::vector<Layer> layout(const ModelArch& arch) {
  std::vector<Layer> layers;
  int fan_in = arch.input_dim;
  Eigen::Index offset = 0;
  auto push = [&](int fan_out) {
    layers.push_back({fan_in, fan_out, offset});
    offset += static_cast<Eigen::Index>(fan_in) * fan_out + fan_out;
    fan_in = fan_out;
  };
  for (int h : arch.hidden) push(h);
  push(1);
  return layers;
}

Eigen::ArrayXXd activate(Activation a, const Eigen::ArrayXXd& z) {
  switch (a) {
    case Activation::Tanh: return z.tanh();
    case Activation::Sigmoid: return 1.0 / (1.0 + (-z).exp());
    case Activation::Relu: return z.max(0.0);
    case Activation::Identity: return z;
  }
  return z;
}

// Derivative expressed through the activation output where possible.
Eigen::ArrayXXd activate_grad(Activation a, const Eigen::ArrayXXd& z, const Eigen::ArrayXXd& out) {
  switch (a) {
    case Activation::Tanh: return 1.0 - out.square();
    case Activation::Sigmoid: return out * (1.0 - out);
    case Activation::Relu: return (z > 0.0).cast<double>();
    case Activation::Identity: return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
  }
  return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
}

void check_params(const ModelArch& arch, const ParamVector& params) {
  if (params.size() != arch.parameter_count()) {
    throw DimensionError("parameter vector has " + std::to_string(params.size()) +
                         " entries, architecture needs " +
                         std::to_string(arch.parameter_count()));
  }
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::Relu;
  if (name == "identity" || name == "linear") return Activation::Identity;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "tanh";
}

Eigen::Index ModelArch::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layout(*this)) n += static_cast<Eigen::Index>(l.fan_in) * l.fan_out + l.fan_out;
  return n;
}

void ModelArch::validate() const {
  if (input_dim < 1) throw ParameterError("model: input_dim must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw ParameterError("model: hidden layer widths must be >= 1");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("train: learning_rate must be finite and >= 0");
  }
  if (batch_size < 1) throw ParameterError("train: batch_size must be >= 1");
  if (local_epochs < 1) throw ParameterError("train: local_epochs must be >= 1");
}

ParamVector init_model(const ModelArch& arch, std::uint64_t seed) {
  arch.validate();
  ParamVector p = ParamVector::Zero(arch.parameter_count());
  Rng rng(seed);
  for (const auto& l : layout(arch)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.fan_in));
    std::uniform_real_distribution<double> w(-bound, bound);
    const Eigen::Index n_w = static_cast<Eigen::Index>(l.fan_in) * l.fan_out;
    for (Eigen::Index k = 0; k < n_w; ++k) p(l.offset + k) = w(rng);
  }
  return p;
}

Eigen::VectorXd predict_batch(const ModelArch& arch, const ParamVector& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  check_params(arch, params);
  if (inputs.cols() != arch.input_dim) {
    throw DimensionError("input has " + std::to_string(inputs.cols()) + " features, model expects " +
                         std::to_string(arch.input_dim));
  }
  const auto layers = layout(arch);
  Eigen::MatrixXd a = inputs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    RowMajorMap w(params.data() + l.offset, l.fan_out, l.fan_in);
    Eigen::Map<const Eigen::RowVectorXd> b(params.data() + l.offset + w.size(), l.fan_out);
    Eigen::MatrixXd z = (a * w.transpose()).rowwise() + b;
    a = i + 1 < layers.size() ? Eigen::MatrixXd(activate(arch.activation, z.array()).matrix()) : z;
  }
  return a.col(0);
}

double predict(const ModelArch& arch, const ParamVector& params,
               const Eigen::Ref<const Eigen::VectorXd>& input) {
  if (input.size() != arch.input_dim) {
    throw DimensionError("input has " + std::to_string(input.size()) + " features, model expects " +
                         std::to_string(arch.input_dim));
  }
  return predict_batch(arch, params, input.transpose())(0);
}

LossGradient loss_gradient(const ModelArch& arch, const ParamVector& params,
                           const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           const Eigen::Ref<const Eigen::VectorXd>& targets) {
  check_params(arch, params);
  if (inputs.cols() != arch.input_dim || inputs.rows() != targets.size()) {
    throw DimensionError("loss_gradient: batch shape mismatch");
  }
  if (targets.size() == 0) throw EmptyInputError("loss_gradient: empty batch");
  const auto layers = layout(arch);
  const double batch = static_cast<double>(targets.size());

  // Forward pass keeping pre-activations and outputs of every layer.
  std::vector<Eigen::MatrixXd> outs{inputs};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    RowMajorMap w(params.data() + l.offset, l.fan_out, l.fan_in);
    Eigen::Map<const Eigen::RowVectorXd> b(params.data() + l.offset + w.size(), l.fan_out);
    pre.push_back((outs.back() * w.transpose()).rowwise() + b);
    outs.push_back(i + 1 < layers.size() ? Eigen::MatrixXd(activate(arch.activation, pre.back().array()).matrix())
                                         : pre.back());
  }
  const Eigen::VectorXd err = outs.back().col(0) - targets;

  LossGradient g;
  g.loss = err.squaredNorm() / batch;
  g.gradient = ParamVector::Zero(params.size());
  Eigen::MatrixXd delta = (2.0 / batch) * err;  // dL/dz at the output
  for (std::size_t i = layers.size(); i-- > 0;) {
    const auto& l = layers[i];
    RowMajorMutMap gw(g.gradient.data() + l.offset, l.fan_out, l.fan_in);
    gw = delta.transpose() * outs[i];
    g.gradient.segment(l.offset + gw.size(), l.fan_out) = delta.colwise().sum().transpose();
    if (i == 0) break;
    RowMajorMap w(params.data() + l.offset, l.fan_out, l.fan_in);
    const Eigen::MatrixXd upstream = delta * w;
    delta = (upstream.array() * activate_grad(arch.activation, pre[i - 1].array(), outs[i].array())).matrix();
  }
  return g;
}

ParamVector local_train(const ModelArch& arch, const ParamVector& params,
                        const WindowedDataset& train, const TrainConfig& cfg) {
  cfg.validate();
  check_params(arch, params);
  if (train.empty()) throw EmptyInputError("local_train: empty training set");
  ParamVector theta = params;
  const Eigen::Index n = train.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  Rng rng(cfg.seed);
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    int batch_no = 0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size, ++batch_no) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n - start);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
      const Eigen::MatrixXd x = train.inputs(idx, Eigen::all);
      const Eigen::VectorXd y = train.targets(idx);
      const auto g = loss_gradient(arch, theta, x, y);
      theta -= cfg.learning_rate * g.gradient;
      if (!theta.allFinite()) {
        throw DivergenceError("local_train diverged at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(batch_no),
                              epoch, batch_no);
      }
    }
  }
  return theta;
}

ErrorMetrics evaluate(const ModelArch& arch, const ParamVector& params,
                      const WindowedDataset& test) {
  return evaluate_pooled(arch, params, {&test});
}

ErrorMetrics evaluate_pooled(const ModelArch& arch, const ParamVector& params,
                             const std::vector<const WindowedDataset*>& tests) {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  Eigen::Index count = 0;
  for (const auto* ds : tests) {
    if (ds->empty()) continue;
    const Eigen::ArrayXd e = predict_batch(arch, params, ds->inputs) - ds->targets;
    abs_sum += e.abs().sum();
    sq_sum += e.square().sum();
    count += ds->size();
  }
  if (count == 0) throw EmptyInputError("evaluate: empty test set");
  const double n = static_cast<double>(count);
  return {abs_sum / n, sq_sum / n, count};
}

}  // namespace wtpfl

#include "drocc/mlp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace drocc {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ContractError("unknown activation '" + std::string(s) + "'");
}

MlpModel::MlpModel(std::vector<std::size_t> layer_dims, Activation activation)
    : dims_(std::move(layer_dims)), activation_(activation) {
  if (dims_.size() < 2) throw ContractError("MlpModel: need at least input and output dims");
  if (dims_.back() != 1) throw ContractError("MlpModel: output dimension must be 1");
  for (std::size_t d : dims_) {
    if (d == 0) throw ContractError("MlpModel: zero-width layer");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.push_back({Tensor2(dims_[l + 1], dims_[l]), std::vector<double>(dims_[l + 1], 0.0)});
  }
}

MlpModel MlpModel::init_uniform(std::vector<std::size_t> layer_dims, Activation activation,
                                Rng& rng) {
  MlpModel m(std::move(layer_dims), activation);
  for (auto& layer : m.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias) b = rng.uniform(-bound, bound);
  }
  return m;
}

std::size_t MlpModel::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

bool MlpModel::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.all_finite()) return false;
    for (double b : l.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

double MlpModel::weight_sq_norm() const {
  double s = 0.0;
  for (const auto& l : layers_) {
    for (double w : l.weight.data()) s += w * w;
  }
  return s;
}

ParamGrads ParamGrads::zeros_like(const MlpModel& model) {
  ParamGrads g;
  for (const auto& l : model.layers()) {
    g.weight.emplace_back(l.weight.rows(), l.weight.cols());
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

bool ParamGrads::all_finite() const {
  for (const auto& w : weight) {
    if (!w.all_finite()) return false;
  }
  for (const auto& b : bias) {
    for (double v : b) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

namespace {

double activate(Activation a, double z) { return a == Activation::relu ? std::max(z, 0.0) : std::tanh(z); }

// Derivative expressed through the pre-activation z and output value y.
double activate_grad(Activation a, double z, double y) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  return 1.0 - y * y;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap view(const Tensor2& t) { return {t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())}; }
MatMap view(Tensor2& t) { return {t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())}; }

// out = in * W^T + b
Tensor2 affine(const Tensor2& in, const DenseLayer& layer) {
  Tensor2 out(in.rows(), layer.weight.rows());
  const ConstVecMap bias(layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size()));
  view(out).noalias() = view(in) * view(layer.weight).transpose();
  view(out).rowwise() += bias;
  return out;
}

struct ForwardCache {
  std::vector<Tensor2> inputs;  // input to each layer
  std::vector<Tensor2> pre;     // pre-activation of each layer
  std::vector<double> logits;
};

void check_batch(const MlpModel& model, const Tensor2& batch) {
  if (model.layers().empty()) throw ContractError("forward: empty model");
  if (batch.cols() != model.input_dim()) {
    throw ContractError("forward: batch has " + std::to_string(batch.cols()) +
                        " columns, model expects " + std::to_string(model.input_dim()));
  }
}

ForwardCache forward_cached(const MlpModel& model, const Tensor2& batch) {
  check_batch(model, batch);
  ForwardCache c;
  const auto& layers = model.layers();
  Tensor2 cur = batch;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Tensor2 z = affine(cur, layers[l]);
    c.inputs.push_back(std::move(cur));
    if (l + 1 < layers.size()) {
      cur = z;
      for (double& v : cur.data()) v = activate(model.activation(), v);
    } else {
      c.logits.assign(z.data().begin(), z.data().end());
    }
    c.pre.push_back(std::move(z));
  }
  return c;
}

GradientBundle backprop(const MlpModel& model, const ForwardCache& c,
                        std::span<const double> seed, bool with_params = true) {
  const auto& layers = model.layers();
  const std::size_t n = c.logits.size();
  GradientBundle g;
  if (with_params) g.params = ParamGrads::zeros_like(model);

  Tensor2 delta(n, 1, std::vector<double>(seed.begin(), seed.end()));
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Tensor2& in = c.inputs[l];
    const auto& W = layers[l].weight;
    const std::size_t outs = W.rows();
    const std::size_t ins = W.cols();
    Tensor2 din(n, ins);
    view(din).noalias() = view(delta) * view(W);
    if (with_params) {
      view(g.params.weight[l]).noalias() = view(delta).transpose() * view(in);
      Eigen::Map<Eigen::RowVectorXd>(g.params.bias[l].data(), static_cast<Eigen::Index>(outs)) =
          view(delta).colwise().sum();
    }
    if (l == 0) {
      g.input_grads = std::move(din);
    } else {
      // Through the activation of the previous layer, whose output is `in`.
      const Tensor2& z = c.pre[l - 1];
      for (std::size_t k = 0; k < din.size(); ++k) {
        din.data()[k] *= activate_grad(model.activation(), z.data()[k], in.data()[k]);
      }
      delta = std::move(din);
    }
  }
  return g;
}

}  // namespace

std::vector<double> forward(const MlpModel& model, const Tensor2& batch) {
  check_batch(model, batch);
  const auto& layers = model.layers();
  Tensor2 cur = batch;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    cur = affine(cur, layers[l]);
    if (l + 1 < layers.size()) {
      for (double& v : cur.data()) v = activate(model.activation(), v);
    }
  }
  return {cur.data().begin(), cur.data().end()};
}

double softplus(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double bce_logit_loss(double logit, Label label) { return softplus(-label_sign(label) * logit); }

double bce_logit_grad(double logit, Label label) {
  // d/dz softplus(-y z) = -y * sigmoid(-y z)
  const double y = label_sign(label);
  const double t = -y * logit;
  const double sig = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  return -y * sig;
}

GradientBundle backward(const MlpModel& model, const Tensor2& batch,
                        std::span<const Label> labels, std::span<const double> weights) {
  const std::size_t n = batch.rows();
  if (labels.size() != n || weights.size() != n) {
    throw ContractError("backward: labels/weights length must equal batch rows");
  }
  if (n == 0) throw ContractError("backward: empty batch");
  ForwardCache c = forward_cached(model, batch);
  std::vector<double> seed(n);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] < 0.0) throw ContractError("backward: negative example weight");
    if (weights[i] == 0.0) continue;
    loss += weights[i] * bce_logit_loss(c.logits[i], labels[i]);
    seed[i] = weights[i] * inv_n * bce_logit_grad(c.logits[i], labels[i]);
  }
  GradientBundle g = backprop(model, c, seed);
  g.loss_value = loss * inv_n;
  g.logits = std::move(c.logits);
  return g;
}

GradientBundle backward_from_seed(const MlpModel& model, const Tensor2& batch,
                                  std::span<const double> output_seed) {
  if (output_seed.size() != batch.rows()) {
    throw ContractError("backward_from_seed: seed length must equal batch rows");
  }
  ForwardCache c = forward_cached(model, batch);
  GradientBundle g = backprop(model, c, output_seed);
  g.logits = std::move(c.logits);
  return g;
}

Tensor2 score_input_gradients(const MlpModel& model, const Tensor2& batch) {
  std::vector<double> ones(batch.rows(), 1.0);
  ForwardCache c = forward_cached(model, batch);
  return backprop(model, c, ones, false).input_grads;
}

Tensor2 loss_input_gradients(const MlpModel& model, const Tensor2& batch, Label label,
                             std::vector<double>* losses) {
  ForwardCache c = forward_cached(model, batch);
  std::vector<double> seed(c.logits.size());
  if (losses) losses->resize(c.logits.size());
  for (std::size_t i = 0; i < seed.size(); ++i) {
    seed[i] = bce_logit_grad(c.logits[i], label);
    if (losses) (*losses)[i] = bce_logit_loss(c.logits[i], label);
  }
  return backprop(model, c, seed, false).input_grads;
}

}  // namespace drocc

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "drocc/rng.hpp"
#include "drocc/tensor.hpp"

namespace drocc {

enum class Label : std::int8_t { negative = -1, positive = 1 };

inline double label_sign(Label y) { return y == Label::positive ? 1.0 : -1.0; }

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

/// One fully-connected layer; `weight` is (out x in).
struct DenseLayer {
  Tensor2 weight;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feed-forward scorer R^d -> R. Hidden layers use `activation`, the output
/// layer is linear and has exactly one unit. The output is a logit: higher
/// means more normal.
class MlpModel {
 public:
  MlpModel() = default;

  /// All-zero parameters.
  MlpModel(std::vector<std::size_t> layer_dims, Activation activation);

  /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static MlpModel init_uniform(std::vector<std::size_t> layer_dims, Activation activation,
                               Rng& rng);

  std::size_t input_dim() const { return dims_.front(); }
  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  Activation activation() const { return activation_; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t num_params() const;
  bool all_finite() const;

  /// Sum of squared weights (biases excluded).
  double weight_sq_norm() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<std::size_t> dims_;
  Activation activation_ = Activation::relu;
  std::vector<DenseLayer> layers_;
};

/// Parameter-shaped gradient storage (also used for optimizer moments).
struct ParamGrads {
  std::vector<Tensor2> weight;
  std::vector<std::vector<double>> bias;

  static ParamGrads zeros_like(const MlpModel& model);
  bool all_finite() const;
};

struct GradientBundle {
  ParamGrads params;
  Tensor2 input_grads;  // n x d
  double loss_value = 0.0;
  std::vector<double> logits;  // forward outputs of the batch
};

std::vector<double> forward(const MlpModel& model, const Tensor2& batch);

/// log(1 + exp(-y * logit)); stable for large |logit|.
double bce_logit_loss(double logit, Label label);

/// d/dlogit of bce_logit_loss.
double bce_logit_grad(double logit, Label label);

double softplus(double x);

/// Gradients of (1/n) * sum_i w_i * bce(f(x_i), y_i) with respect to every
/// parameter and every input row.
GradientBundle backward(const MlpModel& model, const Tensor2& batch,
                        std::span<const Label> labels, std::span<const double> weights);

/// Backprop an arbitrary per-row seed dL/df_i. `loss_value` is left at 0.
GradientBundle backward_from_seed(const MlpModel& model, const Tensor2& batch,
                                  std::span<const double> output_seed);

/// Rows of df(x)/dx for the raw score (unit output seed).
Tensor2 score_input_gradients(const MlpModel& model, const Tensor2& batch);

/// Rows of d bce(f(x_i), label) / dx_i (per example, no batch averaging).
/// Per-row losses are written to `losses` when given.
Tensor2 loss_input_gradients(const MlpModel& model, const Tensor2& batch, Label label,
                             std::vector<double>* losses = nullptr);

}  // namespace drocc

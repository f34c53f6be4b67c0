#pragma once

#include <cstdint>
#include <string_view>

#include "drocc/mlp.hpp"

namespace drocc {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view s);

/// Optimizer hyperparameters plus running state. Adam moments are allocated
/// lazily on the first step.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  // Coefficient of lambda * ||W||^2; applied as a decoupled decay of 2*lambda*W
  // on weights only.
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  std::uint64_t step_count = 0;
  ParamGrads first_moment;
  ParamGrads second_moment;
};

/// One in-place update of `model`. Pass `apply_weight_decay = false` to skip
/// the decay term for this step (the moments still advance).
void optimizer_step(MlpModel& model, const ParamGrads& grads, OptimizerState& state,
                    bool apply_weight_decay = true);

}  // namespace drocc

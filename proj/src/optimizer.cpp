#include "drocc/optimizer.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace drocc {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ContractError("unknown optimizer '" + std::string(s) + "'");
}

namespace {

template <typename Fn>
void for_each_param(MlpModel& model, const ParamGrads& grads, OptimizerState& s, Fn&& fn) {
  auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto w = layers[l].weight.data();
    const auto gw = grads.weight[l].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      double* m = s.kind == OptimizerKind::adam ? &s.first_moment.weight[l].data()[k] : nullptr;
      double* v = s.kind == OptimizerKind::adam ? &s.second_moment.weight[l].data()[k] : nullptr;
      fn(w[k], gw[k], m, v, true);
    }
    auto& b = layers[l].bias;
    const auto& gb = grads.bias[l];
    for (std::size_t k = 0; k < b.size(); ++k) {
      double* m = s.kind == OptimizerKind::adam ? &s.first_moment.bias[l][k] : nullptr;
      double* v = s.kind == OptimizerKind::adam ? &s.second_moment.bias[l][k] : nullptr;
      fn(b[k], gb[k], m, v, false);
    }
  }
}

}  // namespace

void optimizer_step(MlpModel& model, const ParamGrads& grads, OptimizerState& state,
                    bool apply_weight_decay) {
  if (!(state.learning_rate > 0.0)) throw ContractError("optimizer: learning_rate must be > 0");
  if (state.weight_decay < 0.0) throw ContractError("optimizer: weight_decay must be >= 0");
  if (grads.weight.size() != model.layers().size()) {
    throw ContractError("optimizer: gradient/model layer count mismatch");
  }
  if (state.kind == OptimizerKind::adam && state.first_moment.weight.empty()) {
    state.first_moment = ParamGrads::zeros_like(model);
    state.second_moment = ParamGrads::zeros_like(model);
  }
  ++state.step_count;
  const double lr = state.learning_rate;
  const double decay = apply_weight_decay ? 2.0 * state.weight_decay : 0.0;

  if (state.kind == OptimizerKind::sgd) {
    for_each_param(model, grads, state, [&](double& p, double g, double*, double*, bool is_weight) {
      const double d = is_weight ? decay * p : 0.0;
      p -= lr * (g + d);
    });
    return;
  }

  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
  for_each_param(model, grads, state, [&](double& p, double g, double* m, double* v, bool is_weight) {
    *m = b1 * *m + (1.0 - b1) * g;
    *v = b2 * *v + (1.0 - b2) * g * g;
    // Moments of dead units decay geometrically into subnormals, which are
    // very slow on x86. Flush them.
    if (std::abs(*m) < std::numeric_limits<double>::min()) *m = 0.0;
    if (*v < std::numeric_limits<double>::min()) *v = 0.0;
    const double update = (*m / c1) / (std::sqrt(*v / c2) + eps);
    const double d = is_weight ? decay * p : 0.0;
    p -= lr * (update + d);
  });
}

}  // namespace drocc

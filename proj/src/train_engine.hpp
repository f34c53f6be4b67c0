#pragma once

// Saddle-point loop shared by the DROCC, DROCC-LF and DROCC-OE trainers.

#include <functional>
#include <span>

#include "drocc/drocc.hpp"

namespace drocc::detail {

/// Projects one displacement row in place.
using RowProjector = std::function<void(std::span<double> h, Rng& rng)>;

/// Gaussian start, then m rounds of normalised ascent on bce(f(x + h), -1),
/// projecting after every round (or once, when m = 0).
Tensor2 ascend(const MlpModel& model, const Tensor2& x, const DroccConfig& cfg, Rng& rng,
               const RowProjector& project);

struct EngineSpec {
  // Produces displacements for the positive rows of a batch.
  std::function<Tensor2(const MlpModel&, const Tensor2& positives, Rng&)> generate;
  // Called at the start of every epoch (after warm-up) with the current model.
  std::function<void(const MlpModel&, std::size_t epoch)> on_epoch_start;
  double negative_weight = 1.0;
};

TrainReport run_engine(MlpModel model, const Tensor2& features, std::span<const Label> labels,
                       const DroccConfig& cfg, const EngineSpec& spec, const TrainHooks& hooks);

}  // namespace drocc::detail

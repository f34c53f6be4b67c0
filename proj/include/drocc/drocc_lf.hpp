#pragma once

#include <string_view>
#include <vector>

#include "drocc/data.hpp"
#include "drocc/drocc.hpp"

namespace drocc {

inline constexpr double kSigmaFloor = 1e-6;

/// Per-coordinate weights of the diagonal metric ||v||^2 = sum_j sigma_j v_j^2.
struct SigmaWeights {
  std::vector<double> sigma;
  double floor = kSigmaFloor;
  std::size_t epoch_stamp = 0;
};

enum class LfVariant {
  lf,  // sigma-weighted annulus, refreshed every epoch
  oe,  // Euclidean annulus plus cross-entropy on the supplied negatives
};

std::string_view to_string(LfVariant v);
LfVariant lf_variant_from_string(std::string_view s);

struct LfConfig {
  DroccConfig base;
  std::size_t grid_points = 256;
  LfVariant variant = LfVariant::lf;
  bool freeze_sigma = false;  // keep sigma = 1 instead of refreshing it
  double sigma_floor = kSigmaFloor;
  double negative_weight = 1.0;  // weight of labelled negatives in the CE sum

  void validate() const;
};

/// sigma_j = mean over rows of |d f(x) / d x_j|, clamped below at `floor`.
SigmaWeights update_sigma(const MlpModel& model, const Tensor2& positives, double floor = kSigmaFloor,
                          std::size_t epoch = 0);

/// Same ascent loop as adversarial_search, projecting onto the sigma-metric annulus.
Tensor2 lf_adversarial_search(const MlpModel& model, const Tensor2& x, const SigmaWeights& sigma,
                              const LfConfig& cfg, Rng& rng);

/// Labelled training: cross-entropy on every row plus the adversarial term
/// generated from the positive rows of each batch. Throws ContractError if
/// there are no positives.
TrainReport train_lf(MlpModel model, const Dataset& labeled, const LfConfig& cfg,
                     const TrainHooks& hooks = {});

/// train_lf with variant = oe.
TrainReport train_oe(MlpModel model, const Dataset& labeled, LfConfig cfg, const TrainHooks& hooks = {});

}  // namespace drocc

#include "drocc/drocc_lf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drocc/projection.hpp"
#include "train_engine.hpp"

namespace drocc {

std::string_view to_string(LfVariant v) { return v == LfVariant::lf ? "lf" : "oe"; }

LfVariant lf_variant_from_string(std::string_view s) {
  if (s == "lf") return LfVariant::lf;
  if (s == "oe") return LfVariant::oe;
  throw ContractError("unknown variant '" + std::string(s) + "'");
}

void LfConfig::validate() const {
  base.validate();
  if (grid_points < 2) throw ContractError("config field 'grid_points': must be >= 2");
  if (!(sigma_floor > 0.0)) throw ContractError("config field 'sigma_floor': must be > 0");
  if (!(negative_weight >= 0.0)) throw ContractError("config field 'negative_weight': must be >= 0");
}

SigmaWeights update_sigma(const MlpModel& model, const Tensor2& positives, double floor, std::size_t epoch) {
  if (positives.rows() == 0) throw ContractError("update_sigma: no positive rows");
  const Tensor2 g = score_input_gradients(model, positives);
  SigmaWeights w;
  w.floor = floor;
  w.epoch_stamp = epoch;
  w.sigma.assign(positives.cols(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < g.cols(); ++j) w.sigma[j] += std::abs(g(i, j));
  }
  for (double& s : w.sigma) s = std::max(s / static_cast<double>(g.rows()), floor);
  return w;
}

namespace {

detail::RowProjector mahalanobis_projector(const std::vector<double>& sigma, double r, double gamma,
                                           std::size_t grid) {
  return [&sigma, r, gamma, grid](std::span<double> h, Rng& rng) {
    project_h_mahalanobis(h, sigma, r, gamma, rng, grid);
  };
}

}  // namespace

Tensor2 lf_adversarial_search(const MlpModel& model, const Tensor2& x, const SigmaWeights& sigma,
                              const LfConfig& cfg, Rng& rng) {
  cfg.validate();
  if (sigma.sigma.size() != x.cols()) throw ContractError("lf_adversarial_search: sigma length mismatch");
  const double r = cfg.base.resolved_radius(x.cols());
  return detail::ascend(model, x, cfg.base, rng, mahalanobis_projector(sigma.sigma, r, cfg.base.gamma, cfg.grid_points));
}

TrainReport train_lf(MlpModel model, const Dataset& labeled, const LfConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  labeled.validate();
  const auto pos_idx = labeled.indices(std::nullopt, Label::positive);
  if (pos_idx.empty()) throw ContractError("train_lf: no positive rows");
  const Tensor2 positives = labeled.features.gather_rows(pos_idx);
  const std::size_t d = labeled.dim();
  const double r = cfg.base.resolved_radius(d);

  SigmaWeights sigma;
  sigma.floor = cfg.sigma_floor;
  sigma.sigma.assign(d, 1.0);

  detail::EngineSpec spec;
  spec.negative_weight = cfg.negative_weight;
  if (cfg.variant == LfVariant::lf) {
    spec.on_epoch_start = [&](const MlpModel& m, std::size_t epoch) {
      if (!cfg.freeze_sigma) sigma = update_sigma(m, positives, cfg.sigma_floor, epoch);
      if (hooks.on_metric) hooks.on_metric(epoch, sigma.sigma);
    };
    spec.generate = [&](const MlpModel& m, const Tensor2& x, Rng& rng) {
      return detail::ascend(m, x, cfg.base, rng, mahalanobis_projector(sigma.sigma, r, cfg.base.gamma, cfg.grid_points));
    };
  } else {
    spec.generate = [&](const MlpModel& m, const Tensor2& x, Rng& rng) {
      return detail::ascend(m, x, cfg.base, rng, [&](std::span<double> h, Rng& g) {
        project_h_alg1(h, r, cfg.base.gamma, g);
      });
    };
  }
  return detail::run_engine(std::move(model), labeled.features, labeled.labels, cfg.base, spec, hooks);
}

TrainReport train_oe(MlpModel model, const Dataset& labeled, LfConfig cfg, const TrainHooks& hooks) {
  cfg.variant = LfVariant::oe;
  return train_lf(std::move(model), labeled, cfg, hooks);
}

}  // namespace drocc

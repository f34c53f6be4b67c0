#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "drocc/mlp.hpp"
#include "drocc/optimizer.hpp"
#include "drocc/rng.hpp"
#include "drocc/tensor.hpp"

namespace drocc {

/// How negatives around each training point are produced.
enum class NegativeMode {
  ascent,  // normalised projected gradient ascent on the negative-label loss
  random,  // uniform draw from the annulus (ablation)
};

std::string_view to_string(NegativeMode m);
NegativeMode negative_mode_from_string(std::string_view s);

struct DroccConfig {
  double radius = 0.0;  // <= 0 selects sqrt(d)/2
  double gamma = 2.0;
  double lambda = 0.0;  // weight of ||W||^2
  double mu = 1.0;      // weight of the generated-negative loss
  double ascent_step = 0.01;
  std::size_t ascent_iters = 10;
  std::size_t warmup_steps = 0;  // optimizer steps on positives before the adversarial phase
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  NegativeMode mode = NegativeMode::ascent;
  // Adversarial term on every k-th batch after warm-up; 1 = every batch.
  std::size_t adversarial_every = 1;

  double resolved_radius(std::size_t dim) const;
  /// Throws ContractError naming the offending field.
  void validate() const;
};

struct EpochStats {
  double positive_loss = 0.0;     // labelled cross-entropy, batch mean
  double adversarial_loss = 0.0;  // loss of generated points against label -1
  double total_loss = 0.0;        // positive + mu * adversarial + lambda * ||W||^2

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<double> warmup_losses;
  MlpModel model;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;

  /// Equality of everything except wall time.
  bool same_run(const TrainReport& other) const;
};

/// Observation points inside the trainers, mainly for tests and diagnostics.
struct TrainHooks {
  // Called with the centre rows and the final displacements of every
  // generated batch, right before they enter a descent step.
  std::function<void(const Tensor2& centers, const Tensor2& displacements)> on_adversarial;
  // DROCC-LF only: the per-coordinate metric weights in force for the epoch
  // that is about to start.
  std::function<void(std::size_t epoch, std::span<const double> sigma)> on_metric;
};

/// n0 optimizer steps on the positive-label loss only, without weight decay.
MlpModel warmup(MlpModel model, const Tensor2& positives, const DroccConfig& cfg);

/// Displacements h, one row per input row, with r <= ||h|| <= gamma*r. The
/// model is not modified.
Tensor2 adversarial_search(const MlpModel& model, const Tensor2& x, const DroccConfig& cfg, Rng& rng);

/// Displacements drawn uniformly from the annulus volume.
Tensor2 random_displacements(std::size_t rows, std::size_t dim, const DroccConfig& cfg, Rng& rng);

/// Warm-up followed by epochs of saddle-point descent on
/// mean bce(f(x), +1) + mu * mean bce(f(x + h), -1) + lambda ||W||^2.
/// Throws DivergenceError on a non-finite loss.
TrainReport train(MlpModel model, const Tensor2& positives, const DroccConfig& cfg,
                  const TrainHooks& hooks = {});

/// Raw logits; higher = more normal.
std::vector<double> score(const MlpModel& model, const Tensor2& x);

/// Mean bce(f(x + h), -1) for given displacements.
double negative_label_loss(const MlpModel& model, const Tensor2& x, const Tensor2& h);

}  // namespace drocc

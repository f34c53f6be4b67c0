#include "drocc/drocc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "drocc/projection.hpp"
#include "train_engine.hpp"

namespace drocc {

std::string_view to_string(NegativeMode m) { return m == NegativeMode::ascent ? "ascent" : "random"; }

NegativeMode negative_mode_from_string(std::string_view s) {
  if (s == "ascent") return NegativeMode::ascent;
  if (s == "random") return NegativeMode::random;
  throw ContractError("unknown negative mode '" + std::string(s) + "'");
}

double DroccConfig::resolved_radius(std::size_t dim) const {
  return radius > 0.0 ? radius : std::sqrt(static_cast<double>(dim)) / 2.0;
}

void DroccConfig::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw ContractError(std::string("config field '") + field + "': " + why);
  };
  if (!std::isfinite(radius)) fail("radius", "must be finite");
  if (!(gamma >= 1.0)) fail("gamma", "must be >= 1");
  if (!(lambda >= 0.0)) fail("lambda", "must be >= 0");
  if (!(mu >= 0.0)) fail("mu", "must be >= 0");
  if (!(ascent_step > 0.0)) fail("ascent_step", "must be > 0");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be > 0");
  if (batch_size == 0) fail("batch_size", "must be >= 1");
  if (adversarial_every == 0) fail("adversarial_every", "must be >= 1");
}

bool TrainReport::same_run(const TrainReport& other) const {
  return epochs == other.epochs && warmup_losses == other.warmup_losses && model == other.model &&
         seed == other.seed;
}

namespace detail {

Tensor2 ascend(const MlpModel& model, const Tensor2& x, const DroccConfig& cfg, Rng& rng,
               const RowProjector& project) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Tensor2 h(n, d);
  for (double& v : h.data()) v = rng.normal();
  if (cfg.ascent_iters == 0) {
    for (std::size_t i = 0; i < n; ++i) project(h.row(i), rng);
    return h;
  }
  Tensor2 xh(n, d);
  for (std::size_t it = 0; it < cfg.ascent_iters; ++it) {
    for (std::size_t k = 0; k < xh.size(); ++k) xh.data()[k] = x.data()[k] + h.data()[k];
    const Tensor2 g = loss_input_gradients(model, xh, Label::negative);
    for (std::size_t i = 0; i < n; ++i) {
      auto gi = g.row(i);
      const double gn = norm2(gi);
      auto hi = h.row(i);
      if (gn > 0.0 && std::isfinite(gn)) {
        for (std::size_t j = 0; j < d; ++j) hi[j] += cfg.ascent_step * gi[j] / gn;
      }
      project(hi, rng);
    }
  }
  return h;
}

TrainReport run_engine(MlpModel model, const Tensor2& features, std::span<const Label> labels,
                       const DroccConfig& cfg, const EngineSpec& spec, const TrainHooks& hooks) {
  cfg.validate();
  const std::size_t n = features.rows();
  if (n == 0) throw ContractError("train: empty training data");
  if (labels.size() != n) throw ContractError("train: label count mismatch");
  if (features.cols() != model.input_dim()) throw ContractError("train: feature dim != model input dim");
  if (!features.all_finite()) throw ContractError("train: non-finite features");

  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  OptimizerState opt;
  opt.kind = cfg.optimizer;
  opt.learning_rate = cfg.learning_rate;
  opt.weight_decay = cfg.lambda;

  TrainReport report;
  report.seed = cfg.seed;

  auto diverged = [&](const std::string& where, double loss) {
    std::ostringstream msg;
    msg << "training diverged during " << where << " (loss = " << loss
        << "); lower learning_rate (currently " << cfg.learning_rate << ") or ascent_step";
    throw DivergenceError(msg.str());
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto ce_weight = [&](Label y) { return y == Label::positive ? 1.0 : spec.negative_weight; };

  // Warm-up: labelled cross-entropy only, no weight decay.
  std::size_t cursor = n;
  for (std::size_t step = 0; step < cfg.warmup_steps; ++step) {
    if (cursor >= n) {
      std::shuffle(order.begin(), order.end(), rng.engine());
      cursor = 0;
    }
    const std::size_t end = std::min(n, cursor + cfg.batch_size);
    std::span<const std::size_t> idx(order.data() + cursor, end - cursor);
    cursor = end;
    const Tensor2 xb = features.gather_rows(idx);
    std::vector<Label> yb;
    std::vector<double> wb;
    for (std::size_t i : idx) {
      yb.push_back(labels[i]);
      wb.push_back(ce_weight(labels[i]));
    }
    const GradientBundle g = backward(model, xb, yb, wb);
    if (!std::isfinite(g.loss_value)) diverged("warm-up", g.loss_value);
    optimizer_step(model, g.params, opt, false);
    report.warmup_losses.push_back(g.loss_value);
  }

  std::size_t batch_counter = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (spec.on_epoch_start) spec.on_epoch_start(model, epoch);
    std::shuffle(order.begin(), order.end(), rng.engine());
    EpochStats stats;
    std::size_t batches = 0;
    std::size_t adv_batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_counter) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const std::size_t b = idx.size();
      Tensor2 xb = features.gather_rows(idx);
      std::vector<Label> yb;
      std::vector<double> wb;
      std::vector<std::size_t> pos_rows;
      for (std::size_t k = 0; k < b; ++k) {
        yb.push_back(labels[idx[k]]);
        wb.push_back(ce_weight(labels[idx[k]]));
        if (labels[idx[k]] == Label::positive) pos_rows.push_back(k);
      }

      std::size_t n_adv = 0;
      if (!pos_rows.empty() && batch_counter % cfg.adversarial_every == 0) {
        const Tensor2 xp = xb.gather_rows(pos_rows);
        const Tensor2 h = spec.generate(model, xp, rng);
        if (hooks.on_adversarial) hooks.on_adversarial(xp, h);
        Tensor2 xadv = xp;
        for (std::size_t k = 0; k < xadv.size(); ++k) xadv.data()[k] += h.data()[k];
        n_adv = xadv.rows();
        xb = Tensor2::vstack(xb, xadv);
        yb.insert(yb.end(), n_adv, Label::negative);
      }

      // backward() averages over all stacked rows; rescale so the objective is
      // mean CE over the batch plus mu times mean adversarial loss.
      const double total_rows = static_cast<double>(b + n_adv);
      for (double& w : wb) w *= total_rows / static_cast<double>(b);
      if (n_adv > 0) wb.insert(wb.end(), n_adv, cfg.mu * total_rows / static_cast<double>(n_adv));

      const GradientBundle g = backward(model, xb, yb, wb);
      double ce = 0.0;
      double weight_sum = 0.0;
      for (std::size_t k = 0; k < b; ++k) {
        ce += ce_weight(yb[k]) * bce_logit_loss(g.logits[k], yb[k]);
        weight_sum += 1.0;
      }
      ce /= weight_sum;
      double adv = 0.0;
      for (std::size_t k = b; k < b + n_adv; ++k) adv += bce_logit_loss(g.logits[k], Label::negative);
      if (n_adv > 0) adv /= static_cast<double>(n_adv);

      const double total = g.loss_value + cfg.lambda * model.weight_sq_norm();
      if (!std::isfinite(total) || !g.params.all_finite()) diverged("epoch " + std::to_string(epoch), total);
      optimizer_step(model, g.params, opt, true);
      if (!model.all_finite()) diverged("epoch " + std::to_string(epoch), total);

      stats.positive_loss += ce;
      stats.adversarial_loss += adv;
      stats.total_loss += total;
      ++batches;
      if (n_adv > 0) ++adv_batches;
    }
    stats.positive_loss /= static_cast<double>(batches);
    stats.total_loss /= static_cast<double>(batches);
    if (adv_batches > 0) stats.adversarial_loss /= static_cast<double>(adv_batches);
    report.epochs.push_back(stats);
  }

  report.model = std::move(model);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace detail

namespace {

detail::RowProjector euclidean_projector(double r, double gamma) {
  return [r, gamma](std::span<double> h, Rng& rng) { project_h_alg1(h, r, gamma, rng); };
}

}  // namespace

Tensor2 adversarial_search(const MlpModel& model, const Tensor2& x, const DroccConfig& cfg, Rng& rng) {
  cfg.validate();
  const double r = cfg.resolved_radius(x.cols());
  return detail::ascend(model, x, cfg, rng, euclidean_projector(r, cfg.gamma));
}

Tensor2 random_displacements(std::size_t rows, std::size_t dim, const DroccConfig& cfg, Rng& rng) {
  const double r = cfg.resolved_radius(dim);
  Tensor2 h(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    auto hi = h.row(i);
    rng.unit_vector(hi);
    const double rho = sample_annulus_radius(dim, r, cfg.gamma, rng);
    for (double& v : hi) v *= rho;
  }
  return h;
}

MlpModel warmup(MlpModel model, const Tensor2& positives, const DroccConfig& cfg) {
  if (positives.rows() == 0) throw ContractError("warmup: empty data");
  DroccConfig c = cfg;
  c.epochs = 0;
  std::vector<Label> labels(positives.rows(), Label::positive);
  detail::EngineSpec spec;
  return detail::run_engine(std::move(model), positives, labels, c, spec, {}).model;
}

TrainReport train(MlpModel model, const Tensor2& positives, const DroccConfig& cfg, const TrainHooks& hooks) {
  if (positives.rows() == 0) throw ContractError("train: empty data");
  const double r = cfg.resolved_radius(positives.cols());
  detail::EngineSpec spec;
  if (cfg.mode == NegativeMode::ascent) {
    spec.generate = [&cfg, proj = euclidean_projector(r, cfg.gamma)](const MlpModel& m, const Tensor2& x,
                                                                       Rng& rng) {
      return detail::ascend(m, x, cfg, rng, proj);
    };
  } else {
    spec.generate = [&cfg](const MlpModel&, const Tensor2& x, Rng& rng) {
      return random_displacements(x.rows(), x.cols(), cfg, rng);
    };
  }
  std::vector<Label> labels(positives.rows(), Label::positive);
  return detail::run_engine(std::move(model), positives, labels, cfg, spec, hooks);
}

std::vector<double> score(const MlpModel& model, const Tensor2& x) { return forward(model, x); }

double negative_label_loss(const MlpModel& model, const Tensor2& x, const Tensor2& h) {
  if (x.rows() != h.rows() || x.cols() != h.cols()) throw ContractError("negative_label_loss: shape mismatch");
  if (x.rows() == 0) throw ContractError("negative_label_loss: empty batch");
  Tensor2 xh = x;
  for (std::size_t k = 0; k < xh.size(); ++k) xh.data()[k] += h.data()[k];
  const auto logits = forward(model, xh);
  double s = 0.0;
  for (double z : logits) s += bce_logit_loss(z, Label::negative);
  return s / static_cast<double>(logits.size());
}

}  // namespace drocc

#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "drocc/mlp.hpp"

namespace oracle {

using drocc::Label;
using drocc::MlpModel;
using drocc::Tensor2;

/// Neuron-by-neuron evaluation with std::vector temporaries.
inline double scalar_forward(const MlpModel& m, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  const auto& layers = m.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& W = layers[l].weight;
    std::vector<double> z(W.rows());
    for (std::size_t o = 0; o < W.rows(); ++o) {
      double s = layers[l].bias[o];
      for (std::size_t i = 0; i < W.cols(); ++i) s += W(o, i) * a[i];
      z[o] = s;
    }
    if (l + 1 < layers.size()) {
      for (double& v : z) v = m.activation() == drocc::Activation::relu ? (v > 0 ? v : 0.0) : std::tanh(v);
    }
    a = z;
  }
  return a[0];
}

inline double scalar_bce(double z, Label y) {
  const double t = (y == Label::positive ? -z : z);
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double weighted_mean_loss(const MlpModel& m, const Tensor2& x, std::span<const Label> y,
                                 std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += w[i] * scalar_bce(scalar_forward(m, x.row(i)), y[i]);
  return s / static_cast<double>(x.rows());
}

struct FdGradients {
  std::vector<double> params;  // weights then bias, layer by layer
  std::vector<double> inputs;  // row-major n x d
};

inline FdGradients finite_difference_gradients(const MlpModel& m, const Tensor2& x, std::span<const Label> y,
                                               std::span<const double> w, double step) {
  FdGradients out;
  MlpModel p = m;
  for (std::size_t l = 0; l < p.layers().size(); ++l) {
    auto perturb = [&](double& slot) {
      const double orig = slot;
      slot = orig + step;
      const double up = weighted_mean_loss(p, x, y, w);
      slot = orig - step;
      const double down = weighted_mean_loss(p, x, y, w);
      slot = orig;
      out.params.push_back((up - down) / (2 * step));
    };
    for (double& v : p.layers()[l].weight.data()) perturb(v);
    for (double& v : p.layers()[l].bias) perturb(v);
  }
  Tensor2 xp = x;
  for (double& v : xp.data()) {
    const double orig = v;
    v = orig + step;
    const double up = weighted_mean_loss(m, xp, y, w);
    v = orig - step;
    const double down = weighted_mean_loss(m, xp, y, w);
    v = orig;
    out.inputs.push_back((up - down) / (2 * step));
  }
  return out;
}

/// Central differences of the raw score f with respect to one input row.
inline std::vector<double> fd_score_gradient(const MlpModel& m, std::span<const double> x, double step) {
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> g;
  for (double& v : xp) {
    const double orig = v;
    v = orig + step;
    const double up = scalar_forward(m, xp);
    v = orig - step;
    const double down = scalar_forward(m, xp);
    v = orig;
    g.push_back((up - down) / (2 * step));
  }
  return g;
}

inline std::vector<double> flatten(const drocc::ParamGrads& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    out.insert(out.end(), g.weight[l].data().begin(), g.weight[l].data().end());
    out.insert(out.end(), g.bias[l].begin(), g.bias[l].end());
  }
  return out;
}

/// ||a - b|| / max(||a||, ||b||, 1e-12)
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

/// Textbook Adam with decoupled decay of 2*lambda*p.
struct ScalarAdam {
  double param;
  double lr;
  double lambda;
  double m = 0, v = 0;
  int t = 0;
  void step(double g) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    param = param - lr * mh / (std::sqrt(vh) + 1e-8) - lr * 2 * lambda * param;
  }
};

/// P(pos > neg) + P(tie)/2 by explicit pair counting.
inline double pairwise_auc(std::span<const double> pos, std::span<const double> neg) {
  double s = 0.0;
  for (double p : pos) {
    for (double q : neg) s += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
  }
  return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Double-loop nearest neighbour distance, negated.
inline double naive_nn(const Tensor2& train, std::span<const double> x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < train.rows(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (train(i, j) - x[j]) * (train(i, j) - x[j]);
    best = std::min(best, std::sqrt(s));
  }
  return -best;
}

struct MahalanobisOracle {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> point;  // displacement from the centre
  bool feasible_found = false;
};

/// Dense uniform grid over the multiplier interval with direct feasibility
/// filtering. `delta` is z - x. Falls back to radial rescaling when nothing
/// on the grid is feasible.
inline MahalanobisOracle dense_grid_mahalanobis(std::span<const double> delta, std::span<const double> sigma,
                                                double r, double gamma, std::size_t points) {
  const std::size_t d = delta.size();
  double s2 = 0;
  for (std::size_t j = 0; j < d; ++j) s2 += sigma[j] * delta[j] * delta[j];
  const double s = std::sqrt(s2);
  MahalanobisOracle out;
  if (s >= r && s <= gamma * r) {
    out.objective = 0;
    out.point.assign(delta.begin(), delta.end());
    out.feasible_found = true;
    return out;
  }
  const double smax = *std::max_element(sigma.begin(), sigma.end());
  std::vector<double> cand(d);
  auto consider = [&](auto&& factor) {
    double obj = 0, n2 = 0;
    for (std::size_t j = 0; j < d; ++j) {
      cand[j] = delta[j] * factor(j);
      obj += (cand[j] - delta[j]) * (cand[j] - delta[j]);
      n2 += sigma[j] * cand[j] * cand[j];
    }
    if (n2 >= r * r && n2 <= gamma * gamma * r * r && obj < out.objective) {
      out.objective = obj;
      out.point = cand;
      out.feasible_found = true;
    }
  };
  if (s < r) {
    const double lo = -1.0 / smax;
    for (std::size_t k = 0; k < points; ++k) {
      // Uniform on (lo, 0], excluding the pole itself.
      const double tau = lo * (1.0 - static_cast<double>(k + 1) / static_cast<double>(points)) ;
      consider([&](std::size_t j) { return 1.0 / (1.0 + tau * sigma[j]); });
    }
  } else {
    const double a = gamma * r / s;
    const double hi = a / (1 - a) * smax;
    for (std::size_t k = 0; k < points; ++k) {
      const double nu = hi * static_cast<double>(k) / static_cast<double>(points - 1);
      consider([&](std::size_t j) { return nu / (nu + sigma[j]); });
    }
  }
  if (!out.feasible_found) {
    const double f = (s < r ? r : gamma * r) / s;
    out.point.resize(d);
    out.objective = 0;
    for (std::size_t j = 0; j < d; ++j) {
      out.point[j] = delta[j] * f;
      out.objective += (out.point[j] - delta[j]) * (out.point[j] - delta[j]);
    }
  }
  return out;
}

/// Kolmogorov-Smirnov statistic of a sample against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

}  // namespace oracle

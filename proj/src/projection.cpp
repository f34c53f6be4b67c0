#include "drocc/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drocc/tensor.hpp"

namespace drocc {

std::optional<double> ProjectionResult::tau() const {
  if (!multiplier) return std::nullopt;
  if (active == ActiveConstraint::outer) return 1.0 / *multiplier;
  return multiplier;
}

double sigma_norm(std::span<const double> v, std::span<const double> sigma) {
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) s += sigma[j] * v[j] * v[j];
  return std::sqrt(s);
}

namespace {

// Points within a few ulps of a boundary count as on it, so re-projecting a
// projected point is a no-op.
constexpr double kBandSlack = 1e-12;

void check_radii(double r, double gamma) {
  if (!(r > 0.0)) throw ContractError("annulus: r must be > 0");
  if (!(gamma >= 1.0)) throw ContractError("annulus: gamma must be >= 1");
}

// Scale h by `factor` and report the matching isotropic multiplier for metric
// weight `sigma0` (1 for Euclidean).
ProjectionResult radial_result(std::span<double> h, double beta, double r, double gamma,
                               double sigma0) {
  ProjectionResult res;
  if (beta < r * (1.0 - kBandSlack)) {
    const double factor = r / beta;
    for (double& v : h) v *= factor;
    res.active = ActiveConstraint::inner;
    res.multiplier = (beta / r - 1.0) / sigma0;
  } else if (beta > gamma * r * (1.0 + kBandSlack)) {
    const double factor = (gamma * r) / beta;
    for (double& v : h) v *= factor;
    res.active = ActiveConstraint::outer;
    res.multiplier = sigma0 * factor / (1.0 - factor);
  }
  res.point.assign(h.begin(), h.end());
  return res;
}

// h <- random direction with ||h||_sigma = r.
ProjectionResult zero_displacement(std::span<double> h, std::span<const double> sigma, double r,
                                   Rng& rng) {
  rng.unit_vector(h);
  const double n = sigma.empty() ? norm2(h) : sigma_norm(h, sigma);
  for (double& v : h) v *= r / n;
  ProjectionResult res;
  res.active = ActiveConstraint::inner;
  res.point.assign(h.begin(), h.end());
  return res;
}

bool all_zero(std::span<const double> h) {
  return std::all_of(h.begin(), h.end(), [](double v) { return v == 0.0; });
}

struct Candidate {
  double objective;
  double sq_norm;  // ||x~ - x||_sigma^2
};

// x~ - x = delta / (1 + tau * sigma)
Candidate eval_tau(std::span<const double> delta, std::span<const double> sigma, double tau) {
  Candidate c{0.0, 0.0};
  for (std::size_t j = 0; j < delta.size(); ++j) {
    const double den = 1.0 + tau * sigma[j];
    const double t = tau * sigma[j] / den;
    c.objective += delta[j] * delta[j] * t * t;
    c.sq_norm += delta[j] * delta[j] * sigma[j] / (den * den);
  }
  return c;
}

// x~ - x = delta * nu / (nu + sigma)
Candidate eval_nu(std::span<const double> delta, std::span<const double> sigma, double nu) {
  Candidate c{0.0, 0.0};
  for (std::size_t j = 0; j < delta.size(); ++j) {
    const double den = nu + sigma[j];
    const double t = sigma[j] / den;
    const double s = nu / den;
    c.objective += delta[j] * delta[j] * t * t;
    c.sq_norm += delta[j] * delta[j] * sigma[j] * s * s;
  }
  return c;
}

// Grid search over a monotone-parametrised multiplier followed by bisection
// toward the feasibility boundary. `eval` maps a multiplier to a candidate.
// When no grid point is feasible, a grid step that jumps across the band is
// bisected until a feasible multiplier turns up.
template <typename Eval>
std::optional<double> search_multiplier(const std::vector<double>& grid, Eval&& eval,
                                        double lo_sq, double hi_sq) {
  auto feasible = [&](const Candidate& c) {
    return c.sq_norm >= lo_sq && c.sq_norm <= hi_sq && std::isfinite(c.objective);
  };
  std::vector<Candidate> cands;
  cands.reserve(grid.size());
  for (double g : grid) cands.push_back(eval(g));

  // Bracket [left, right] of multipliers around the chosen one; the ends
  // are infeasible (or the grid ends).
  std::optional<double> m;
  std::optional<double> left, right;
  double best_obj = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    // Strict improvement only: grids are ordered by increasing |multiplier|,
    // so ties keep the smaller one.
    if (!feasible(cands[k]) || !(cands[k].objective < best_obj)) continue;
    best_obj = cands[k].objective;
    m = grid[k];
    left = k > 0 && !feasible(cands[k - 1]) ? std::optional(grid[k - 1]) : std::nullopt;
    right = k + 1 < grid.size() && !feasible(cands[k + 1]) ? std::optional(grid[k + 1]) : std::nullopt;
  }
  if (!m) {
    for (std::size_t k = 0; k + 1 < grid.size() && !m; ++k) {
      const bool below_a = cands[k].sq_norm < lo_sq, below_b = cands[k + 1].sq_norm < lo_sq;
      if (below_a == below_b) continue;
      double a = grid[k], b = grid[k + 1];
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        const Candidate c = eval(mid);
        if (feasible(c)) {
          m = mid;
          left = a;
          right = b;
          break;
        }
        ((c.sq_norm < lo_sq) == below_a ? a : b) = mid;
      }
    }
    if (!m) return std::nullopt;
  }

  // Refine against each infeasible end, keeping the feasible side.
  double best = *m;
  for (const auto& end : {left, right}) {
    if (!end) continue;
    double good = *m;
    double bad = *end;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (good + bad);
      if (mid == good || mid == bad) break;
      if (feasible(eval(mid))) {
        good = mid;
      } else {
        bad = mid;
      }
    }
    if (eval(good).objective < eval(best).objective) best = good;
  }
  return best;
}

}  // namespace

ActiveConstraint project_h_alg1(std::span<double> h, double r, double gamma, Rng& rng) {
  check_radii(r, gamma);
  if (all_zero(h)) return zero_displacement(h, {}, r, rng).active;
  return radial_result(h, norm2(h), r, gamma, 1.0).active;
}

ProjectionResult project_euclidean(std::span<const double> z, const EuclideanAnnulus& ann,
                                   Rng& rng) {
  if (z.size() != ann.center.size()) throw ContractError("project_euclidean: dimension mismatch");
  check_radii(ann.r, ann.gamma);
  std::vector<double> h(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) h[j] = z[j] - ann.center[j];
  ProjectionResult res =
      all_zero(h) ? zero_displacement(h, {}, ann.r, rng) : radial_result(h, norm2(h), ann.r, ann.gamma, 1.0);
  for (std::size_t j = 0; j < z.size(); ++j) res.point[j] = ann.center[j] + h[j];
  return res;
}

ProjectionResult project_h_mahalanobis(std::span<double> h, std::span<const double> sigma,
                                       double r, double gamma, Rng& rng,
                                       std::size_t grid_points) {
  check_radii(r, gamma);
  if (sigma.size() != h.size()) throw ContractError("project_mahalanobis: sigma length mismatch");
  if (grid_points < 2) throw ContractError("project_mahalanobis: need at least 2 grid points");
  for (double s : sigma) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ContractError("project_mahalanobis: sigma must be positive");
  }
  // Equal weights reduce to the Euclidean annulus of radius r / sqrt(sigma0);
  // computing it that way keeps sigma = 1 bit-identical to project_h_alg1.
  if (std::all_of(sigma.begin(), sigma.end(), [&](double v) { return v == sigma[0]; })) {
    const double root = std::sqrt(sigma[0]);
    if (all_zero(h)) return zero_displacement(h, {}, r / root, rng);
    return radial_result(h, norm2(h) * root, r, gamma, sigma[0]);
  }
  if (all_zero(h)) return zero_displacement(h, sigma, r, rng);

  const double s = sigma_norm(h, sigma);

  ProjectionResult res;
  if (s >= r * (1.0 - kBandSlack) && s <= gamma * r * (1.0 + kBandSlack)) {
    res.point.assign(h.begin(), h.end());
    return res;
  }

  const double smax = *std::max_element(sigma.begin(), sigma.end());
  const double lo_sq = r * r;
  const double hi_sq = gamma * gamma * r * r;
  const std::vector<double> delta(h.begin(), h.end());
  std::vector<double> grid(grid_points);
  std::optional<double> m;

  if (s < r) {
    res.active = ActiveConstraint::inner;
    // tau_k = -(1 - eps_k)/smax with eps_k from 1 down to 1e-9, log-spaced.
    for (std::size_t k = 0; k < grid_points; ++k) {
      const double e = std::pow(10.0, -9.0 * static_cast<double>(k) / static_cast<double>(grid_points - 1));
      grid[k] = -(1.0 - e) / smax;
    }
    m = search_multiplier(grid, [&](double t) { return eval_tau(delta, sigma, t); }, lo_sq, hi_sq);
    if (m) {
      for (std::size_t j = 0; j < h.size(); ++j) h[j] = delta[j] / (1.0 + *m * sigma[j]);
    }
  } else {
    res.active = ActiveConstraint::outer;
    const double a = gamma * r / s;
    const double nu_max = a / (1.0 - a) * smax;
    for (std::size_t k = 0; k < grid_points; ++k) {
      grid[k] = nu_max * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    }
    m = search_multiplier(grid, [&](double nu) { return eval_nu(delta, sigma, nu); }, lo_sq, hi_sq);
    if (m) {
      for (std::size_t j = 0; j < h.size(); ++j) h[j] = delta[j] * *m / (*m + sigma[j]);
    }
  }

  if (m) {
    res.multiplier = m;
  } else {
    const double factor = (res.active == ActiveConstraint::inner ? r : gamma * r) / s;
    for (double& v : h) v *= factor;
  }
  res.point.assign(h.begin(), h.end());
  return res;
}

ProjectionResult project_mahalanobis(std::span<const double> z, const MahalanobisAnnulus& ann,
                                     Rng& rng, std::size_t grid_points) {
  if (z.size() != ann.center.size()) throw ContractError("project_mahalanobis: dimension mismatch");
  std::vector<double> h(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) h[j] = z[j] - ann.center[j];
  ProjectionResult res = project_h_mahalanobis(h, ann.sigma, ann.r, ann.gamma, rng, grid_points);
  for (std::size_t j = 0; j < z.size(); ++j) res.point[j] = ann.center[j] + h[j];
  return res;
}

double sample_annulus_radius(std::size_t dim, double r, double gamma, Rng& rng) {
  check_radii(r, gamma);
  const double d = static_cast<double>(dim);
  // Invert the volume CDF in units of r: rho/r = (1 + U (gamma^d - 1))^{1/d}.
  const double u = rng.uniform();
  return r * std::pow(1.0 + u * (std::pow(gamma, d) - 1.0), 1.0 / d);
}

std::vector<double> sample_uniform_annulus(const EuclideanAnnulus& ann, Rng& rng) {
  if (ann.center.empty()) throw ContractError("sample_uniform_annulus: empty center");
  std::vector<double> p(ann.center.size());
  rng.unit_vector(p);
  const double rho = sample_annulus_radius(p.size(), ann.r, ann.gamma, rng);
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = ann.center[j] + rho * p[j];
  return p;
}

}  // namespace drocc

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "drocc/rng.hpp"

namespace drocc {

/// { u : r <= ||u - center||_2 <= gamma * r }
struct EuclideanAnnulus {
  std::vector<double> center;
  double r = 1.0;
  double gamma = 2.0;
};

/// { u : r <= ||u - center||_sigma <= gamma * r } with
/// ||v||_sigma^2 = sum_j sigma_j v_j^2.
struct MahalanobisAnnulus {
  std::vector<double> center;
  double r = 1.0;
  double gamma = 2.0;
  std::vector<double> sigma;
};

enum class ActiveConstraint { none, inner, outer };

struct ProjectionResult {
  std::vector<double> point;
  ActiveConstraint active = ActiveConstraint::none;
  // Inner side: tau <= 0. Outer side: nu = 1/tau >= 0. Empty when the input
  // was already feasible, or for the zero-displacement and fallback paths.
  std::optional<double> multiplier;

  /// Multiplier of the stationarity condition (x~ - z) + tau * Sigma (x~ - x) = 0.
  std::optional<double> tau() const;
};

inline constexpr std::size_t kDefaultGridPoints = 256;

double sigma_norm(std::span<const double> v, std::span<const double> sigma);

/// Nearest point of the Euclidean annulus to `z`. If z coincides with the
/// center, a direction is drawn from `rng` and the point is placed at radius r.
ProjectionResult project_euclidean(std::span<const double> z, const EuclideanAnnulus& ann,
                                   Rng& rng);

/// Projection of a displacement h onto r <= ||h|| <= gamma * r, in place.
/// Returns which side was active.
ActiveConstraint project_h_alg1(std::span<double> h, double r, double gamma, Rng& rng);

/// Nearest point (in the Euclidean objective) of the Mahalanobis annulus to `z`.
///
/// When ||z - x||_sigma lies outside [r, gamma*r], the solution has the form
/// x + (I + tau*Sigma)^{-1} (z - x) and the multiplier is searched on a grid:
/// tau in [-1/max sigma, 0] for the inner side, nu = 1/tau in
/// [0, a/(1-a) * max sigma] with a = gamma*r/||z - x||_sigma for the outer side.
/// The tau grid is log-dense toward the pole. The best feasible grid point is
/// then refined by bisection against its infeasible neighbour. If no grid
/// point is feasible the displacement is rescaled radially in the sigma metric.
///
/// Requires sigma_j > 0 for all j.
ProjectionResult project_mahalanobis(std::span<const double> z, const MahalanobisAnnulus& ann,
                                     Rng& rng, std::size_t grid_points = kDefaultGridPoints);

/// Displacement form of project_mahalanobis, in place.
ProjectionResult project_h_mahalanobis(std::span<double> h, std::span<const double> sigma,
                                       double r, double gamma, Rng& rng,
                                       std::size_t grid_points = kDefaultGridPoints);

/// A point distributed uniformly over the volume of the annulus.
std::vector<double> sample_uniform_annulus(const EuclideanAnnulus& ann, Rng& rng);

/// Radius with CDF ((rho^d - r^d) / ((gamma r)^d - r^d)) on [r, gamma r].
double sample_annulus_radius(std::size_t dim, double r, double gamma, Rng& rng);

}  // namespace drocc

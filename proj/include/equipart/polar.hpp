#pragma once

// Geodesic polar coordinates around a point, built numerically from the
// exponential map, and the separability test det g = A(r)^2 B(theta)^2.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "equipart/equilibrium.hpp"
#include "equipart/geometry.hpp"
#include "equipart/report.hpp"

namespace equipart {

struct PolarOptions {
  double rmax = 1.0;
  std::size_t radii = 20;       // r_j = j * rmax / radii
  std::size_t directions = 16;  // n = 3: a square grid of polar x azimuthal angles
  double steps_per_unit = 1000.0;
  double delta_rel = 1e-4;  // finite-difference step, relative to rmax
  double tol = 1e-3;
  unsigned threads = 1;
};

// Endpoint of the unit-speed geodesic from p with initial direction v after
// length r. Throws GeometryError if it leaves the domain.
Point exp_map(const Manifold& m, std::span<const double> p, std::span<const double> v, double r,
              std::size_t steps);

// Angles of the direction grid: one angle in 2-D, (polar, azimuth) in 3-D.
std::vector<std::vector<double>> direction_grid(std::size_t dim, std::size_t count);

// Unit vector at P for the given angles, in a g-orthonormal frame at P.
std::vector<double> polar_direction(const Manifold& m, std::span<const double> center,
                                    std::span<const double> angles);

struct PolarSample {
  Point position;           // exp_P(r v(angles))
  double det = 0.0;         // det of the pulled-back metric G
  double jacobian_det = 0;  // det of d(position)/d(r, angles)
  double g_rr = 0.0;        // 1 by the Gauss lemma
  double g_rr_inverse = 0;  // G^{rr}
};

// Pulled-back metric at one (r, angles) of the polar chart around `center`.
PolarSample polar_det(const Manifold& m, std::span<const double> center,
                      std::span<const double> angles, double r, const PolarOptions& options = {});

struct PolarPatch {
  Point center;
  std::vector<double> radii;
  std::vector<std::vector<double>> angles;  // per direction
  // Indexed [direction][radius].
  std::vector<std::vector<PolarSample>> samples;
  std::vector<std::vector<double>> log_derivative;  // s = d/dr ln(r sqrt(det G))
  // Radii [0, usable) are before the first conjugate point / domain exit on
  // every ray.
  std::size_t usable = 0;
  std::vector<bool> injective;  // per direction
  std::string truncation;       // empty if the whole grid is usable
  double gauss_max = 0.0;       // max |G_rr - 1| over usable entries
};

// Throws GeometryError for dimensions other than 2 and 3.
PolarPatch build_polar_patch(const Manifold& m, std::span<const double> center,
                             const PolarOptions& options = {});

// max over r of (max_theta s - min_theta s) / (1 + |mean_theta s|). Also
// carries a `gauss` sub-check (tolerance 1e-4). INCONCLUSIVE when the patch
// had to be truncated or the Gauss diagnostic fails.
CheckReport separability_check(const PolarPatch& patch, const PolarOptions& options = {});
CheckReport separability_check(const Manifold& m, std::span<const double> center,
                               const PolarOptions& options = {});

// f = r^2 / 2 on the patch: (grad f)^2 = r^2 G^{rr} against 2f (within
// 1e-4 max(1, 2f)), theta-independence of Lap f = r s, and the tabulated
// equilibrium check over the patch.
CheckReport half_r2_check(const PolarPatch& patch, const PolarOptions& options = {});

struct SlopeFit {
  std::vector<double> slopes;  // per direction
  double expected = 0.0;       // 2 (n - 1)
  double max_deviation = 0.0;
};

// Least-squares slope of log det G against log r at r = 0.01 ... 0.05.
SlopeFit small_r_slope(const Manifold& m, std::span<const double> center,
                       const PolarOptions& options = {});

}  // namespace equipart

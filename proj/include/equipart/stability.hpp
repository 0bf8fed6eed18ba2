#pragma once

// Circles of revolution in rotationally symmetric planes dr^2 + f(r)^2 dtheta^2:
// first variation of length, the k-th second-variation mode, and the
// f'^2 - f f'' <= 1 stability criterion.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "equipart/geometry.hpp"
#include "equipart/report.hpp"

namespace equipart {

class WarpedPlane {
 public:
  // `f` is an expression in the single variable `r` (index 0). Throws
  // GeometryError unless r_min < r_max and f > 0 on a grid of the range.
  WarpedPlane(std::string name, Expression f, double r_min, double r_max);

  // Parses `f_text` in the variable r.
  static WarpedPlane parse(std::string name, std::string_view f_text, double r_min, double r_max);

  const std::string& name() const { return name_; }
  const Expression& f() const { return f_; }
  const Expression& df() const { return df_; }
  const Expression& d2f() const { return d2f_; }
  // f'^2 - f f''.
  const Expression& criterion() const { return c_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }

  double value(double r) const;
  double derivative(double r) const;
  double second_derivative(double r) const;
  // -f''/f.
  double gauss_curvature(double r) const;

  // (r, theta) chart with metric diag(1, f^2) on r_min < r < r_max.
  ManifoldPtr manifold() const { return manifold_; }

 private:
  std::string name_;
  Expression f_, df_, d2f_, c_;
  double r_min_ = 0.0;
  double r_max_ = 0.0;
  ManifoldPtr manifold_;
};

// Sum with a fixed pairwise tree, independent of how the terms were produced.
double pairwise_sum(std::span<const double> terms);

struct RitoreResult {
  CheckReport report;  // label STABLE-CANDIDATE or UNSTABLE
  std::vector<double> r;
  std::vector<double> c;  // f'^2 - f f'' at r
};

// c on `samples` equally spaced points including both ends of the range.
// UNSTABLE iff c > 1 + tol somewhere (witness: r of the largest c).
RitoreResult ritore_criterion(const WarpedPlane& w, std::size_t samples = 201, double tol = 1e-12);

// Q(u) = integral of (u_s^2 - (K + kappa^2) u^2) ds over the circle r = r0
// for u = cos(k theta), by the periodic trapezoid rule on `nodes` points.
double second_variation_mode(const WarpedPlane& w, double r0, int k, std::size_t nodes = 1024);

struct FirstVariationOptions {
  double epsilon = 1e-4;  // Richardson pair epsilon, 2 epsilon
  std::size_t nodes = 1024;
  double rel_tol = 1e-6;        // |A'(0)| <= rel_tol * L(0)
  double control_tol = 1e-4;    // relative, for the u = 1 control
};

struct ModeDerivative {
  int k = 0;  // 0 is the constant control u = 1
  double a_prime = 0.0;
};

struct FirstVariationResult {
  CheckReport report;
  double length = 0.0;  // L(0)
  double mean_curvature = 0.0;
  std::vector<ModeDerivative> modes;
  ModeDerivative control;
  double control_expected = 0.0;  // -(n - 1) H L(0)
};

// Length of the curve r = r0 - eps u(theta) (u = cos k theta, or 1 for k = 0).
double perturbed_length(const WarpedPlane& w, double r0, int k, double eps, std::size_t nodes);

// dL/deps at 0 for the inward perturbation r = r0 - eps cos(k theta), by a
// Richardson-extrapolated central difference. CONSISTENT iff every mode is
// critical; the constant mode is reported as a control against
// -(n - 1) H L(0).
FirstVariationResult first_variation_check(const WarpedPlane& w, double r0,
                                           std::span<const int> modes,
                                           const FirstVariationOptions& options = {});

// Area derivative of the sphere of radius `radius` in flat R^3 under the
// inward perturbation by P_l(cos theta) (l = 0 is the constant mode), with
// Gauss-Legendre quadrature in cos(theta).
double sphere_area_derivative(double radius, int l, double epsilon = 1e-4,
                              std::size_t nodes = 64);

}  // namespace equipart

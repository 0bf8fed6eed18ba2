#pragma once

// Riemannian calculus on a single coordinate chart.

#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "equipart/error.hpp"
#include "equipart/expr.hpp"

namespace equipart {

// Coordinates of a point, ordered like the owning manifold's coordinate list.
using Point = std::vector<double>;

enum class Comparison { Less, LessEqual, Greater, GreaterEqual };

struct Constraint {
  Expression lhs;
  Comparison op = Comparison::Less;
  Expression rhs;
  std::string text;
};

// Conjunction of strict/non-strict comparisons between expressions. An empty
// domain is the whole chart.
class Domain {
 public:
  Domain() = default;
  explicit Domain(std::vector<Constraint> constraints) : constraints_(std::move(constraints)) {}

  // "lhs < rhs & lhs >= rhs ..." over the given coordinates.
  static Domain parse(std::string_view text, std::span<const std::string> vars,
                      const LetBindings& lets = {});

  // A point where a constraint cannot be evaluated is outside.
  bool contains(std::span<const double> point) const;
  Domain intersect(const Domain& other) const;
  bool unconstrained() const { return constraints_.empty(); }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  std::string to_string() const;

 private:
  std::vector<Constraint> constraints_;
};

class Manifold {
 public:
  // `metric` is a dim x dim matrix of expressions in the coordinates. It must
  // be symmetric as trees after simplify().
  Manifold(std::string name, std::vector<std::string> coords,
           std::vector<std::vector<Expression>> metric, Domain domain = {},
           LetBindings lets = {});

  const std::string& name() const { return name_; }
  std::size_t dim() const { return coords_.size(); }
  const std::vector<std::string>& coords() const { return coords_; }
  const LetBindings& lets() const { return lets_; }
  const Domain& domain() const { return domain_; }
  bool contains(std::span<const double> p) const { return domain_.contains(p); }

  const Expression& metric(std::size_t i, std::size_t j) const { return metric_[i * dim() + j]; }
  // d/dx^k of g_ij.
  const Expression& metric_derivative(std::size_t k, std::size_t i, std::size_t j) const {
    return metric_deriv_[(k * dim() + i) * dim() + j];
  }
  const Expression& inverse_metric(std::size_t i, std::size_t j) const {
    return inverse_[i * dim() + j];
  }
  const Expression& determinant() const { return det_; }
  const Expression& sqrt_determinant() const { return sqrt_det_; }
  bool diagonal() const { return diagonal_; }

  // Evaluates g (row-major, n*n) and dg (n^3, index (k*n+i)*n+j).
  void evaluate_metric(std::span<const double> p, std::span<double> g, std::span<double> dg) const;

 private:
  std::string name_;
  std::vector<std::string> coords_;
  LetBindings lets_;
  std::vector<Expression> metric_;
  std::vector<Expression> metric_deriv_;
  std::vector<Expression> inverse_;
  Expression det_;
  Expression sqrt_det_;
  Domain domain_;
  bool diagonal_ = false;
  Program metric_program_;
};

using ManifoldPtr = std::shared_ptr<const Manifold>;

struct ScalarField {
  ScalarField(ManifoldPtr manifold, Expression expr, std::string name = {}, Domain domain = {});

  ManifoldPtr manifold;
  Expression expr;
  std::string name;
  // Extra cut intersected with the manifold's domain (singular sets).
  Domain domain;

  bool contains(std::span<const double> p) const {
    return manifold->contains(p) && domain.contains(p);
  }
};

struct VectorField {
  VectorField(ManifoldPtr manifold, std::vector<Expression> components, std::string name = {});

  ManifoldPtr manifold;
  std::vector<Expression> components;
  std::string name;

  std::vector<double> at(std::span<const double> p) const;
};

// ---------------------------------------------------------------------------
// Pointwise metric quantities

struct MetricSample {
  Eigen::MatrixXd g;
  Eigen::MatrixXd inverse;
  double det = 0.0;
};

// Throws GeometryError if p is outside the domain or g is not positive
// definite (leading principal minor <= 1e-12).
MetricSample metric_at(const Manifold& m, std::span<const double> p);

// Gamma^k_ij, symmetric in i, j.
class Christoffel {
 public:
  explicit Christoffel(std::size_t n) : n_(n), data_(n * n * n, 0.0) {}
  double operator()(std::size_t k, std::size_t i, std::size_t j) const {
    return data_[(k * n_ + i) * n_ + j];
  }
  double& operator()(std::size_t k, std::size_t i, std::size_t j) {
    return data_[(k * n_ + i) * n_ + j];
  }
  std::size_t dim() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

Christoffel christoffel_at(const Manifold& m, std::span<const double> p);
// Same, reusing an evaluated metric.
Christoffel christoffel_from(const Manifold& m, std::span<const double> p, const MetricSample& ms);

// Metric norms of vectors and covectors.
double vector_norm(const MetricSample& ms, std::span<const double> v);
double covector_norm(const MetricSample& ms, std::span<const double> w);

// ---------------------------------------------------------------------------
// Differential operators on a scalar field

// Symbolic derivatives of a field, built once and evaluated at many points.
class FieldCalculus {
 public:
  explicit FieldCalculus(const ScalarField& field);

  const ScalarField& field() const { return field_; }
  const Manifold& manifold() const { return *field_.manifold; }

  const Expression& partial(std::size_t i) const { return df_[i]; }
  const Expression& second_partial(std::size_t i, std::size_t j) const {
    return d2f_[i * manifold().dim() + j];
  }
  // g^{ij} f_i f_j.
  const Expression& grad_norm_sq() const { return grad_norm_sq_; }
  // (det g)^{-1/2} d_i( sqrt(det g) g^{ij} d_j f ).
  const Expression& laplacian() const { return laplacian_; }

  struct Jet {
    double value = 0.0;
    std::vector<double> df;   // n
    std::vector<double> d2f;  // n*n
  };
  Jet jet(std::span<const double> p) const;

  // Values of f, (grad f)^2, Laplacian and their differentials.
  struct Triple {
    double f = 0.0;
    double grad_norm_sq = 0.0;
    double laplacian = 0.0;
    std::vector<double> df;
    std::vector<double> d_grad_norm_sq;
    std::vector<double> d_laplacian;
  };
  Triple triple(std::span<const double> p) const;

  // div(grad f / |grad f|), built on first use.
  const Expression& normal_divergence() const;
  double evaluate_normal_divergence(std::span<const double> p) const;

 private:
  ScalarField field_;
  std::vector<Expression> df_;
  std::vector<Expression> d2f_;
  Expression grad_norm_sq_;
  Expression laplacian_;
  Program jet_program_;
  Program triple_program_;

  mutable std::once_flag divergence_once_;
  mutable Expression divergence_;
  mutable Program divergence_program_;
};

// Contravariant gradient g^{ij} d_j f.
std::vector<double> gradient(const FieldCalculus& f, std::span<const double> p);
std::vector<double> gradient(const ScalarField& f, std::span<const double> p);

double grad_norm_sq(const FieldCalculus& f, std::span<const double> p);
double grad_norm_sq(const ScalarField& f, std::span<const double> p);

// Divergence form, symbolic expansion then evaluation.
double laplace_beltrami(const FieldCalculus& f, std::span<const double> p);
double laplace_beltrami(const ScalarField& f, std::span<const double> p);
// g^{ij}(d_i d_j f - Gamma^k_ij d_k f), evaluated numerically.
double laplace_beltrami_christoffel(const FieldCalculus& f, std::span<const double> p);

inline constexpr double kDefaultEpsCrit = 1e-7;

struct MeanCurvature {
  // Mean of principal curvatures: div(nu) / (n - 1), nu = grad f / |grad f|.
  double mean = 0.0;
  // div(nu) itself (sum of principal curvatures).
  double divergence = 0.0;
  // [Lap f / |grad f| - grad f . grad |grad f| / |grad f|^2] / (n - 1).
  double mean_by_expansion = 0.0;
};

// Throws CriticalPointError when |grad f| <= eps_crit.
MeanCurvature mean_curvature_level_set(const FieldCalculus& f, std::span<const double> p,
                                       double eps_crit = kDefaultEpsCrit);
MeanCurvature mean_curvature_level_set(const ScalarField& f, std::span<const double> p,
                                       double eps_crit = kDefaultEpsCrit);

// Sine of the angle between D_{grad f} grad f and grad f (0 when the
// gradient lines are geodesics). Throws CriticalPointError near critical
// points.
double gradient_alignment(const FieldCalculus& f, std::span<const double> p,
                          double eps_crit = kDefaultEpsCrit);
double gradient_alignment(const ScalarField& f, std::span<const double> p,
                          double eps_crit = kDefaultEpsCrit);

// ---------------------------------------------------------------------------
// Geodesics

struct GeodesicState {
  Point position;
  std::vector<double> velocity;
};

struct GeodesicPath {
  std::vector<GeodesicState> states;  // states[i] at arclength i * length / steps
  double step = 0.0;
  bool exited_domain = false;
  double final_speed_drift = 0.0;  // | |v|_g - 1 | at the last state
  double max_speed_drift = 0.0;
  // |x_N - x_2N| / 15 from a half-step rerun; NaN if not requested.
  double richardson_error = 0.0;
  bool accuracy_warning = false;  // max speed drift > 1e-4

  const GeodesicState& end() const { return states.back(); }
};

// -Gamma^k_ij v^i v^j.
std::vector<double> geodesic_acceleration(const Manifold& m, std::span<const double> x,
                                          std::span<const double> v);

// One classical RK4 step of the geodesic equation (h may be negative).
GeodesicState rk4_geodesic_step(const Manifold& m, const GeodesicState& s, double h);

// Fixed-step RK4 from p with initial direction v (normalized to unit speed
// internally). Stops early with exited_domain set if the path leaves the
// domain.
GeodesicPath integrate_geodesic(const Manifold& m, std::span<const double> p,
                                std::span<const double> v, double length, std::size_t steps,
                                bool richardson = true);

// Length of the geodesic from p to q found by shooting (Newton on the
// endpoint map); valid for nearby points inside a convex neighbourhood.
double geodesic_distance(const Manifold& m, std::span<const double> p, std::span<const double> q,
                         std::size_t steps = 400);

}  // namespace equipart

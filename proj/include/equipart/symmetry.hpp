#pragma once

// Killing fields, Lie brackets, orbit rank and invariant fields.

#include <span>
#include <vector>

#include "equipart/equilibrium.hpp"
#include "equipart/geometry.hpp"
#include "equipart/report.hpp"

namespace equipart {

// Killing operator of one vector field, compiled once. K_ab is built from
// the lowered field xi_b = g_bc X^c as d_a xi_b + d_b xi_a - 2 Gamma^c_ab xi_c.
class KillingOperator {
 public:
  explicit KillingOperator(const VectorField& field);

  const VectorField& field() const { return field_; }
  // Row-major n x n matrix K_ab at p.
  std::vector<double> tensor(std::span<const double> p) const;
  // max |K_ab| / (1 + max |g_ab| * max |X^i|).
  double residual(std::span<const double> p) const;

 private:
  VectorField field_;
  Program program_;  // X^c, then d_a X^c at index n + a*n + c
};

double killing_residual(const VectorField& field, std::span<const double> p);

// [X, Y]^i = X^j d_j Y^i - Y^j d_j X^i.
VectorField lie_bracket(const VectorField& x, const VectorField& y);

// Numerical rank of the matrix whose rows are the fields at p; singular
// values below rel_threshold * largest do not count.
std::size_t pointwise_rank(std::span<const VectorField> fields, std::span<const double> p,
                           double rel_threshold = 1e-7);

// |X(f)| / (1 + |X|_g |df|_g).
double invariance_residual(const ScalarField& f, const VectorField& x, std::span<const double> p);

struct KillingAlgebra {
  ManifoldPtr manifold;
  std::vector<VectorField> fields;
  std::size_t expected_rank = 0;  // 0 means dim - 1
};

struct SymmetryOptions {
  CheckOptions check;
  // Share of samples allowed to miss the expected rank.
  double rank_allowance = 0.01;
};

// Sub-checks, in order: killing, rank, invariance, equilibrium. The verdict
// is their conjunction. Closedness of the generated group is not checked.
CheckReport check_killing_induced_equilibrium(const KillingAlgebra& algebra, const ScalarField& f,
                                              const SamplePlan& plan,
                                              const SymmetryOptions& options = {});

// Flow of X for time t by fixed-step RK4.
Point integrate_flow(const VectorField& x, std::span<const double> p, double t,
                     std::size_t steps = 200);

}  // namespace equipart

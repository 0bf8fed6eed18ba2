#pragma once

// Shared fixtures and independent oracles for the unit tests.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "equipart/expr.hpp"
#include "equipart/geometry.hpp"

namespace test {

using equipart::Expression;
using equipart::LetBindings;
using equipart::Manifold;
using equipart::ManifoldPtr;
using equipart::Point;
using equipart::ScalarField;
using equipart::VectorField;

inline constexpr double kPi = std::numbers::pi;

inline ManifoldPtr make_manifold(const std::string& name, std::vector<std::string> coords,
                                 const std::vector<std::vector<std::string>>& metric,
                                 const std::string& domain = "",
                                 const std::vector<std::pair<std::string, std::string>>& lets = {}) {
  LetBindings bound;
  for (const auto& [k, v] : lets) bound[k] = equipart::parse(v, coords, bound);
  std::vector<std::vector<Expression>> g(coords.size(), std::vector<Expression>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t j = 0; j < coords.size(); ++j) g[i][j] = equipart::parse(metric[i][j], coords, bound);
  }
  equipart::Domain d = domain.empty() ? equipart::Domain{} : equipart::Domain::parse(domain, coords, bound);
  return std::make_shared<const Manifold>(name, coords, g, d, bound);
}

inline ManifoldPtr euclid2() { return make_manifold("euclid2", {"x", "y"}, {{"1", "0"}, {"0", "1"}}); }
inline ManifoldPtr euclid3() {
  return make_manifold("euclid3", {"x", "y", "z"}, {{"1", "0", "0"}, {"0", "1", "0"}, {"0", "0", "1"}});
}
inline ManifoldPtr polar_flat() {
  return make_manifold("polar_flat", {"r", "t"}, {{"1", "0"}, {"0", "r^2"}}, "r > 0");
}
inline ManifoldPtr sphere2() {
  return make_manifold("sphere2", {"r", "t"}, {{"1", "0"}, {"0", "sin(r)^2"}}, "r > 0 & r < 3.14159");
}
inline ManifoldPtr h2xr() {
  return make_manifold("h2xr", {"x", "y", "z"},
                       {{"1/F^2", "0", "0"}, {"0", "1/F^2", "0"}, {"0", "0", "1"}}, "x^2 + y^2 < 2",
                       {{"F", "(2 - x^2 - y^2)/2"}});
}
inline ManifoldPtr conformal() {
  return make_manifold("conf_nonsym", {"x", "y"}, {{"exp(y - x^2)", "0"}, {"0", "exp(y - x^2)"}});
}

inline ScalarField field(const ManifoldPtr& m, const std::string& text, const std::string& domain = "") {
  const Expression e = equipart::parse(text, m->coords(), m->lets());
  equipart::Domain d = domain.empty() ? equipart::Domain{} : equipart::Domain::parse(domain, m->coords(), m->lets());
  return ScalarField(m, e, text, d);
}

inline VectorField vfield(const ManifoldPtr& m, const std::vector<std::string>& comps,
                          const std::string& name = "X") {
  std::vector<Expression> c;
  for (const auto& s : comps) c.push_back(equipart::parse(s, m->coords(), m->lets()));
  return VectorField(m, c, name);
}

// h2xr Killing fields.
inline std::vector<VectorField> h2xr_killing(const ManifoldPtr& m) {
  return {vfield(m, {"F + y^2", "-x*y", "0"}, "X1"), vfield(m, {"-x*y", "F + x^2", "0"}, "X2"),
          vfield(m, {"-y", "x", "0"}, "X3"), vfield(m, {"0", "0", "1"}, "X4")};
}

// Uniform random points in a box that satisfy `accept`; independent of the
// library's sampler.
template <typename Accept>
std::vector<Point> random_points(std::size_t count, const std::vector<std::pair<double, double>>& box,
                                 std::uint64_t seed, Accept accept) {
  std::mt19937_64 rng(seed);
  std::vector<Point> out;
  while (out.size() < count) {
    Point p;
    for (const auto& [lo, hi] : box) p.push_back(std::uniform_real_distribution<double>(lo, hi)(rng));
    if (accept(p)) out.push_back(p);
  }
  return out;
}

inline std::vector<Point> random_points(std::size_t count, const std::vector<std::pair<double, double>>& box,
                                        std::uint64_t seed = 1) {
  return random_points(count, box, seed, [](const Point&) { return true; });
}

// Central difference of an expression in one coordinate, step 1e-6 (1 + |x|).
inline double fd_partial(const Expression& e, Point p, std::size_t i) {
  const double h = 1e-6 * (1.0 + std::fabs(p[i]));
  const double x = p[i];
  p[i] = x + h;
  const double up = equipart::evaluate(e, p);
  p[i] = x - h;
  const double down = equipart::evaluate(e, p);
  return (up - down) / (2.0 * h);
}

}  // namespace test

#include "equipart/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "equipart/error.hpp"

namespace equipart {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

WarpedPlane::WarpedPlane(std::string name, Expression f, double r_min, double r_max)
    : name_(std::move(name)), f_(std::move(f)), r_min_(r_min), r_max_(r_max) {
  if (!(r_min_ < r_max_)) throw GeometryError("warp `" + name_ + "`: empty r range");
  if (variable_bound(f_) > 1) throw GeometryError("warp `" + name_ + "`: f may only use r");
  df_ = differentiate(f_, 0);
  d2f_ = differentiate(df_, 0);
  c_ = df_ * df_ - f_ * d2f_;
  for (int i = 0; i <= 64; ++i) {
    const double r = r_min_ + (r_max_ - r_min_) * i / 64.0;
    if (r <= 0.0 && i == 0) continue;  // a pole at r = 0 is allowed
    const double v = value(r);
    if (!(v > 0.0)) {
      throw GeometryError("warp `" + name_ + "`: f(" + format_g17(r) + ") = " + format_g17(v) +
                          " is not positive");
    }
  }
  if (r_min_ <= 1e-12) {
    const double at_pole = value(0.0);
    if (std::fabs(at_pole) > 1e-9) {
      throw GeometryError("warp `" + name_ + "`: range starts at the pole but f(0) = " +
                          format_g17(at_pole));
    }
  }
  const std::vector<std::string> coords{"r", "theta"};
  const Domain domain = Domain::parse("r > " + format_g17(r_min_) + " & r < " + format_g17(r_max_),
                                      coords);
  manifold_ = std::make_shared<const Manifold>(
      name_, coords,
      std::vector<std::vector<Expression>>{{Expression(1.0), Expression(0.0)},
                                           {Expression(0.0), f_ * f_}},
      domain);
}

WarpedPlane WarpedPlane::parse(std::string name, std::string_view f_text, double r_min,
                               double r_max) {
  const std::vector<std::string> vars{"r"};
  return WarpedPlane(std::move(name), equipart::parse(f_text, vars), r_min, r_max);
}

double WarpedPlane::value(double r) const { return evaluate(f_, std::span<const double>(&r, 1)); }
double WarpedPlane::derivative(double r) const {
  return evaluate(df_, std::span<const double>(&r, 1));
}
double WarpedPlane::second_derivative(double r) const {
  return evaluate(d2f_, std::span<const double>(&r, 1));
}
double WarpedPlane::gauss_curvature(double r) const { return -second_derivative(r) / value(r); }

double pairwise_sum(std::span<const double> terms) {
  if (terms.size() <= 8) {
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
  }
  const std::size_t half = terms.size() / 2;
  return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

RitoreResult ritore_criterion(const WarpedPlane& w, std::size_t samples, double tol) {
  if (samples < 2) throw GeometryError("ritore_criterion needs at least two samples");
  RitoreResult out;
  CheckReport& rep = out.report;
  rep.tolerance = tol;
  std::optional<std::size_t> worst;
  for (std::size_t i = 0; i < samples; ++i) {
    const double r = w.r_min() + (w.r_max() - w.r_min()) * static_cast<double>(i) /
                                     static_cast<double>(samples - 1);
    if (r <= 0.0) {
      ++rep.samples_excluded;  // the pole itself
      continue;
    }
    if (!(w.value(r) > 0.0)) {
      throw GeometryError("warp `" + w.name() + "`: f <= 0 at r = " + format_g17(r));
    }
    const double c = evaluate(w.criterion(), std::span<const double>(&r, 1));
    out.r.push_back(r);
    out.c.push_back(c);
    ++rep.samples_used;
    rep.max_residual = std::max(rep.max_residual, std::fabs(c - 1.0));
    if (!worst || c > out.c[*worst]) worst = out.c.size() - 1;
  }
  rep.verdict = Verdict::Consistent;
  if (worst && out.c[*worst] > 1.0 + tol) {
    rep.label = "UNSTABLE";
    rep.witness = Point{out.r[*worst]};
    rep.witness_residual = out.c[*worst] - 1.0;
    rep.notes.push_back("f'^2 - f f'' = " + format_g17(out.c[*worst]) + " > 1 at r = " +
                        format_g17(out.r[*worst]) + ": circles there are unstable");
  } else {
    rep.label = "STABLE-CANDIDATE";
    rep.notes.push_back("f'^2 - f f'' <= 1 on the sampled range");
  }
  return out;
}

double second_variation_mode(const WarpedPlane& w, double r0, int k, std::size_t nodes) {
  const double f = w.value(r0);
  const double fp = w.derivative(r0);
  const double kappa = fp / f;
  const double curvature = w.gauss_curvature(r0);
  std::vector<double> terms(nodes);
  const double dtheta = kTwoPi / static_cast<double>(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double th = dtheta * static_cast<double>(i);
    const double u = std::cos(k * th);
    const double u_s = -k * std::sin(k * th) / f;  // d/ds = (1/f) d/dtheta
    terms[i] = (u_s * u_s - (curvature + kappa * kappa) * u * u) * f;  // ds = f dtheta
  }
  return pairwise_sum(terms) * dtheta;
}

double perturbed_length(const WarpedPlane& w, double r0, int k, double eps, std::size_t nodes) {
  std::vector<double> terms(nodes);
  const double dtheta = kTwoPi / static_cast<double>(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double th = dtheta * static_cast<double>(i);
    const double u = k == 0 ? 1.0 : std::cos(k * th);
    const double du = k == 0 ? 0.0 : -k * std::sin(k * th);
    const double r = r0 - eps * u;
    const double rt = -eps * du;
    const double f = w.value(r);
    terms[i] = std::sqrt(rt * rt + f * f);
  }
  return pairwise_sum(terms) * dtheta;
}

namespace {

double length_derivative(const WarpedPlane& w, double r0, int k,
                         const FirstVariationOptions& o) {
  auto central = [&](double e) {
    return (perturbed_length(w, r0, k, e, o.nodes) - perturbed_length(w, r0, k, -e, o.nodes)) /
           (2.0 * e);
  };
  return (4.0 * central(o.epsilon) - central(2.0 * o.epsilon)) / 3.0;
}

}  // namespace

FirstVariationResult first_variation_check(const WarpedPlane& w, double r0,
                                           std::span<const int> modes,
                                           const FirstVariationOptions& options) {
  if (!(r0 > w.r_min() && r0 < w.r_max())) {
    throw GeometryError("first_variation_check: r0 outside the warp range");
  }
  FirstVariationResult out;
  out.length = perturbed_length(w, r0, 0, 0.0, options.nodes);
  // Mean curvature of the level set r = r0 from the geometry module.
  const ScalarField radius(w.manifold(), Expression::variable("r", 0), "r");
  const std::vector<double> p{r0, 0.0};
  out.mean_curvature = mean_curvature_level_set(radius, p).mean;
  const double bound = options.rel_tol * out.length;

  CheckReport& rep = out.report;
  rep.tolerance = options.rel_tol;
  rep.verdict = Verdict::Consistent;
  for (int k : modes) {
    if (k < 1) throw GeometryError("first_variation_check: modes must be >= 1");
    ModeDerivative md{k, length_derivative(w, r0, k, options)};
    out.modes.push_back(md);
    ++rep.samples_used;
    const double rel = std::fabs(md.a_prime) / out.length;
    SubCheck s{"mode" + std::to_string(k), Verdict::Consistent, rel, options.rel_tol, 1, 0,
               std::nullopt};
    if (std::fabs(md.a_prime) > bound) {
      s.verdict = Verdict::Refuted;
      s.witness = Point{r0, static_cast<double>(k)};
    }
    rep.max_residual = std::max(rep.max_residual, rel);
    if (s.verdict == Verdict::Refuted && rep.verdict != Verdict::Refuted) {
      rep.verdict = Verdict::Refuted;
      rep.witness = s.witness;
      rep.witness_residual = rel;
    }
    rep.sub_checks.push_back(std::move(s));
  }

  out.control = {0, length_derivative(w, r0, 0, options)};
  out.control_expected = -1.0 * out.mean_curvature * out.length;  // n - 1 = 1
  const double control_err = std::fabs(out.control.a_prime - out.control_expected) /
                             std::max(1e-300, std::fabs(out.control_expected));
  SubCheck control{"control", Verdict::Consistent, control_err, options.control_tol, 1, 0,
                   std::nullopt};
  if (!(control_err <= options.control_tol)) {
    control.verdict = Verdict::Refuted;
    control.witness = Point{r0, 0.0};
    if (rep.verdict == Verdict::Consistent) rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("constant-mode control does not match -(n-1) H L; quadrature not trusted");
  }
  rep.sub_checks.push_back(std::move(control));
  rep.notes.push_back("constant mode A'(0) = " + format_g17(out.control.a_prime) +
                      " (not volume preserving; expected " + format_g17(out.control_expected) + ")");
  return out;
}

namespace {

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const unsigned un = static_cast<unsigned>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double p = std::legendre(un, z);
      dp = static_cast<double>(n) * (z * p - std::legendre(un - 1, z)) / (z * z - 1.0);
      const double dz = p / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

double sphere_area_derivative(double radius, int l, double epsilon, std::size_t nodes) {
  // Axisymmetric radial graph r = R - eps P_l(x), x = cos(theta):
  // dA = 2 pi r sqrt(r^2 + r_theta^2) dx.
  std::vector<double> xs;
  std::vector<double> ws;
  gauss_legendre(nodes, xs, ws);
  const unsigned ul = static_cast<unsigned>(l);
  auto area = [&](double eps) {
    std::vector<double> terms(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      const double x = xs[i];
      const double p = std::legendre(ul, x);
      const double dp = l == 0 ? 0.0 : l * (x * p - std::legendre(ul - 1, x)) / (x * x - 1.0);
      const double r = radius - eps * p;
      const double rt = eps * dp * std::sqrt(1.0 - x * x);
      terms[i] = ws[i] * kTwoPi * r * std::sqrt(r * r + rt * rt);
    }
    return pairwise_sum(terms);
  };
  auto central = [&](double e) { return (area(e) - area(-e)) / (2.0 * e); };
  return (4.0 * central(epsilon) - central(2.0 * epsilon)) / 3.0;
}

}  // namespace equipart

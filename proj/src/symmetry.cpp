#include "equipart/symmetry.hpp"

#include <algorithm>
#include <cmath>

#include "equipart/error.hpp"
#include "equipart/parallel.hpp"

namespace equipart {

namespace {

Program compile_field(const VectorField& field) {
  const std::size_t n = field.components.size();
  std::vector<Expression> out = field.components;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t c = 0; c < n; ++c) out.push_back(differentiate(field.components[c], a));
  }
  return Program(out);
}

}  // namespace

KillingOperator::KillingOperator(const VectorField& field)
    : field_(field), program_(compile_field(field)) {}

std::vector<double> KillingOperator::tensor(std::span<const double> p) const {
  const Manifold& m = *field_.manifold;
  const std::size_t n = m.dim();
  if (!m.contains(p)) throw GeometryError("killing_residual: point outside the domain");
  std::vector<double> g(n * n);
  std::vector<double> dg(n * n * n);
  m.evaluate_metric(p, g, dg);
  const std::vector<double> v = program_.evaluate(p);
  auto X = [&](std::size_t c) { return v[c]; };
  auto dX = [&](std::size_t a, std::size_t c) { return v[n + a * n + c]; };
  auto G = [&](std::size_t i, std::size_t j) { return g[i * n + j]; };
  auto dG = [&](std::size_t k, std::size_t i, std::size_t j) { return dg[(k * n + i) * n + j]; };

  // d_a xi_b with xi_b = g_bc X^c.
  std::vector<double> dxi(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += dG(a, b, c) * X(c) + G(b, c) * dX(a, c);
      dxi[a * n + b] = s;
    }
  }
  // Gamma^c_ab xi_c equals Gamma_{d,ab} X^d with the first-kind symbols.
  std::vector<double> k(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double gx = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        gx += 0.5 * (dG(a, b, d) + dG(b, a, d) - dG(d, a, b)) * X(d);
      }
      k[a * n + b] = dxi[a * n + b] + dxi[b * n + a] - 2.0 * gx;
    }
  }
  return k;
}

double KillingOperator::residual(std::span<const double> p) const {
  const Manifold& m = *field_.manifold;
  const std::size_t n = m.dim();
  const std::vector<double> k = tensor(p);
  std::vector<double> g(n * n);
  m.evaluate_metric(p, g, {});
  double kmax = 0.0;
  double gmax = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) {
    kmax = std::max(kmax, std::fabs(k[i]));
    gmax = std::max(gmax, std::fabs(g[i]));
  }
  double xmax = 0.0;
  for (double x : field_.at(p)) xmax = std::max(xmax, std::fabs(x));
  return kmax / (1.0 + gmax * xmax);
}

double killing_residual(const VectorField& field, std::span<const double> p) {
  return KillingOperator(field).residual(p);
}

VectorField lie_bracket(const VectorField& x, const VectorField& y) {
  if (x.manifold != y.manifold) throw GeometryError("lie_bracket: fields on different manifolds");
  const std::size_t n = x.components.size();
  std::vector<Expression> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Expression s;
    for (std::size_t j = 0; j < n; ++j) {
      s = s + x.components[j] * differentiate(y.components[i], j) -
          y.components[j] * differentiate(x.components[i], j);
    }
    out[i] = s;
  }
  return VectorField(x.manifold, std::move(out), "[" + x.name + "," + y.name + "]");
}

std::size_t pointwise_rank(std::span<const VectorField> fields, std::span<const double> p,
                           double rel_threshold) {
  if (fields.empty()) return 0;
  const long n = static_cast<long>(fields.front().components.size());
  Eigen::MatrixXd a(static_cast<long>(fields.size()), n);
  for (std::size_t r = 0; r < fields.size(); ++r) {
    const auto v = fields[r].at(p);
    for (long c = 0; c < n; ++c) a(static_cast<long>(r), c) = v[static_cast<std::size_t>(c)];
  }
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  std::size_t rank = 0;
  for (long i = 0; i < sv.size(); ++i) {
    if (sv(i) >= rel_threshold * sv(0)) ++rank;
  }
  return rank;
}

double invariance_residual(const ScalarField& f, const VectorField& x, std::span<const double> p) {
  const std::size_t n = x.components.size();
  const MetricSample ms = metric_at(*f.manifold, p);
  std::vector<double> df(n);
  for (std::size_t i = 0; i < n; ++i) df[i] = evaluate(differentiate(f.expr, i), p);
  const std::vector<double> v = x.at(p);
  double xf = 0.0;
  for (std::size_t i = 0; i < n; ++i) xf += v[i] * df[i];
  return std::fabs(xf) / (1.0 + vector_norm(ms, v) * covector_norm(ms, df));
}

CheckReport check_killing_induced_equilibrium(const KillingAlgebra& algebra, const ScalarField& f,
                                              const SamplePlan& plan,
                                              const SymmetryOptions& options) {
  const Manifold& m = *f.manifold;
  const std::size_t n = m.dim();
  for (const auto& x : algebra.fields) {
    if (x.manifold != f.manifold) {
      throw GeometryError("vector field `" + x.name + "` is not on the field's manifold");
    }
  }
  const std::size_t expected = algebra.expected_rank ? algebra.expected_rank : n - 1;
  if (algebra.fields.size() < expected) {
    throw GeometryError("algebra has " + std::to_string(algebra.fields.size()) +
                        " fields, fewer than the expected rank " + std::to_string(expected));
  }
  const double tol = options.check.tol;
  const std::vector<Point> samples = sample_domain(f, plan);
  std::vector<KillingOperator> killing;
  for (const auto& x : algebra.fields) killing.emplace_back(x);
  const FieldCalculus fc(f);

  struct Outcome {
    bool ok = false;
    double killing = 0.0;
    bool rank_ok = false;
    double invariance = 0.0;
  };
  std::vector<Outcome> outcome(samples.size());
  parallel_for(samples.size(), options.check.threads, [&](std::size_t i) {
    const Point& p = samples[i];
    Outcome& o = outcome[i];
    try {
      const MetricSample ms = metric_at(m, p);
      const auto jet = fc.jet(p);
      const double dfn = covector_norm(ms, jet.df);
      for (std::size_t k = 0; k < killing.size(); ++k) {
        o.killing = std::max(o.killing, killing[k].residual(p));
        const std::vector<double> v = algebra.fields[k].at(p);
        double xf = 0.0;
        for (std::size_t j = 0; j < n; ++j) xf += v[j] * jet.df[j];
        o.invariance =
            std::max(o.invariance, std::fabs(xf) / (1.0 + vector_norm(ms, v) * dfn));
      }
      o.rank_ok = pointwise_rank(algebra.fields, p) == expected;
      o.ok = true;
    } catch (const Error&) {
    }
  });

  auto leg = [&](const char* name, auto value) {
    SubCheck s{name, Verdict::Consistent, 0.0, tol, 0, 0, std::nullopt};
    std::optional<std::size_t> worst;
    for (std::size_t i = 0; i < outcome.size(); ++i) {
      if (!outcome[i].ok) {
        ++s.excluded;
        continue;
      }
      ++s.samples;
      const double r = value(outcome[i]);
      if (!worst || r > s.max_residual) {
        s.max_residual = r;
        worst = i;
      }
    }
    if (worst && s.max_residual > tol) {
      s.verdict = Verdict::Refuted;
      s.witness = samples[*worst];
    } else if (2 * s.excluded > samples.size()) {
      s.verdict = Verdict::Inconclusive;
    }
    return s;
  };
  SubCheck a = leg("killing", [](const Outcome& o) { return o.killing; });
  SubCheck c = leg("invariance", [](const Outcome& o) { return o.invariance; });

  SubCheck b{"rank", Verdict::Consistent, 0.0, options.rank_allowance, 0, 0, std::nullopt};
  std::size_t misses = 0;
  for (std::size_t i = 0; i < outcome.size(); ++i) {
    if (!outcome[i].ok) {
      ++b.excluded;
      continue;
    }
    ++b.samples;
    if (!outcome[i].rank_ok) {
      if (!b.witness) b.witness = samples[i];
      ++misses;
    }
  }
  b.max_residual = b.samples ? static_cast<double>(misses) / static_cast<double>(b.samples) : 0.0;
  if (b.max_residual > options.rank_allowance) {
    b.verdict = Verdict::Refuted;
  } else {
    b.witness.reset();
    if (2 * b.excluded > samples.size()) b.verdict = Verdict::Inconclusive;
  }

  const CheckReport eq = check_equilibrium(fc, samples, plan.eps_crit, options.check);
  SubCheck d{"equilibrium", eq.verdict, eq.max_residual, tol, eq.samples_used,
             eq.samples_excluded, eq.witness};

  CheckReport report;
  report.tolerance = tol;
  report.sub_checks = {a, b, c, d};
  report.samples_used = d.samples;
  report.samples_excluded = d.excluded;
  report.max_residual = std::max({a.max_residual, c.max_residual, d.max_residual});
  report.verdict = Verdict::Consistent;
  for (const SubCheck& s : report.sub_checks) {
    if (s.verdict == Verdict::Refuted) {
      report.verdict = Verdict::Refuted;
      report.witness = s.witness;
      report.witness_residual = s.max_residual;
      report.notes.push_back("leg `" + s.name + "` failed");
      break;
    }
  }
  if (report.verdict == Verdict::Consistent) {
    for (const SubCheck& s : report.sub_checks) {
      if (s.verdict == Verdict::Inconclusive) report.verdict = Verdict::Inconclusive;
    }
  }
  const bool hypotheses = a.verdict == Verdict::Consistent && b.verdict == Verdict::Consistent &&
                          c.verdict == Verdict::Consistent;
  if (hypotheses && d.verdict == Verdict::Refuted) {
    report.notes.push_back(
        "RED FLAG: Killing, rank and invariance legs pass but the equilibrium leg is refuted");
  }
  report.notes.push_back("unchecked hypothesis: the fields generate a closed subgroup of isometries");
  if (n == 2) {
    report.notes.push_back(
        "in dimension 2 the converse (equilibrium partitions come from Killing fields) is not checked");
  }
  return report;
}

Point integrate_flow(const VectorField& x, std::span<const double> p, double t, std::size_t steps) {
  const std::size_t n = p.size();
  Point s(p.begin(), p.end());
  const double h = t / static_cast<double>(steps);
  auto rhs = [&](const Point& q) { return x.at(q); };
  auto add = [&](const Point& a, const std::vector<double>& d, double c) {
    Point r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = a[i] + c * d[i];
    return r;
  };
  for (std::size_t k = 0; k < steps; ++k) {
    const auto k1 = rhs(s);
    const auto k2 = rhs(add(s, k1, 0.5 * h));
    const auto k3 = rhs(add(s, k2, 0.5 * h));
    const auto k4 = rhs(add(s, k3, h));
    for (std::size_t i = 0; i < n; ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return s;
}

}  // namespace equipart

#include "equipart/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "equipart/error.hpp"
#include "equipart/parallel.hpp"

namespace equipart {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Consistent: return "CONSISTENT";
    case Verdict::Refuted: return "REFUTED";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

std::vector<Point> sample_domain(const Manifold& m, const SamplePlan& plan, const Domain& extra) {
  const std::size_t n = m.dim();
  if (plan.samples == 0) throw SamplingError("sample plan must request at least one sample");
  if (plan.box.size() != n) {
    throw SamplingError("sample plan box has " + std::to_string(plan.box.size()) +
                        " intervals for a " + std::to_string(n) + "-dimensional manifold");
  }
  if (n > std::size(kPrimes)) throw SamplingError("sampling supports at most 16 dimensions");
  for (const auto& iv : plan.box) {
    if (!(iv.hi > iv.lo)) throw SamplingError("sample plan box has an empty interval");
  }

  // Cranley-Patterson rotation of the Halton sequence, one shift per axis.
  std::mt19937_64 rng(plan.seed);
  std::vector<double> shift(n);
  for (auto& s : shift) s = static_cast<double>(rng() >> 11) * 0x1p-53;

  const std::size_t budget = plan.max_attempts ? plan.max_attempts : 1000 * plan.samples;
  std::vector<Point> out;
  out.reserve(plan.samples);
  Point p(n);
  for (std::uint64_t i = 1; out.size() < plan.samples; ++i) {
    if (i > budget) {
      throw SamplingError("rejection budget exhausted: accepted " + std::to_string(out.size()) +
                          " of " + std::to_string(plan.samples) + " samples after " +
                          std::to_string(budget) + " candidates (domain too thin in the box?)");
    }
    for (std::size_t d = 0; d < n; ++d) {
      double u = radical_inverse(i, kPrimes[d]) + shift[d];
      if (u >= 1.0) u -= 1.0;
      p[d] = plan.box[d].lo + u * (plan.box[d].hi - plan.box[d].lo);
    }
    if (m.contains(p) && extra.contains(p)) out.push_back(p);
  }
  return out;
}

std::vector<Point> sample_domain(const ScalarField& f, const SamplePlan& plan) {
  return sample_domain(*f.manifold, plan, f.domain);
}

// ---------------------------------------------------------------------------
// Dependence residual

DependenceResult dependence_residual(const MetricSample& ms, std::span<const double> da,
                                     std::span<const double> db, double eps_crit) {
  const long n = static_cast<long>(da.size());
  const Eigen::Map<const Eigen::VectorXd> a(da.data(), n);
  const Eigen::Map<const Eigen::VectorXd> b(db.data(), n);
  const double na = std::sqrt(std::max(0.0, a.dot(ms.inverse * a)));
  const double nb = std::sqrt(std::max(0.0, b.dot(ms.inverse * b)));
  DependenceResult r;
  r.a_degenerate = na <= eps_crit;
  r.b_degenerate = nb <= eps_crit;
  if (na == 0.0 || nb == 0.0) return r;
  // Normalise first, then take the part of b orthogonal to a; this keeps the
  // residual accurate when the covectors are nearly parallel.
  const Eigen::VectorXd ua = a / na;
  const Eigen::VectorXd ub = b / nb;
  const Eigen::VectorXd perp = ub - ua.dot(ms.inverse * ub) * ua;
  const double wedge = std::sqrt(std::max(0.0, perp.dot(ms.inverse * perp)));
  const double scale = na * nb;
  r.residual = std::min(1.0, wedge * scale / (scale + kEpsAbs));
  return r;
}

DependenceResult dependence_residual(const ScalarField& a, const ScalarField& b,
                                     std::span<const double> p, double eps_crit) {
  if (a.manifold != b.manifold) throw GeometryError("dependence_residual: fields on different manifolds");
  const MetricSample ms = metric_at(*a.manifold, p);
  const std::size_t n = a.manifold->dim();
  std::vector<double> da(n);
  std::vector<double> db(n);
  for (std::size_t i = 0; i < n; ++i) {
    da[i] = evaluate(differentiate(a.expr, i), p);
    db[i] = evaluate(differentiate(b.expr, i), p);
  }
  return dependence_residual(ms, da, db, eps_crit);
}

// ---------------------------------------------------------------------------
// Equilibrium check

namespace {

struct SampleOutcome {
  bool excluded = true;
  double grad_residual = 0.0;
  double lap_residual = 0.0;
};

}  // namespace

CheckReport check_equilibrium(const FieldCalculus& f, std::span<const Point> samples,
                              double eps_crit, const CheckOptions& options) {
  const Manifold& m = f.manifold();
  std::vector<SampleOutcome> outcome(samples.size());
  parallel_for(samples.size(), options.threads, [&](std::size_t i) {
    const Point& p = samples[i];
    SampleOutcome& o = outcome[i];
    try {
      const MetricSample ms = metric_at(m, p);
      const auto t = f.triple(p);
      if (!std::isfinite(t.grad_norm_sq) || !std::isfinite(t.laplacian)) return;
      const auto rg = dependence_residual(ms, t.df, t.d_grad_norm_sq, eps_crit);
      if (rg.a_degenerate) return;
      const auto rl = dependence_residual(ms, t.df, t.d_laplacian, eps_crit);
      o.excluded = false;
      o.grad_residual = rg.residual;
      o.lap_residual = rl.residual;
    } catch (const Error&) {
      // Not evaluable here (singular set): excluded.
    }
  });

  CheckReport report;
  report.tolerance = options.tol;
  SubCheck grad{"grad_norm_sq", Verdict::Consistent, 0.0, options.tol, 0, 0, std::nullopt};
  SubCheck lap{"laplacian", Verdict::Consistent, 0.0, options.tol, 0, 0, std::nullopt};
  std::optional<std::size_t> worst;
  std::optional<std::size_t> worst_grad;
  std::optional<std::size_t> worst_lap;
  // First index attaining the maximum, so the witness is order independent.
  auto track = [](double r, std::size_t i, double& best, std::optional<std::size_t>& at) {
    if (!at || r > best) {
      best = r;
      at = i;
    }
  };
  for (std::size_t i = 0; i < outcome.size(); ++i) {
    const SampleOutcome& o = outcome[i];
    if (o.excluded) {
      ++report.samples_excluded;
      continue;
    }
    ++report.samples_used;
    track(o.grad_residual, i, grad.max_residual, worst_grad);
    track(o.lap_residual, i, lap.max_residual, worst_lap);
    track(std::max(o.grad_residual, o.lap_residual), i, report.max_residual, worst);
  }
  for (SubCheck* s : {&grad, &lap}) {
    s->samples = report.samples_used;
    s->excluded = report.samples_excluded;
    if (s->max_residual > options.tol) {
      s->verdict = Verdict::Refuted;
      s->witness = samples[s == &grad ? *worst_grad : *worst_lap];
    }
  }
  report.sub_checks = {grad, lap};

  if (worst && report.max_residual > options.tol) {
    report.verdict = Verdict::Refuted;
    report.witness = samples[*worst];
    report.witness_residual = report.max_residual;
  } else if (2 * report.samples_excluded > samples.size()) {
    report.verdict = Verdict::Inconclusive;
    report.notes.push_back("more than half of the samples were excluded");
  } else {
    report.verdict = Verdict::Consistent;
    report.notes.push_back("no counterexample at tolerance over the sampling plan");
  }
  return report;
}

CheckReport check_equilibrium(const ScalarField& f, const SamplePlan& plan,
                              const CheckOptions& options) {
  const std::vector<Point> samples = sample_domain(f, plan);
  return check_equilibrium(FieldCalculus(f), samples, plan.eps_crit, options);
}

// ---------------------------------------------------------------------------
// Tabulated fields

CheckReport check_tabulated(std::span<const TabulatedSample> samples, double tol,
                            double group_tol) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].f < samples[b].f; });

  CheckReport report;
  report.tolerance = tol;
  report.samples_used = samples.size();
  std::optional<std::size_t> worst;
  auto spread_of = [&](std::size_t begin, std::size_t end, auto member) {
    double lo = member(samples[order[begin]]);
    double hi = lo;
    double sum = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const double v = member(samples[order[k]]);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    const double mean = sum / static_cast<double>(end - begin);
    return (hi - lo) / (1.0 + std::fabs(mean));
  };
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin + 1;
    const double f0 = samples[order[begin]].f;
    while (end < order.size() &&
           samples[order[end]].f - f0 <= group_tol * (1.0 + std::fabs(f0))) {
      ++end;
    }
    const double s = std::max(spread_of(begin, end, [](const auto& t) { return t.grad_norm_sq; }),
                              spread_of(begin, end, [](const auto& t) { return t.laplacian; }));
    if (!worst || s > report.max_residual) {
      report.max_residual = std::max(report.max_residual, s);
      worst = order[begin];
    }
    begin = end;
  }
  if (worst && report.max_residual > tol) {
    report.verdict = Verdict::Refuted;
    report.witness = samples[*worst].where;
    report.witness_residual = report.max_residual;
  }
  return report;
}

}  // namespace equipart

#include "equipart/polar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "equipart/error.hpp"
#include "equipart/parallel.hpp"

namespace equipart {

Point exp_map(const Manifold& m, std::span<const double> p, std::span<const double> v, double r,
              std::size_t steps) {
  const GeodesicPath path = integrate_geodesic(m, p, v, r, steps, false);
  if (path.exited_domain) throw GeometryError("exp_map: geodesic leaves the domain before length r");
  return path.end().position;
}

std::vector<std::vector<double>> direction_grid(std::size_t dim, std::size_t count) {
  std::vector<std::vector<double>> out;
  if (dim == 2) {
    for (std::size_t t = 0; t < count; ++t) {
      out.push_back({2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(count)});
    }
    return out;
  }
  if (dim == 3) {
    const std::size_t rows = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(count)))));
    const std::size_t cols = std::max<std::size_t>(1, count / rows);
    for (std::size_t a = 0; a < rows; ++a) {
      for (std::size_t b = 0; b < cols; ++b) {
        out.push_back({(static_cast<double>(a) + 0.5) * std::numbers::pi / static_cast<double>(rows),
                       2.0 * std::numbers::pi * static_cast<double>(b) / static_cast<double>(cols)});
      }
    }
    return out;
  }
  throw GeometryError("polar coordinates are only built in dimension 2 or 3, not " +
                      std::to_string(dim));
}

namespace {

std::vector<double> unit_vector(std::span<const double> angles) {
  if (angles.size() == 1) return {std::cos(angles[0]), std::sin(angles[0])};
  const double th = angles[0];
  const double ph = angles[1];
  return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

// Columns form a g-orthonormal basis at p: E = L^{-T} for g = L L^T.
Eigen::MatrixXd orthonormal_frame(const Manifold& m, std::span<const double> p) {
  const MetricSample ms = metric_at(m, p);
  const Eigen::LLT<Eigen::MatrixXd> llt(ms.g);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(ms.g.rows(), ms.g.cols());
  return llt.matrixU().solve(id);
}

std::vector<double> direction_in_frame(const Eigen::MatrixXd& frame,
                                       std::span<const double> angles) {
  const std::vector<double> u = unit_vector(angles);
  const long n = frame.rows();
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (long i = 0; i < n; ++i) {
    for (long k = 0; k < n; ++k) v[static_cast<std::size_t>(i)] += frame(i, k) * u[static_cast<std::size_t>(k)];
  }
  return v;
}

// A central ray plus two neighbours per angle (angle +- delta), advanced in
// lockstep so the angular Jacobian columns come from central differences.
struct Fan {
  std::vector<GeodesicState> rays;
};

Fan start_fan(std::span<const double> center, const Eigen::MatrixXd& frame,
              std::span<const double> angles, double delta) {
  Fan fan;
  auto ray = [&](std::vector<double> a) {
    return GeodesicState{Point(center.begin(), center.end()), direction_in_frame(frame, a)};
  };
  fan.rays.push_back(ray({angles.begin(), angles.end()}));
  for (std::size_t k = 0; k < angles.size(); ++k) {
    std::vector<double> plus(angles.begin(), angles.end());
    std::vector<double> minus(angles.begin(), angles.end());
    plus[k] += delta;
    minus[k] -= delta;
    fan.rays.push_back(ray(plus));
    fan.rays.push_back(ray(minus));
  }
  return fan;
}

void advance(const Manifold& m, Fan& fan, double h) {
  for (auto& s : fan.rays) s = rk4_geodesic_step(m, s, h);
}

bool inside(const Manifold& m, const Fan& fan) {
  for (const auto& s : fan.rays) {
    if (!m.contains(s.position)) return false;
  }
  return true;
}

PolarSample measure(const Manifold& m, const Fan& fan, double delta) {
  const std::size_t n = m.dim();
  const long ln = static_cast<long>(n);
  Eigen::MatrixXd jac(ln, ln);
  const GeodesicState& c = fan.rays[0];
  for (std::size_t i = 0; i < n; ++i) jac(static_cast<long>(i), 0) = c.velocity[i];
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Point& plus = fan.rays[1 + 2 * k].position;
    const Point& minus = fan.rays[2 + 2 * k].position;
    for (std::size_t i = 0; i < n; ++i) {
      jac(static_cast<long>(i), static_cast<long>(k + 1)) = (plus[i] - minus[i]) / (2.0 * delta);
    }
  }
  std::vector<double> gv(n * n);
  m.evaluate_metric(c.position, gv, {});
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(
      gv.data(), ln, ln);
  const Eigen::MatrixXd pulled = jac.transpose() * g * jac;
  PolarSample s;
  s.position = c.position;
  s.det = pulled.determinant();
  s.jacobian_det = jac.determinant();
  s.g_rr = pulled(0, 0);
  s.g_rr_inverse = pulled.inverse()(0, 0);
  return s;
}

Fan stepped(const Manifold& m, Fan fan, double h) {
  advance(m, fan, h);
  return fan;
}

}  // namespace

std::vector<double> polar_direction(const Manifold& m, std::span<const double> center,
                                    std::span<const double> angles) {
  return direction_in_frame(orthonormal_frame(m, center), angles);
}

PolarSample polar_det(const Manifold& m, std::span<const double> center,
                      std::span<const double> angles, double r, const PolarOptions& options) {
  if (angles.size() + 1 != m.dim()) throw GeometryError("polar_det: wrong number of angles");
  const Eigen::MatrixXd frame = orthonormal_frame(m, center);
  const double delta = options.delta_rel * options.rmax;
  Fan fan = start_fan(center, frame, angles, delta);
  const std::size_t steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(r * options.steps_per_unit)));
  const double h = r / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    advance(m, fan, h);
    if (!inside(m, fan)) throw GeometryError("polar_det: geodesic leaves the domain");
  }
  return measure(m, fan, delta);
}

PolarPatch build_polar_patch(const Manifold& m, std::span<const double> center,
                             const PolarOptions& options) {
  const std::size_t n = m.dim();
  if (n != 2 && n != 3) {
    throw GeometryError("polar coordinates are only built in dimension 2 or 3, not " +
                        std::to_string(n));
  }
  if (!(options.rmax > 0.0) || options.radii == 0 || options.directions == 0) {
    throw GeometryError("polar patch needs rmax > 0 and non-empty grids");
  }
  PolarPatch patch;
  patch.center.assign(center.begin(), center.end());
  patch.angles = direction_grid(n, options.directions);
  const std::size_t R = options.radii;
  const std::size_t T = patch.angles.size();
  const double dr = options.rmax / static_cast<double>(R);
  for (std::size_t j = 1; j <= R; ++j) patch.radii.push_back(dr * static_cast<double>(j));
  const std::size_t per_interval =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dr * options.steps_per_unit)));
  const double h = dr / static_cast<double>(per_interval);
  const double delta = options.delta_rel * options.rmax;
  const Eigen::MatrixXd frame = orthonormal_frame(m, center);

  patch.samples.assign(T, {});
  patch.log_derivative.assign(T, {});
  std::vector<std::size_t> usable(T, 0);
  std::vector<std::string> reason(T);
  parallel_for(T, options.threads, [&](std::size_t t) {
    Fan fan = start_fan(center, frame, patch.angles[t], delta);
    double sign = 0.0;
    try {
      for (std::size_t j = 0; j < R; ++j) {
        for (std::size_t k = 0; k < per_interval; ++k) advance(m, fan, h);
        if (!inside(m, fan)) {
          reason[t] = "geodesic leaves the domain";
          return;
        }
        const double r = patch.radii[j];
        const Fan lo = stepped(m, fan, -delta);
        const Fan hi = stepped(m, fan, delta);
        if (!inside(m, lo) || !inside(m, hi)) {
          reason[t] = "geodesic leaves the domain";
          return;
        }
        const PolarSample s = measure(m, fan, delta);
        const PolarSample s_lo = measure(m, lo, delta);
        const PolarSample s_hi = measure(m, hi, delta);
        if (sign == 0.0) sign = s.jacobian_det > 0.0 ? 1.0 : -1.0;
        if (!(s.jacobian_det * sign > 0.0) || !(s_lo.jacobian_det * sign > 0.0) ||
            !(s_hi.jacobian_det * sign > 0.0) || !(s_lo.det > 0.0)) {
          reason[t] = "conjugate point (Jacobian determinant changes sign)";
          return;
        }
        const double ds = std::log((r + delta) * std::sqrt(s_hi.det)) -
                          std::log((r - delta) * std::sqrt(s_lo.det));
        patch.samples[t].push_back(s);
        patch.log_derivative[t].push_back(ds / (2.0 * delta));
        usable[t] = j + 1;
      }
    } catch (const Error&) {
      reason[t] = "geodesic integration failed (metric singular)";
    }
  });

  patch.usable = *std::min_element(usable.begin(), usable.end());
  patch.injective.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    patch.injective[t] = usable[t] == R;
    if (usable[t] < R && patch.truncation.empty()) {
      patch.truncation = reason[t] + " on direction " + std::to_string(t) + " before r = " +
                         std::to_string(patch.radii[usable[t]]);
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < patch.usable; ++j) {
      patch.gauss_max = std::max(patch.gauss_max, std::fabs(patch.samples[t][j].g_rr - 1.0));
    }
  }
  return patch;
}

namespace {

struct ThetaSpread {
  double statistic = 0.0;
  std::size_t radius = 0;
  std::size_t direction = 0;
};

// max over radii of (max - min) / (1 + |mean|) across directions.
template <typename Value>
ThetaSpread theta_spread(const PolarPatch& patch, Value value) {
  ThetaSpread out;
  bool first = true;
  const std::size_t T = patch.samples.size();
  for (std::size_t j = 0; j < patch.usable; ++j) {
    double lo = INFINITY;
    double hi = -INFINITY;
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double v = value(t, j);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    const double mean = sum / static_cast<double>(T);
    const double stat = (hi - lo) / (1.0 + std::fabs(mean));
    if (first || stat > out.statistic) {
      first = false;
      out.statistic = stat;
      out.radius = j;
      double far = -1.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double d = std::fabs(value(t, j) - mean);
        if (d > far) {
          far = d;
          out.direction = t;
        }
      }
    }
  }
  return out;
}

constexpr double kGaussTol = 1e-4;

SubCheck gauss_subcheck(const PolarPatch& patch, std::size_t used, std::size_t excluded) {
  SubCheck g{"gauss", Verdict::Consistent, patch.gauss_max, kGaussTol, used, excluded, std::nullopt};
  if (patch.gauss_max > kGaussTol) {
    g.verdict = Verdict::Refuted;
    for (std::size_t t = 0; t < patch.samples.size() && !g.witness; ++t) {
      for (std::size_t j = 0; j < patch.usable; ++j) {
        if (std::fabs(patch.samples[t][j].g_rr - 1.0) == patch.gauss_max) {
          g.witness = patch.samples[t][j].position;
          break;
        }
      }
    }
  }
  return g;
}

}  // namespace

CheckReport separability_check(const PolarPatch& patch, const PolarOptions& options) {
  const std::size_t T = patch.samples.size();
  CheckReport report;
  report.tolerance = options.tol;
  report.samples_used = T * patch.usable;
  report.samples_excluded = T * patch.radii.size() - report.samples_used;
  const ThetaSpread sp =
      theta_spread(patch, [&](std::size_t t, std::size_t j) { return patch.log_derivative[t][j]; });
  report.max_residual = sp.statistic;
  SubCheck sep{"separability", Verdict::Consistent, sp.statistic, options.tol,
               report.samples_used, report.samples_excluded, std::nullopt};
  const SubCheck gauss = gauss_subcheck(patch, report.samples_used, report.samples_excluded);

  if (patch.usable > 0 && sp.statistic > options.tol) {
    sep.verdict = Verdict::Refuted;
    sep.witness = patch.samples[sp.direction][sp.radius].position;
  }
  if (patch.usable == 0) {
    report.verdict = Verdict::Inconclusive;
    report.notes.push_back("no usable radius: " + patch.truncation);
  } else if (sep.verdict == Verdict::Refuted) {
    report.verdict = Verdict::Refuted;
    report.witness = sep.witness;
    report.witness_residual = sp.statistic;
  } else if (!patch.truncation.empty()) {
    report.verdict = Verdict::Inconclusive;
    report.notes.push_back("patch truncated: " + patch.truncation);
  } else if (gauss.verdict != Verdict::Consistent) {
    report.verdict = Verdict::Inconclusive;
    report.notes.push_back("Gauss lemma diagnostic exceeds 1e-4; exponential map not trusted");
  }
  if (!patch.truncation.empty() && report.verdict == Verdict::Refuted) {
    report.notes.push_back("patch truncated: " + patch.truncation);
  }
  report.sub_checks = {sep, gauss};
  return report;
}

CheckReport separability_check(const Manifold& m, std::span<const double> center,
                               const PolarOptions& options) {
  return separability_check(build_polar_patch(m, center, options), options);
}

CheckReport half_r2_check(const PolarPatch& patch, const PolarOptions& options) {
  const std::size_t T = patch.samples.size();
  CheckReport report;
  report.tolerance = options.tol;
  report.samples_used = T * patch.usable;
  report.samples_excluded = T * patch.radii.size() - report.samples_used;

  SubCheck grad{"grad_norm_sq", Verdict::Consistent, 0.0, kGaussTol, report.samples_used,
                report.samples_excluded, std::nullopt};
  std::vector<TabulatedSample> table;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < patch.usable; ++j) {
      const double r = patch.radii[j];
      const PolarSample& s = patch.samples[t][j];
      TabulatedSample ts;
      ts.f = 0.5 * r * r;
      ts.grad_norm_sq = r * r * s.g_rr_inverse;
      ts.laplacian = r * patch.log_derivative[t][j];
      ts.where = s.position;
      const double dev = std::fabs(ts.grad_norm_sq - 2.0 * ts.f) / std::max(1.0, 2.0 * ts.f);
      if (dev > grad.max_residual) {
        grad.max_residual = dev;
        if (dev > kGaussTol) grad.witness = s.position;
      }
      table.push_back(std::move(ts));
    }
  }
  if (grad.max_residual > kGaussTol) grad.verdict = Verdict::Refuted;

  const ThetaSpread sp = theta_spread(patch, [&](std::size_t t, std::size_t j) {
    return patch.radii[j] * patch.log_derivative[t][j];
  });
  SubCheck lap{"laplacian_theta", Verdict::Consistent, sp.statistic, options.tol,
               report.samples_used, report.samples_excluded, std::nullopt};
  if (patch.usable > 0 && sp.statistic > options.tol) {
    lap.verdict = Verdict::Refuted;
    lap.witness = patch.samples[sp.direction][sp.radius].position;
  }

  const CheckReport tab = check_tabulated(table, options.tol);
  SubCheck tabulated{"tabulated", tab.verdict, tab.max_residual, options.tol,
                     tab.samples_used, report.samples_excluded, tab.witness};

  report.sub_checks = {grad, lap, tabulated};
  report.max_residual = std::max({grad.max_residual, lap.max_residual, tab.max_residual});
  report.verdict = Verdict::Consistent;
  for (const SubCheck& s : report.sub_checks) {
    if (s.verdict == Verdict::Refuted) {
      report.verdict = Verdict::Refuted;
      report.witness = s.witness;
      report.witness_residual = s.max_residual;
      break;
    }
  }
  if (report.verdict != Verdict::Refuted && !patch.truncation.empty()) {
    report.verdict = Verdict::Inconclusive;
    report.notes.push_back("patch truncated: " + patch.truncation);
  }
  return report;
}

SlopeFit small_r_slope(const Manifold& m, std::span<const double> center,
                       const PolarOptions& options) {
  const std::size_t n = m.dim();
  const auto angles = direction_grid(n, options.directions);
  constexpr double kRadii[] = {0.01, 0.02, 0.03, 0.04, 0.05};
  SlopeFit fit;
  fit.expected = 2.0 * static_cast<double>(n - 1);
  fit.slopes.assign(angles.size(), 0.0);
  // A finer difference step than the patch default, scaled to the radii.
  PolarOptions o = options;
  o.rmax = 0.05;
  parallel_for(angles.size(), options.threads, [&](std::size_t t) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (double r : kRadii) {
      const double x = std::log(r);
      const double y = std::log(polar_det(m, center, angles[t], r, o).det);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double k = static_cast<double>(std::size(kRadii));
    fit.slopes[t] = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  });
  for (double s : fit.slopes) fit.max_deviation = std::max(fit.max_deviation, std::fabs(s - fit.expected));
  return fit;
}

}  // namespace equipart

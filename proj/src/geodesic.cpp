#include <cmath>
#include <limits>

#include "equipart/error.hpp"
#include "equipart/geometry.hpp"

namespace equipart {

namespace {

// Metric, its inverse and derivatives without the domain/positivity checks of
// metric_at(); RK4 stages may probe just outside the domain.
Christoffel raw_christoffel(const Manifold& m, std::span<const double> x) {
  const std::size_t n = m.dim();
  std::vector<double> g(n * n);
  m.evaluate_metric(x, g, {});
  MetricSample ms;
  ms.g = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      g.data(), static_cast<long>(n), static_cast<long>(n));
  ms.inverse = ms.g.inverse();
  if (!ms.inverse.allFinite()) throw GeometryError("metric is singular along the geodesic");
  return christoffel_from(m, x, ms);
}

double speed(const Manifold& m, const GeodesicState& s) {
  const std::size_t n = m.dim();
  std::vector<double> g(n * n);
  m.evaluate_metric(s.position, g, {});
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) q += g[i * n + j] * s.velocity[i] * s.velocity[j];
  }
  return std::sqrt(std::max(0.0, q));
}

}  // namespace

std::vector<double> geodesic_acceleration(const Manifold& m, std::span<const double> x,
                                          std::span<const double> v) {
  const std::size_t n = m.dim();
  const Christoffel gamma = raw_christoffel(m, x);
  std::vector<double> a(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) s += gamma(k, i, j) * v[i] * v[j];
    }
    a[k] = -s;
  }
  return a;
}

GeodesicState rk4_geodesic_step(const Manifold& m, const GeodesicState& s, double h) {
  const std::size_t n = m.dim();
  auto shifted = [&](const std::vector<double>& base, const std::vector<double>& d, double c) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = base[i] + c * d[i];
    return r;
  };
  const auto& x = s.position;
  const auto& v = s.velocity;

  const std::vector<double> k1x = v;
  const std::vector<double> k1v = geodesic_acceleration(m, x, v);
  const std::vector<double> x2 = shifted(x, k1x, 0.5 * h);
  const std::vector<double> v2 = shifted(v, k1v, 0.5 * h);
  const std::vector<double> k2x = v2;
  const std::vector<double> k2v = geodesic_acceleration(m, x2, v2);
  const std::vector<double> x3 = shifted(x, k2x, 0.5 * h);
  const std::vector<double> v3 = shifted(v, k2v, 0.5 * h);
  const std::vector<double> k3x = v3;
  const std::vector<double> k3v = geodesic_acceleration(m, x3, v3);
  const std::vector<double> x4 = shifted(x, k3x, h);
  const std::vector<double> v4 = shifted(v, k3v, h);
  const std::vector<double> k4x = v4;
  const std::vector<double> k4v = geodesic_acceleration(m, x4, v4);

  GeodesicState out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.position[i] = x[i] + h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
    out.velocity[i] = v[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
  }
  return out;
}

GeodesicPath integrate_geodesic(const Manifold& m, std::span<const double> p,
                                std::span<const double> v, double length, std::size_t steps,
                                bool richardson) {
  const std::size_t n = m.dim();
  if (p.size() != n || v.size() != n) throw GeometryError("integrate_geodesic: wrong dimension");
  if (steps == 0) throw GeometryError("integrate_geodesic: steps must be positive");
  const MetricSample ms = metric_at(m, p);
  const double norm = vector_norm(ms, v);
  if (!(norm > 0.0)) throw GeometryError("integrate_geodesic: zero initial velocity");

  GeodesicPath path;
  path.step = length / static_cast<double>(steps);
  GeodesicState s{Point(p.begin(), p.end()), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) s.velocity[i] = v[i] / norm;
  path.states.reserve(steps + 1);
  path.states.push_back(s);

  for (std::size_t k = 0; k < steps; ++k) {
    GeodesicState next;
    try {
      next = rk4_geodesic_step(m, path.states.back(), path.step);
    } catch (const Error&) {
      path.exited_domain = true;
      break;
    }
    if (!m.contains(next.position)) {
      path.exited_domain = true;
      break;
    }
    const double drift = std::fabs(speed(m, next) - 1.0);
    path.max_speed_drift = std::max(path.max_speed_drift, drift);
    path.states.push_back(std::move(next));
  }
  path.final_speed_drift = std::fabs(speed(m, path.states.back()) - 1.0);
  path.accuracy_warning = path.max_speed_drift > 1e-4;

  path.richardson_error = std::numeric_limits<double>::quiet_NaN();
  if (richardson && !path.exited_domain) {
    const GeodesicPath fine = integrate_geodesic(m, p, v, length, 2 * steps, false);
    if (!fine.exited_domain) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = path.end().position[i] - fine.end().position[i];
        d2 += d * d;
      }
      path.richardson_error = std::sqrt(d2) / 15.0;
    }
  }
  return path;
}

namespace {

// Endpoint at t = 1 of the geodesic with initial velocity w (not normalized).
Point shoot(const Manifold& m, std::span<const double> p, const std::vector<double>& w,
            std::size_t steps) {
  GeodesicState s{Point(p.begin(), p.end()), w};
  const double h = 1.0 / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) s = rk4_geodesic_step(m, s, h);
  return s.position;
}

}  // namespace

double geodesic_distance(const Manifold& m, std::span<const double> p, std::span<const double> q,
                         std::size_t steps) {
  const std::size_t n = m.dim();
  const long ln = static_cast<long>(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = q[i] - p[i];

  for (int iter = 0; iter < 50; ++iter) {
    const Point end = shoot(m, p, w, steps);
    Eigen::VectorXd r(ln);
    for (std::size_t i = 0; i < n; ++i) r(static_cast<long>(i)) = end[i] - q[i];
    if (r.norm() < 1e-13) break;
    Eigen::MatrixXd jac(ln, ln);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::fabs(w[j]));
      std::vector<double> wp = w;
      std::vector<double> wm = w;
      wp[j] += h;
      wm[j] -= h;
      const Point ep = shoot(m, p, wp, steps);
      const Point em = shoot(m, p, wm, steps);
      for (std::size_t i = 0; i < n; ++i) {
        jac(static_cast<long>(i), static_cast<long>(j)) = (ep[i] - em[i]) / (2.0 * h);
      }
    }
    const Eigen::VectorXd dw = jac.fullPivLu().solve(r);
    for (std::size_t i = 0; i < n; ++i) w[i] -= dw(static_cast<long>(i));
    if (iter == 49) throw GeometryError("geodesic_distance: shooting did not converge");
  }
  return vector_norm(metric_at(m, p), w);
}

}  // namespace equipart

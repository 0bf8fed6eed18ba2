#include <doctest.h>

#include <cmath>

#include "equipart/error.hpp"
#include "equipart/geometry.hpp"
#include "support.hpp"

using namespace equipart;
using test::kPi;

TEST_CASE("metric_at on the fixture metrics") {
  const auto e2 = test::euclid2();
  const MetricSample a = metric_at(*e2, Point{0.3, -0.7});
  CHECK(a.g.isApprox(Eigen::Matrix2d::Identity()));
  CHECK(a.inverse.isApprox(Eigen::Matrix2d::Identity()));
  CHECK(a.det == 1.0);

  const auto h = test::h2xr();
  const MetricSample b = metric_at(*h, Point{1, 0, 0});
  CHECK(b.g(0, 0) == 4.0);
  CHECK(b.g(1, 1) == 4.0);
  CHECK(b.g(2, 2) == 1.0);
  CHECK(b.g(0, 1) == 0.0);
  CHECK(b.det == doctest::Approx(16.0).epsilon(1e-15));
  CHECK((b.g * b.inverse - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);

  const auto pf = test::polar_flat();
  CHECK(metric_at(*pf, Point{2, 0.4}).det == doctest::Approx(4.0));
}

TEST_CASE("metric errors") {
  const auto pf = test::polar_flat();
  CHECK_THROWS_AS((void)metric_at(*pf, Point{-1, 0}), GeometryError);
  const auto lorentz = test::make_manifold("bad", {"x", "y"}, {{"1", "0"}, {"0", "-1"}});
  CHECK_THROWS_WITH_AS((void)metric_at(*lorentz, Point{0, 0}), doctest::Contains("minor"), GeometryError);
  CHECK_THROWS_AS(test::make_manifold("asym", {"x", "y"}, {{"1", "x"}, {"0", "1"}}), GeometryError);
}

TEST_CASE("Christoffel symbols") {
  const Christoffel e = christoffel_at(*test::euclid3(), Point{0.1, 0.2, 0.3});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(e(k, i, j) == 0.0);

  const Christoffel p = christoffel_at(*test::polar_flat(), Point{2, 0.3});
  CHECK(p(0, 1, 1) == doctest::Approx(-2.0));
  CHECK(p(1, 0, 1) == doctest::Approx(0.5));
  CHECK(p(1, 1, 0) == p(1, 0, 1));

  const Christoffel s = christoffel_at(*test::sphere2(), Point{kPi / 4, 1.0});
  CHECK(s(0, 1, 1) == doctest::Approx(-0.5));
  CHECK(s(1, 0, 1) == doctest::Approx(1.0));  // cot(pi/4)
}

TEST_CASE("gradient and (grad f)^2") {
  const auto e2 = test::euclid2();
  const auto g = gradient(test::field(e2, "x^2 + y^2"), Point{1, 2});
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 4.0);

  const auto h = test::h2xr();
  const auto gz = gradient(test::field(h, "z"), Point{0.3, -0.5, 0.8});
  CHECK(gz == std::vector<double>{0, 0, 1});
  const auto gf = gradient(test::field(h, "x^2 + y^2"), Point{1, 0, 0});
  CHECK(gf[0] == doctest::Approx(0.5));
  CHECK(gf[1] == 0.0);
  CHECK(gf[2] == 0.0);

  // (grad f)^2 = 1 - f^2 for cos r.
  const double r = kPi / 3;
  const auto c = test::field(e2, "cos(sqrt(x^2+y^2))");
  CHECK(grad_norm_sq(c, Point{r * std::cos(0.7), r * std::sin(0.7)}) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(grad_norm_sq(test::field(h, "z"), Point{0.2, 0.1, 3}) == 1.0);
  // F^2 (f_x^2 + f_y^2) with f = 1, F = 1/2.
  CHECK(grad_norm_sq(test::field(h, "x^2+y^2"), Point{1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(grad_norm_sq(test::field(e2, "x^2 + y^2"), Point{0, 0}) == 0.0);
}

TEST_CASE("Laplace-Beltrami on the fixtures") {
  const auto e2 = test::euclid2();
  for (const auto& p : test::random_points(20, {{-2, 2}, {-2, 2}})) {
    CHECK(laplace_beltrami(test::field(e2, "x^2+y^2"), p) == doctest::Approx(4.0).epsilon(1e-15));
  }
  CHECK(laplace_beltrami(test::field(test::h2xr(), "x^2+y^2"), Point{1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-14));

  // -cos r - sin r / r at r = pi/2 is -2/pi.
  const auto c = test::field(e2, "cos(sqrt(x^2+y^2))");
  const double r = kPi / 2;
  const double lap = laplace_beltrami(c, Point{r * std::cos(2.0), r * std::sin(2.0)});
  CHECK(lap == doctest::Approx(-2.0 / kPi).epsilon(1e-13));
  // The closed form for the innermost region gives the same value.
  const double f = 0.0;
  CHECK(lap == doctest::Approx(-f - std::sqrt(1 - f * f) / std::acos(f)).epsilon(1e-13));
}

TEST_CASE("divergence and Christoffel forms of the Laplacian agree on every fixture") {
  struct Case {
    ManifoldPtr m;
    std::vector<std::string> fields;
    std::vector<std::pair<double, double>> box;
  };
  const std::vector<Case> cases{
      {test::euclid2(), {"x^2+y^2", "x + y^2", "cos(sqrt(x^2+y^2))", "(y - x^2)/2"}, {{-2, 2}, {-2, 2}}},
      {test::euclid3(), {"x", "x^2+y^2", "x^2+y^2+z^2", "x^2+2*y^2"}, {{-2, 2}, {-2, 2}, {-2, 2}}},
      {test::polar_flat(), {"r^2", "r*cos(t)"}, {{0.1, 2}, {-3, 3}}},
      {test::sphere2(), {"cos(r)", "sin(r)*cos(t)"}, {{0.1, 3}, {-3, 3}}},
      {test::h2xr(), {"x^2+y^2", "z", "(x^2+y^2-2)/y", "(x^2+y^2-2)/x", "x + z^2"}, {{-1.4, 1.4}, {-1.4, 1.4}, {-1, 1}}},
      {test::conformal(), {"(y - x^2)/2", "x*y"}, {{-2, 2}, {-2, 2}}},
  };
  for (const Case& c : cases) {
    for (const auto& text : c.fields) {
      const FieldCalculus fc(test::field(c.m, text));
      const auto pts = test::random_points(100, c.box, 21, [&](const Point& p) {
        return c.m->contains(p) && std::fabs(p[1]) > 0.05 && std::fabs(p[0]) > 0.05;
      });
      for (const Point& p : pts) {
        const double a = laplace_beltrami(fc, p);
        const double b = laplace_beltrami_christoffel(fc, p);
        CHECK(std::fabs(a - b) <= 1e-10 * (1.0 + std::fabs(a)));
      }
    }
  }
}

TEST_CASE("Cartesian and polar charts of the plane agree") {
  const auto cart = test::euclid2();
  const auto pol = test::polar_flat();
  const std::pair<const char*, const char*> pairs[] = {
      {"x^2+y^2", "r^2"},
      {"x + y^2", "r*cos(t) + (r*sin(t))^2"},
      {"cos(sqrt(x^2+y^2))", "cos(r)"},
      {"exp(x)*y", "exp(r*cos(t))*r*sin(t)"},
  };
  for (const auto& [fc, fp] : pairs) {
    const FieldCalculus a(test::field(cart, fc));
    const FieldCalculus b(test::field(pol, fp));
    for (const auto& q : test::random_points(100, {{0.2, 2}, {-3, 3}}, 4)) {
      const Point p{q[0] * std::cos(q[1]), q[0] * std::sin(q[1])};
      const double ga = grad_norm_sq(a, p), gb = grad_norm_sq(b, q);
      const double la = laplace_beltrami(a, p), lb = laplace_beltrami(b, q);
      CHECK(std::fabs(ga - gb) <= 1e-9 * (1.0 + std::fabs(ga)));
      CHECK(std::fabs(la - lb) <= 1e-9 * (1.0 + std::fabs(la)));
    }
  }
}

TEST_CASE("mean curvature of level sets") {
  const auto circle = mean_curvature_level_set(test::field(test::euclid2(), "x^2+y^2"), Point{0, 2});
  CHECK(circle.mean == doctest::Approx(0.5).epsilon(1e-14));
  const auto sphere = mean_curvature_level_set(test::field(test::euclid3(), "x^2+y^2+z^2"), Point{2, 0, 0});
  CHECK(sphere.mean == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(sphere.divergence == doctest::Approx(1.0).epsilon(1e-14));
  const auto slice = mean_curvature_level_set(test::field(test::h2xr(), "z"), Point{0.4, -0.3, 0.2});
  CHECK(std::fabs(slice.mean) <= 1e-15);
  CHECK_THROWS_AS((void)mean_curvature_level_set(test::field(test::euclid2(), "x^2+y^2"), Point{0, 0}),
                  CriticalPointError);
}

TEST_CASE("both mean-curvature paths agree") {
  struct Case {
    ManifoldPtr m;
    std::string f;
    std::vector<std::pair<double, double>> box;
  };
  const std::vector<Case> cases{
      {test::euclid2(), "x + y^2", {{-2, 2}, {-2, 2}}},
      {test::euclid3(), "x^2+2*y^2+z", {{-2, 2}, {-2, 2}, {-2, 2}}},
      {test::h2xr(), "(x^2+y^2-2)/y", {{-1.4, 1.4}, {0.1, 1.4}, {-1, 1}}},
      {test::conformal(), "x*y + x", {{-2, 2}, {-2, 2}}},
      {test::sphere2(), "sin(r)*cos(t)", {{0.2, 2.9}, {-1, 1}}},
  };
  for (const Case& c : cases) {
    const FieldCalculus fc(test::field(c.m, c.f));
    for (const auto& p : test::random_points(50, c.box, 8, [&](const Point& q) { return c.m->contains(q); })) {
      const auto h = mean_curvature_level_set(fc, p);
      CHECK(std::fabs(h.mean - h.mean_by_expansion) <= 1e-9 * (1.0 + std::fabs(h.mean)));
    }
  }
}

TEST_CASE("gradient alignment") {
  const auto e2 = test::euclid2();
  const FieldCalculus radial(test::field(e2, "x^2+y^2"));
  for (const auto& p : test::random_points(20, {{0.1, 2}, {0.1, 2}})) CHECK(gradient_alignment(radial, p) <= 1e-14);
  // grad f = (1, 2), D grad f = (0, 4): sin = |1*4 - 2*0| / (sqrt 5 * 4).
  CHECK(gradient_alignment(test::field(e2, "x + y^2"), Point{0, 1}) == doctest::Approx(1 / std::sqrt(5.0)));
  CHECK(gradient_alignment(test::field(test::h2xr(), "z"), Point{0.3, 0.1, 0}) <= 1e-15);
  CHECK_THROWS_AS((void)gradient_alignment(radial, Point{0, 0}), CriticalPointError);
}

TEST_CASE("geodesics") {
  const auto e = integrate_geodesic(*test::euclid2(), Point{0, 0}, std::vector<double>{1, 0}, 2.0, 100);
  CHECK(e.end().position[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::fabs(e.end().position[1]) <= 1e-15);

  const auto s = integrate_geodesic(*test::sphere2(), Point{kPi / 4, 0.5}, std::vector<double>{1, 0}, kPi / 4, 1000);
  CHECK(s.end().position[0] == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(s.end().position[1] == doctest::Approx(0.5).epsilon(1e-14));

  const auto h = integrate_geodesic(*test::h2xr(), Point{0, 0, 0}, std::vector<double>{0, 0, 1}, 1.0, 100);
  CHECK(h.end().position[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(h.end().position[0] == 0.0);

  // Leaving the chart truncates the path and sets the flag.
  const auto out = integrate_geodesic(*test::polar_flat(), Point{0.5, 0}, std::vector<double>{-1, 0}, 2.0, 1000);
  CHECK(out.exited_domain);
  CHECK(out.states.size() < 1001);
}

TEST_CASE("geodesic speed is conserved on every fixture") {
  // `valid` bounds the coordinates a path may visit for the bound to apply:
  // exp(y - x^2) dx^2 is incomplete and its geodesics run off to coordinate
  // infinity in finite length, where a fixed step cannot keep up. Those
  // paths must raise the accuracy warning instead.
  struct Case {
    ManifoldPtr m;
    std::vector<std::pair<double, double>> box;
    double length;
    double valid;
  };
  const std::vector<Case> cases{
      {test::euclid2(), {{-2, 2}, {-2, 2}}, 5, 1e9},        {test::euclid3(), {{-2, 2}, {-2, 2}, {-2, 2}}, 5, 1e9},
      {test::polar_flat(), {{1.5, 2}, {-3, 3}}, 1, 1e9},    {test::sphere2(), {{1.2, 2}, {-3, 3}}, 1, 1e9},
      {test::h2xr(), {{-1, 1}, {-1, 1}, {-1, 1}}, 1, 1e9},  {test::conformal(), {{-1, 1}, {-1, 1}}, 5, 2},
  };
  for (const Case& c : cases) {
    const auto starts = test::random_points(40, c.box, 6, [&](const Point& p) { return c.m->contains(p); });
    const auto dirs = test::random_points(40, std::vector<std::pair<double, double>>(c.m->dim(), {-1, 1}), 7);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const auto path = integrate_geodesic(*c.m, starts[i], dirs[i], c.length, 1000);
      bool inside = !path.exited_domain;
      for (const auto& s : path.states)
        for (double x : s.position) inside = inside && std::fabs(x) <= c.valid;
      INFO(c.m->name(), " start ", starts[i][0], ",", starts[i][1]);
      if (c.valid > 1e8) CHECK_FALSE(path.exited_domain);
      CHECK(path.accuracy_warning == (path.max_speed_drift > 1e-4));
      if (!inside) continue;
      ++kept;
      CHECK(path.max_speed_drift <= 1e-6);
    }
    CHECK(kept >= 4);
  }
}

TEST_CASE("geodesic distance by shooting") {
  CHECK(geodesic_distance(*test::euclid2(), Point{0, 0}, Point{3, 4}) == doctest::Approx(5.0).epsilon(1e-10));
  // Great-circle distance on the unit sphere along a meridian.
  CHECK(geodesic_distance(*test::sphere2(), Point{1.0, 0.2}, Point{1.5, 0.2}) == doctest::Approx(0.5).epsilon(1e-9));
}

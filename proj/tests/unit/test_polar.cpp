#include <doctest.h>

#include <cmath>

#include "equipart/manifest.hpp"
#include "equipart/polar.hpp"
#include "support.hpp"

using namespace equipart;

namespace {

double norm_g(const Manifold& m, const Point& p, const std::vector<double>& v) {
  const auto g = metric_at(m, p).g;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) s += g(i, j) * v[i] * v[j];
  }
  return std::sqrt(s);
}

struct Centred {
  ManifoldPtr m;
  Point center;
  double rmax;
};

// Fixture manifolds with their polar centres; h2xr has none in the manifest
// and is centred at the origin here.
std::vector<Centred> fixture_centres() {
  std::vector<Centred> out;
  for (const char* name : {"euclid2", "euclid3", "polar_flat", "sphere2", "conf_nonsym"}) {
    const Manifest mf = load_manifest(std::string(EQUIPART_FIXTURE_DIR) + "/" + name + ".eqm");
    const auto& e = mf.manifolds.front();
    out.push_back({e.manifold, *e.center, *e.rmax});
  }
  out.push_back({test::h2xr(), {0, 0, 0}, 0.5});
  return out;
}

}  // namespace

TEST_CASE("exponential map") {
  const auto e2 = test::euclid2();
  const Point p{0.3, -0.2};
  const auto q = exp_map(*e2, p, std::vector<double>{0.6, 0.8}, 1.5, 1500);
  CHECK(q[0] == doctest::Approx(0.3 + 0.9).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(-0.2 + 1.2).epsilon(1e-12));

  // Along a meridian and along the equator of the unit sphere.
  const auto s = test::sphere2();
  const Point eq{test::kPi / 2, 0};
  const auto a = exp_map(*s, eq, std::vector<double>{1, 0}, 1.0, 1000);
  CHECK(a[0] == doctest::Approx(test::kPi / 2 + 1.0).epsilon(1e-10));
  CHECK(std::fabs(a[1]) <= 1e-12);
  const auto b = exp_map(*s, eq, std::vector<double>{0, 1}, 1.0, 1000);
  CHECK(b[0] == doctest::Approx(test::kPi / 2).epsilon(1e-10));
  CHECK(b[1] == doctest::Approx(1.0).epsilon(1e-10));

  // Leaving the domain throws.
  CHECK_THROWS_AS(exp_map(*test::polar_flat(), Point{0.2, 0}, std::vector<double>{-1, 0}, 0.5, 500), GeometryError);
}

TEST_CASE("polar directions are unit vectors") {
  for (const auto& c : fixture_centres()) {
    for (const auto& ang : direction_grid(c.m->dim(), 16)) {
      CHECK(norm_g(*c.m, c.center, polar_direction(*c.m, c.center, ang)) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK(direction_grid(2, 8).size() == 8);
  CHECK(direction_grid(3, 16).size() == 16);
  CHECK_THROWS_AS(direction_grid(4, 16), GeometryError);
}

TEST_CASE("pulled-back metric determinant") {
  const auto e2 = test::euclid2();
  const auto s = test::sphere2();
  const auto e3 = test::euclid3();
  for (double r : {0.1, 0.4, 0.9}) {
    for (double t : {0.0, 1.0, 2.5, 4.0}) {
      const std::vector<double> ang{t};
      const auto flat = polar_det(*e2, Point{0.5, -0.5}, ang, r);
      CHECK(flat.det == doctest::Approx(r * r).epsilon(1e-6));
      CHECK(flat.g_rr == doctest::Approx(1.0).epsilon(1e-8));
      const auto sph = polar_det(*s, Point{test::kPi / 2, 0}, ang, r);
      CHECK(sph.det == doctest::Approx(std::sin(r) * std::sin(r)).epsilon(1e-6));
    }
    for (double th : {0.4, 1.2, 2.0}) {
      const std::vector<double> ang{th, 0.7};
      const auto f3 = polar_det(*e3, Point{0, 0, 0}, ang, r);
      CHECK(f3.det == doctest::Approx(std::pow(r, 4) * std::sin(th) * std::sin(th)).epsilon(1e-6));
    }
  }
}

TEST_CASE("separability verdicts") {
  const PolarOptions o;
  CHECK(separability_check(*test::euclid2(), Point{0, 0}, o).verdict == Verdict::Consistent);
  CHECK(separability_check(*test::euclid3(), Point{0, 0, 0}, o).verdict == Verdict::Consistent);
  CHECK(separability_check(*test::sphere2(), Point{test::kPi / 2, 0}, o).verdict == Verdict::Consistent);
  PolarOptions half = o;
  half.rmax = 0.5;
  CHECK(separability_check(*test::polar_flat(), Point{1, 0}, half).verdict == Verdict::Consistent);

  const auto conf = separability_check(*test::conformal(), Point{0, 0}, o);
  CHECK(conf.verdict == Verdict::Refuted);
  CHECK(conf.witness);
  CHECK(conf.max_residual > 0.1);
  REQUIRE(conf.sub_checks.size() == 2);
  CHECK(conf.sub_checks[1].name == "gauss");
  CHECK(conf.sub_checks[1].verdict == Verdict::Consistent);
}

TEST_CASE("separability past the first conjugate point is inconclusive") {
  // On the unit sphere every geodesic from the centre refocuses at r = pi.
  PolarOptions o;
  o.rmax = 3.4;
  o.radii = 34;
  const auto s = test::make_manifold("round", {"r", "t"}, {{"1", "0"}, {"0", "sin(r)^2"}}, "r > 0.05 & r < 3.1");
  const auto patch = build_polar_patch(*s, Point{test::kPi / 2, 0}, o);
  CHECK(patch.usable < patch.radii.size());
  CHECK_FALSE(patch.truncation.empty());
  const auto rep = separability_check(patch, o);
  CHECK(rep.verdict == Verdict::Inconclusive);
}

TEST_CASE("r^2/2 on polar patches") {
  PolarOptions o;
  const auto flat = build_polar_patch(*test::euclid2(), Point{0, 0}, o);
  for (std::size_t t = 0; t < flat.samples.size(); ++t) {
    for (std::size_t j = 0; j < flat.usable; ++j) {
      CHECK(flat.radii[j] * flat.log_derivative[t][j] == doctest::Approx(2.0).epsilon(1e-5));
    }
  }
  const auto sph = build_polar_patch(*test::sphere2(), Point{test::kPi / 2, 0}, o);
  for (std::size_t t = 0; t < sph.samples.size(); ++t) {
    for (std::size_t j = 0; j < sph.usable; ++j) {
      const double r = sph.radii[j];
      CHECK(r * sph.log_derivative[t][j] == doctest::Approx(1.0 + r / std::tan(r)).epsilon(1e-5));
    }
  }
  CHECK(half_r2_check(flat, o).verdict == Verdict::Consistent);
  const auto rep = half_r2_check(sph, o);
  CHECK(rep.verdict == Verdict::Consistent);
  REQUIRE(rep.sub_checks.size() == 3);
  CHECK(rep.sub_checks[2].name == "tabulated");
  CHECK(rep.sub_checks[2].verdict == Verdict::Consistent);
}

TEST_CASE("Gauss lemma and small-r slope on every fixture") {
  for (const auto& c : fixture_centres()) {
    INFO(c.m->name());
    PolarOptions o;
    o.rmax = c.rmax;
    const auto patch = build_polar_patch(*c.m, c.center, o);
    CHECK(patch.usable == patch.radii.size());
    CHECK(patch.gauss_max <= 1e-4);
    const auto fit = small_r_slope(*c.m, c.center, o);
    CHECK(fit.expected == 2.0 * static_cast<double>(c.m->dim() - 1));
    CHECK(fit.max_deviation <= 0.05);
    for (double s : fit.slopes) CHECK(std::fabs(s - fit.expected) <= 0.05);
  }
}

TEST_CASE("tabulated data from the patch is consistent with r^2/2") {
  // Independent tabulation from the flat closed forms.
  std::vector<TabulatedSample> table;
  for (double r = 0.05; r <= 1.0; r += 0.05) {
    for (double t = 0; t < 6.28; t += 0.5) {
      table.push_back({0.5 * r * r, r * r, 2.0, Point{r * std::cos(t), r * std::sin(t)}});
    }
  }
  CHECK(check_tabulated(table, 1e-3).verdict == Verdict::Consistent);
}

TEST_CASE("polar patches need dimension 2 or 3") {
  const auto e4 = test::make_manifold("e4", {"a", "b", "c", "d"},
                                      {{"1", "0", "0", "0"}, {"0", "1", "0", "0"}, {"0", "0", "1", "0"}, {"0", "0", "0", "1"}});
  CHECK_THROWS_AS(build_polar_patch(*e4, Point{0, 0, 0, 0}), GeometryError);
  CHECK_THROWS_AS(separability_check(*e4, Point{0, 0, 0, 0}), GeometryError);
}

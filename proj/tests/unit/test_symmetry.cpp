#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "equipart/symmetry.hpp"
#include "support.hpp"

using namespace equipart;

namespace {

const std::vector<Interval> kH2xrBox{{-1.4, 1.4}, {-1.4, 1.4}, {-1, 1}};

SamplePlan plan(std::vector<Interval> box, std::size_t n = 2000) {
  SamplePlan p;
  p.samples = n;
  p.box = std::move(box);
  return p;
}

bool has_note(const CheckReport& r, const std::string& text) {
  return std::any_of(r.notes.begin(), r.notes.end(),
                     [&](const std::string& n) { return n.find(text) != std::string::npos; });
}

std::vector<Point> h2xr_points(std::size_t n, std::uint64_t seed) {
  return test::random_points(n, {{-1.4, 1.4}, {-1.4, 1.4}, {-1, 1}}, seed,
                             [](const Point& p) { return p[0] * p[0] + p[1] * p[1] < 1.96; });
}

}  // namespace

TEST_CASE("Killing residuals") {
  const auto e2 = test::euclid2();
  for (const auto& p : test::random_points(50, {{-2, 2}, {-2, 2}})) {
    CHECK(killing_residual(test::vfield(e2, {"-y", "x"}), p) == 0.0);
  }
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  for (const auto& p : h2xr_points(2000, 2)) {
    for (const auto& x : X) CHECK(killing_residual(x, p) <= 1e-10);
  }
  // Dilation: K_xx = 2, normalized by 1 + max|g| max|X| = 1 + |x|.
  const double r = killing_residual(test::vfield(e2, {"x", "0"}), Point{0.5, 0.3});
  CHECK(r == doctest::Approx(2.0 / 1.5));
  // Full tensor of the dilation.
  const auto K = KillingOperator(test::vfield(e2, {"x", "0"})).tensor(Point{0.5, 0.3});
  CHECK(K == std::vector<double>{2, 0, 0, 0});
}

TEST_CASE("Lie brackets") {
  const auto e2 = test::euclid2();
  const auto b = lie_bracket(test::vfield(e2, {"1", "0"}), test::vfield(e2, {"-y", "x"}));
  CHECK(b.components[0].is_constant(0.0));
  CHECK(b.components[1].is_constant(1.0));

  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  const auto c = lie_bracket(X[2], X[3]);
  for (const auto& comp : c.components) CHECK(comp.is_constant(0.0));
  const auto d = lie_bracket(X[0], X[1]);
  CHECK(d.name == "[X1,X2]");
  for (const auto& p : h2xr_points(100, 4)) CHECK(killing_residual(d, p) <= 1e-10);
}

TEST_CASE("brackets of fixture Killing fields are Killing") {
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  const auto e3 = test::euclid3();
  const std::vector<VectorField> E{test::vfield(e3, {"1", "0", "0"}), test::vfield(e3, {"-y", "x", "0"}),
                                   test::vfield(e3, {"0", "0", "1"}), test::vfield(e3, {"0", "-z", "y"})};
  const auto e3_points = test::random_points(100, {{-2, 2}, {-2, 2}, {-2, 2}}, 5);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      const auto bh = lie_bracket(X[i], X[j]);
      for (const auto& p : h2xr_points(100, 6)) CHECK(killing_residual(bh, p) <= 1e-9);
      const auto be = lie_bracket(E[i], E[j]);
      for (const auto& p : e3_points) CHECK(killing_residual(be, p) <= 1e-9);
    }
  }
}

TEST_CASE("Killing flows preserve geodesic distance") {
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  const auto starts = test::random_points(20, {{-0.8, 0.8}, {-0.8, 0.8}, {-0.5, 0.5}}, 12);
  const auto offsets = test::random_points(20, {{-0.15, 0.15}, {-0.15, 0.15}, {-0.15, 0.15}}, 13);
  for (const auto& x : X) {
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const Point& p = starts[i];
      const Point q{p[0] + offsets[i][0], p[1] + offsets[i][1], p[2] + offsets[i][2]};
      const double before = geodesic_distance(*h, p, q);
      const double after = geodesic_distance(*h, integrate_flow(x, p, 0.1), integrate_flow(x, q, 0.1));
      INFO(x.name);
      CHECK(std::fabs(after - before) <= 1e-4);
    }
  }
  // The oracle notices a non-isometry: the dilation stretches distances by e^0.1.
  const auto e2 = test::euclid2();
  const auto dil = test::vfield(e2, {"x", "y"});
  const Point p{0.5, 0.2}, q{0.6, 0.35};
  const double before = geodesic_distance(*e2, p, q);
  const double after = geodesic_distance(*e2, integrate_flow(dil, p, 0.1), integrate_flow(dil, q, 0.1));
  CHECK(after == doctest::Approx(before * std::exp(0.1)).epsilon(1e-8));
}

TEST_CASE("pointwise rank") {
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  const std::vector<VectorField> rot_trans{X[2], X[3]};
  CHECK(pointwise_rank(rot_trans, Point{1, 0, 0}) == 2);
  const auto e2 = test::euclid2();
  const std::vector<VectorField> rot{test::vfield(e2, {"-y", "x"})};
  CHECK(pointwise_rank(rot, Point{0, 0}) == 0);
  CHECK(pointwise_rank(rot, Point{0.3, 0}) == 1);
  const std::vector<VectorField> h2{X[0], X[1], X[2]};
  for (const auto& p : h2xr_points(50, 8)) CHECK(pointwise_rank(h2, p) == 2);
}

TEST_CASE("invariance residuals") {
  const auto e2 = test::euclid2();
  for (const auto& p : test::random_points(20, {{-2, 2}, {-2, 2}})) {
    CHECK(invariance_residual(test::field(e2, "x^2+y^2"), test::vfield(e2, {"-y", "x"}), p) <= 1e-15);
  }
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  const auto f3 = test::field(h, "(x^2+y^2-2)/y");
  for (const auto& p : h2xr_points(200, 9)) {
    CHECK(invariance_residual(test::field(h, "z"), X[0], p) == 0.0);
    if (std::fabs(p[1]) > 0.05) CHECK(invariance_residual(f3, X[0], p) <= 1e-12);
  }
  CHECK(invariance_residual(test::field(e2, "x"), test::vfield(e2, {"1", "0"}), Point{0, 0}) == doctest::Approx(0.5));
}

TEST_CASE("Killing-induced equilibrium on H^2 x R") {
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  const auto r = check_killing_induced_equilibrium({h, {X[2], X[3]}, 0}, test::field(h, "x^2+y^2"), plan(kH2xrBox));
  CHECK(r.verdict == Verdict::Consistent);
  REQUIRE(r.sub_checks.size() == 4);
  CHECK(r.sub_checks[0].name == "killing");
  CHECK(r.sub_checks[1].name == "rank");
  CHECK(r.sub_checks[2].name == "invariance");
  CHECK(r.sub_checks[3].name == "equilibrium");
  for (const auto& s : r.sub_checks) CHECK(s.verdict == Verdict::Consistent);
  CHECK(has_note(r, "closed subgroup"));

  for (auto [i, j] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
    const auto z = check_killing_induced_equilibrium({h, {X[i], X[j]}, 0}, test::field(h, "z"), plan(kH2xrBox, 500));
    CHECK(z.verdict == Verdict::Consistent);
  }
  const auto f3 = check_killing_induced_equilibrium(
      {h, {X[0], X[3]}, 0}, test::field(h, "(x^2+y^2-2)/y", "y^2 > 0.0025"), plan(kH2xrBox));
  CHECK(f3.verdict == Verdict::Consistent);
}

TEST_CASE("failing legs are identified") {
  const auto e2 = test::euclid2();
  const auto r = check_killing_induced_equilibrium({e2, {test::vfield(e2, {"x", "0"})}, 0}, test::field(e2, "y"),
                                                   plan({{-2, 2}, {-2, 2}}, 500));
  CHECK(r.verdict == Verdict::Refuted);
  CHECK(r.sub_checks[0].verdict == Verdict::Refuted);
  CHECK(r.sub_checks[0].witness);
  CHECK(has_note(r, "leg `killing` failed"));
  CHECK(has_note(r, "dimension 2"));

  // Wrong invariant: x^2 + y^2 is not constant along X1.
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  const auto w = check_killing_induced_equilibrium({h, {X[0], X[3]}, 0}, test::field(h, "x^2+y^2"), plan(kH2xrBox, 500));
  CHECK(w.verdict == Verdict::Refuted);
  CHECK(w.sub_checks[2].verdict == Verdict::Refuted);
}

TEST_CASE("an equilibrium failure with all hypotheses passing raises the red flag") {
  // At a tolerance below the rounding of the singular field's Laplacian, the
  // equilibrium leg alone fails; the report must say so loudly.
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  SymmetryOptions o;
  o.check.tol = 1e-11;
  const auto r = check_killing_induced_equilibrium(
      {h, {X[0], X[3]}, 0}, test::field(h, "(x^2+y^2-2)/y", "y^2 > 0.0025"), plan(kH2xrBox), o);
  REQUIRE(r.sub_checks[0].verdict == Verdict::Consistent);
  REQUIRE(r.sub_checks[1].verdict == Verdict::Consistent);
  REQUIRE(r.sub_checks[2].verdict == Verdict::Consistent);
  CHECK(r.sub_checks[3].verdict == Verdict::Refuted);
  CHECK(has_note(r, "RED FLAG"));
}

TEST_CASE("hypotheses passing implies the equilibrium leg passes on the fixtures") {
  const auto h = test::h2xr();
  const auto X = test::h2xr_killing(h);
  struct Case {
    std::vector<VectorField> fields;
    ScalarField f;
  };
  const std::vector<Case> cases{
      {{X[2], X[3]}, test::field(h, "x^2+y^2")},
      {{X[0], X[1]}, test::field(h, "z")},
      {{X[0], X[3]}, test::field(h, "(x^2+y^2-2)/y", "y^2 > 0.0025")},
      {{X[1], X[3]}, test::field(h, "(x^2+y^2-2)/x", "x^2 > 0.0025")},
  };
  for (const Case& c : cases) {
    const auto r = check_killing_induced_equilibrium({h, c.fields, 0}, c.f, plan(kH2xrBox));
    const bool hypotheses = r.sub_checks[0].verdict == Verdict::Consistent &&
                            r.sub_checks[1].verdict == Verdict::Consistent &&
                            r.sub_checks[2].verdict == Verdict::Consistent;
    CHECK(hypotheses);
    if (hypotheses) CHECK(r.sub_checks[3].verdict == Verdict::Consistent);
    CHECK_FALSE(has_note(r, "RED FLAG"));
  }
}

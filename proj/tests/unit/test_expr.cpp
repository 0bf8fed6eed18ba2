#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "equipart/error.hpp"
#include "equipart/expr.hpp"
#include "equipart/manifest.hpp"
#include "support.hpp"

using namespace equipart;

namespace {

const std::vector<std::string> kXY{"x", "y"};
const std::vector<std::string> kR{"r"};

Expression px(const std::string& s) { return parse(s, kXY); }

double at(const Expression& e, double x, double y) {
  const double p[] = {x, y};
  return evaluate(e, p);
}

std::int64_t ulp_distance(double a, double b) {
  if (a == b) return 0;
  std::int64_t ia, ib;
  std::memcpy(&ia, &a, sizeof a);
  std::memcpy(&ib, &b, sizeof b);
  if (ia < 0) ia = std::numeric_limits<std::int64_t>::min() - ia;
  if (ib < 0) ib = std::numeric_limits<std::int64_t>::min() - ib;
  return ia > ib ? ia - ib : ib - ia;
}

}  // namespace

TEST_CASE("parse builds the tree the grammar describes") {
  const Expression e = px("x^2 + y^2");
  REQUIRE(e.kind() == Expression::Kind::Binary);
  CHECK(e.binary_op() == BinaryOp::Add);
  CHECK(e.lhs().binary_op() == BinaryOp::Pow);
  CHECK(e.lhs().lhs().name() == "x");
  CHECK(e.lhs().rhs().value() == 2.0);
  CHECK(e.rhs().lhs().name() == "y");

  // -x^2 is -(x^2); ^ is right associative; * binds tighter than +.
  CHECK(at(px("-x^2"), 3, 0) == -9.0);
  CHECK(at(px("2^3^2"), 0, 0) == 512.0);
  CHECK(at(px("x - y - 1"), 5, 2) == 2.0);
  CHECK(at(px("x / y * 2"), 6, 3) == 4.0);
  CHECK(at(px("1 + 2*x^2"), 3, 0) == 19.0);
  CHECK(at(px("2.5e-1 * x"), 4, 0) == 1.0);
}

TEST_CASE("parse handles the fields used by the fixtures") {
  const Expression f = px("cos(sqrt(x^2+y^2))");
  CHECK(f.unary_op() == UnaryOp::Cos);
  CHECK(f.operand().unary_op() == UnaryOp::Sqrt);
  CHECK(at(f, test::kPi, 0) == doctest::Approx(-1.0));

  const Expression F = px("(2 - x^2 - y^2)/2");
  CHECK(F.binary_op() == BinaryOp::Div);
  CHECK(at(F, 1, 0) == 0.5);
}

TEST_CASE("parse errors carry a position and the expected tokens") {
  try {
    (void)px("x + * y");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 4);
    CHECK_FALSE(e.expected().empty());
  }
  CHECK_THROWS_AS((void)px("x + z"), ParseError);
  try {
    (void)px("x + z");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("unknown identifier `z`") != std::string::npos);
    CHECK(e.position() == 4);
  }
  CHECK_THROWS_WITH_AS((void)px("sin(x, y)"), doctest::Contains("arity mismatch"), ParseError);
  CHECK_THROWS_WITH_AS((void)px("x(2)"), doctest::Contains("arity mismatch"), ParseError);
  CHECK_THROWS_AS((void)px("(x + 1"), ParseError);
  CHECK_THROWS_AS((void)px(""), ParseError);
  CHECK_THROWS_AS((void)px("1e"), ParseError);
  CHECK_THROWS_AS((void)px("x y"), ParseError);
}

TEST_CASE("let bindings are visible to the parser") {
  LetBindings lets;
  lets["F"] = px("(2 - x^2 - y^2)/2");
  const Expression e = parse("1/F^2", kXY, lets);
  CHECK(at(e, 1, 0) == 4.0);
}

TEST_CASE("differentiate gives the textbook derivatives") {
  const Expression d = differentiate(px("x^2 + y^2"), 0);
  CHECK(structurally_equal(d, px("2*x")));
  CHECK(at(d, 1.5, 7) == 3.0);

  const Expression c = differentiate(parse("cos(r)", kR), 0);
  CHECK(structurally_equal(c, parse("-sin(r)", kR)));

  // Quotient rule against the hand form (y*2y - (x^2+y^2-2))/y^2.
  const Expression q = differentiate(px("(x^2+y^2-2)/y"), "y", kXY);
  const Expression hand = px("(y*2*y - (x^2+y^2-2))/y^2");
  for (const auto& p : test::random_points(50, {{-1, 1}, {0.1, 1}})) {
    CHECK(at(q, p[0], p[1]) == doctest::Approx(at(hand, p[0], p[1])).epsilon(1e-13));
  }
  // Constant folding leaves no 0*x or x+0 behind.
  CHECK(differentiate(px("3*y"), 0).is_constant(0.0));
  CHECK(structurally_equal(differentiate(px("x + y"), 0), Expression(1.0)));
}

TEST_CASE("evaluate matches hand values and reports domain errors") {
  CHECK(at(px("x^2+y^2"), 3, 4) == 25.0);
  CHECK(std::fabs(at(px("cos(sqrt(x^2+y^2))"), test::kPi / 2, 0)) < 1e-16);
  CHECK(at(px("(2-x^2-y^2)/2"), 1, 0) == 0.5);
  // Integer powers allow negative bases; others need a > 0.
  CHECK(at(px("x^3"), -2, 0) == -8.0);
  CHECK(at(px("x^-2"), -2, 0) == 0.25);
  try {
    (void)at(px("1 + log(x - 1)"), 0.5, 0);
    FAIL("no error");
  } catch (const DomainError& e) {
    CHECK(e.subtree().find("log") != std::string::npos);
  }
  CHECK_THROWS_AS((void)at(px("sqrt(x)"), -1, 0), DomainError);
  CHECK_THROWS_AS((void)at(px("acos(x)"), 2, 0), DomainError);
  CHECK_THROWS_AS((void)at(px("x^0.5"), -1, 0), DomainError);
}

TEST_CASE("simplify applies the local identities") {
  const Expression x = Expression::variable("x", 0);
  const Expression raw = Expression::make_binary(
      BinaryOp::Add, Expression::constant(0), Expression::make_binary(BinaryOp::Mul, Expression::constant(1), x));
  CHECK(structurally_equal(simplify(raw), x));
  CHECK(structurally_equal(simplify(Expression::make_binary(BinaryOp::Pow, x, Expression::constant(1))), x));
  CHECK(simplify(Expression::make_binary(BinaryOp::Pow, x, Expression::constant(0))).is_constant(1.0));
  const Expression nested = Expression::make_binary(
      BinaryOp::Mul, Expression::constant(2),
      Expression::make_binary(BinaryOp::Mul, Expression::constant(3), x));
  CHECK(structurally_equal(simplify(nested), Expression::make_binary(BinaryOp::Mul, Expression::constant(6), x)));
}

TEST_CASE("simplify preserves evaluation to 4 ulp") {
  const char* texts[] = {"0 + 1*x + 0*y", "2*(3*(x*y)) + x^1", "(x^2+y^2-2)/y * 1", "exp(0*x + y - x^2)",
                         "cos(sqrt(x^2+y^2))^1 - 0", "(1 + x)^2 * (1 + y)^0"};
  for (const char* t : texts) {
    const Expression e = px(t);
    const Expression s = simplify(e);
    for (const auto& p : test::random_points(100, {{-2, 2}, {0.1, 2}}, 3)) {
      CHECK(ulp_distance(at(e, p[0], p[1]), at(s, p[0], p[1])) <= 4);
    }
  }
}

TEST_CASE("printing and re-parsing round-trips evaluation exactly") {
  const char* texts[] = {"x^2 + y^2", "-x^2", "cos(sqrt(x^2+y^2))", "(x^2+y^2-2)/y",
                         "exp(y - x^2) * 0.1", "atan(x/y) - acos(x/3)", "2^3^x", "x - (y - 1)"};
  for (const char* t : texts) {
    const Expression e = px(t);
    const Expression back = px(to_string(e));
    for (const auto& p : test::random_points(50, {{-1, 1}, {0.2, 1}}, 5)) {
      CHECK(at(e, p[0], p[1]) == at(back, p[0], p[1]));
    }
  }
}

TEST_CASE("compiled programs agree bit for bit with tree evaluation") {
  const Expression f = px("cos(sqrt(x^2+y^2))");
  const std::vector<Expression> outs{f, differentiate(f, 0), differentiate(differentiate(f, 0), 1),
                                     px("(x^2+y^2-2)/y")};
  const Program prog(outs);
  CHECK(prog.output_count() == outs.size());
  for (const auto& p : test::random_points(100, {{-3, 3}, {0.1, 3}}, 9)) {
    const auto v = prog.evaluate(p);
    for (std::size_t k = 0; k < outs.size(); ++k) CHECK(v[k] == evaluate(outs[k], p));
  }
}

TEST_CASE("symbolic derivatives agree with finite differences on every fixture expression") {
  // Collect metric entries, fields, vector field components and warps from
  // the shipped manifests; sample each inside its domain.
  std::size_t checked = 0;
  for (const char* name : {"euclid2", "euclid3", "polar_flat", "sphere2", "h2xr", "conf_nonsym", "ritore"}) {
    const Manifest m = load_manifest(std::string(EQUIPART_FIXTURE_DIR) + "/" + name + ".eqm");
    auto run = [&](const Expression& e, const std::vector<Point>& pts) {
      for (const Point& p : pts) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double sym = evaluate(differentiate(e, i), p);
          const double fd = test::fd_partial(e, p, i);
          CHECK(std::fabs(sym - fd) <= 1e-6 * (1.0 + std::fabs(sym)));
          ++checked;
        }
      }
    };
    for (const auto& me : m.manifolds) {
      std::vector<std::pair<double, double>> box;
      for (const auto& iv : me.box) box.emplace_back(iv.lo, iv.hi);
      const auto& man = *me.manifold;
      const auto pts = test::random_points(100, box, 11, [&](const Point& p) { return man.contains(p); });
      for (std::size_t i = 0; i < man.dim(); ++i) {
        for (std::size_t j = 0; j < man.dim(); ++j) run(man.metric(i, j), pts);
      }
      for (const auto& v : m.vfields) {
        if (v.manifold == man.name()) {
          for (const auto& c : v.field->components) run(c, pts);
        }
      }
      for (const auto& f : m.fields) {
        if (f.manifold != man.name()) continue;
        const auto fpts = test::random_points(100, box, 13, [&](const Point& p) { return f.field->contains(p); });
        run(f.field->expr, fpts);
      }
    }
    for (const auto& w : m.warps) {
      const auto pts = test::random_points(100, {{w.warp->r_min() + 0.01, w.warp->r_max()}}, 17);
      run(w.warp->f(), pts);
      run(w.warp->df(), pts);
    }
  }
  CHECK(checked > 5000);
}

#include <doctest.h>

#include <sstream>

#include "equipart/manifest.hpp"
#include "equipart/task.hpp"
#include "support.hpp"

using namespace equipart;

namespace {

Manifest fixture(const std::string& name) {
  return load_manifest(std::string(EQUIPART_FIXTURE_DIR) + "/" + name + ".eqm");
}

std::string error_text(const std::string& text) {
  try {
    parse_manifest(text, "t.eqm");
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const CheckLine& line(const TaskResult& r, const std::string& target) {
  for (const auto& c : r.checks) {
    if (c.target == target) return c;
  }
  FAIL("no check line for " << target);
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("fixture manifests load") {
  const Manifest h = fixture("h2xr");
  CHECK(h.manifolds.size() == 1);
  CHECK(h.vfields.size() == 4);
  CHECK(h.fields.size() == 4);
  CHECK(h.field("f3").symmetries == std::vector<std::string>{"X1", "X4"});
  CHECK(h.manifold("h2xr").box.size() == 3);
  CHECK(h.vfield("X1").field->components.size() == 3);

  const Manifest r = fixture("ritore");
  CHECK(r.warps.size() == 3);
  CHECK(r.warp("sphere").warp->r_max() == 3.0);

  const Manifest s = fixture("sphere2");
  REQUIRE(s.manifolds.front().center);
  CHECK((*s.manifolds.front().center)[0] == doctest::Approx(test::kPi / 2).epsilon(1e-15));

  CHECK_THROWS_WITH_AS(h.field("nope"), doctest::Contains("f1"), Error);
  CHECK_THROWS_AS(load_manifest("/nonexistent/file.eqm"), Error);
}

TEST_CASE("manifest errors carry source positions") {
  const std::string dup = error_text(
      "version = 1\n"
      "manifold a { coords = x; metric = diag(1); }\n"
      "manifold a { coords = y; metric = diag(1); }\n");
  CHECK(dup.find("t.eqm:3") != std::string::npos);
  CHECK(dup.find("duplicate manifold `a`") != std::string::npos);
  CHECK(dup.find("first defined at t.eqm:2") != std::string::npos);

  const std::string coord = error_text(
      "version = 1\n"
      "manifold a { coords = x, y; metric = diag(1, 1); }\n"
      "field f on a { expr = x + w; }\n");
  CHECK(coord.find("t.eqm:3") != std::string::npos);
  CHECK(coord.find("w") != std::string::npos);

  CHECK(error_text("manifold a { coords = x; metric = diag(1); }\n").find("version") != std::string::npos);
  CHECK(error_text("version = 1\nfield f on missing { expr = 1; }\n").find("missing") != std::string::npos);
  CHECK(error_text("version = 1\nmanifold a { coords = x; metric = diag(1) }\n") != "");
  CHECK(error_text("version = 1\n"
                   "manifold a { coords = x, y; metric = diag(1, 1); }\n"
                   "field f on a { expr = x; symmetries = Z; }\n")
            .find("Z") != std::string::npos);

  // Comments and pi are accepted.
  const Manifest ok = parse_manifest(
      "version = 1  # trailing\n"
      "manifold a { coords = x; metric = diag(1); box = [0, pi]; }\n");
  CHECK(ok.manifolds.front().box[0].hi == doctest::Approx(test::kPi).epsilon(1e-15));
}

TEST_CASE("plans resolve with flags over the named plan over defaults") {
  const Manifest m = parse_manifest(
      "version = 1\n"
      "manifold a { coords = x, y; metric = diag(1, 1); box = [-1, 1], [-1, 1]; }\n"
      "field f on a { expr = x^2 + y^2; }\n"
      "plan quick { samples = 100; seed = 7; }\n");
  TaskSpec s{.task = "check-equilibrium", .field = "f"};
  auto r = run_task(m, s);
  CHECK(r.samples == 2000);
  CHECK(r.seed == 42);
  CHECK(r.tol == 1e-8);
  s.plan = "quick";
  r = run_task(m, s);
  CHECK(r.samples == 100);
  CHECK(r.seed == 7);
  s.samples = 300;
  r = run_task(m, s);
  CHECK(r.samples == 300);
  CHECK(r.seed == 7);
  CHECK(r.checks.front().report.samples_used + r.checks.front().report.samples_excluded == 300);
}

TEST_CASE("task verdicts on the fixtures") {
  const Manifest e2 = fixture("euclid2");
  auto r = run_task(e2, {.task = "check-equilibrium", .field = "radial"});
  CHECK(r.manifest == "euclid2.eqm");
  CHECK(line(r, "radial").report.verdict == Verdict::Consistent);
  r = run_task(e2, {.task = "check-equilibrium", .field = "tilted"});
  CHECK(line(r, "tilted").report.verdict == Verdict::Refuted);
  CHECK(r.any(Verdict::Refuted));

  const Manifest h = fixture("h2xr");
  r = run_task(h, {.task = "check-killing", .vfields = {"X1", "X2"}});
  CHECK(line(r, "X1").report.verdict == Verdict::Consistent);
  CHECK(line(r, "[X1,X2]").report.verdict == Verdict::Consistent);
  r = run_task(h, {.task = "check-symmetry", .field = "f1", .vfields = {"X3", "X4"}});
  CHECK(line(r, "f1").report.verdict == Verdict::Consistent);

  const Manifest c = fixture("conf_nonsym");
  r = run_task(c, {.task = "check-separability", .manifold = "conf_nonsym"});
  CHECK(line(r, "conf_nonsym").report.verdict == Verdict::Refuted);

  const Manifest w = fixture("ritore");
  r = run_task(w, {.task = "check-stability", .warp = "ritore"});
  CHECK(r.checks.front().report.verdict_text() == "UNSTABLE");
  r = run_task(w, {.task = "check-stability", .warp = "flat"});
  CHECK(r.checks.front().report.verdict_text() == "STABLE-CANDIDATE");

  CHECK_THROWS_AS(run_task(e2, {.task = "check-equilibrium", .field = "nope"}), Error);
  CHECK_THROWS_AS(run_task(e2, {.task = "frobnicate"}), Error);
}

TEST_CASE("report text") {
  const Manifest e2 = fixture("euclid2");
  const auto r = run_task(e2, {.task = "check-equilibrium", .field = "tilted", .samples = 200});
  const std::string text = emit_report(r);
  std::istringstream in(text);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "# equipart 0.1.0 task=check-equilibrium targets=tilted manifest=euclid2.eqm seed=42 "
                  "samples=200 tol=1e-08");
  CHECK(first.rfind("CHECK check-equilibrium tilted VERDICT REFUTED max_residual=", 0) == 0);
  CHECK(text.find("CHECK check-equilibrium tilted:laplacian VERDICT CONSISTENT") != std::string::npos);
  CHECK(text.find("finished") == std::string::npos);
}

TEST_CASE("profile CSV") {
  const Manifest e2 = fixture("euclid2");
  const auto r = run_task(e2, {.task = "profile", .field = "radial", .samples = 400});
  REQUIRE_FALSE(r.profile.empty());
  const std::string csv = emit_report(r, ReportFormat::Csv);
  CHECK(csv.rfind("region,f,gradnormsq,laplacian,spread\n", 0) == 0);
  for (const auto& row : r.profile) {
    CHECK(row.laplacian == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(row.grad_norm_sq == doctest::Approx(4.0 * row.f).epsilon(1e-12));
  }
}

TEST_CASE("reports round-trip through the parser") {
  for (const auto& [name, spec] :
       {std::pair{"euclid2", TaskSpec{.task = "check-all", .samples = 300}},
        std::pair{"h2xr", TaskSpec{.task = "check-all", .samples = 300}},
        std::pair{"ritore", TaskSpec{.task = "check-all"}},
        std::pair{"sphere2", TaskSpec{.task = "check-all", .samples = 300}}}) {
    const std::string text = emit_report(run_task(fixture(name), spec));
    const TaskResult back = parse_report(text);
    CHECK(emit_report(back) == text);
    CHECK(back.manifest == std::string(name) + ".eqm");
  }
  CHECK_THROWS_AS(parse_report("garbage\n"), Error);
}

TEST_CASE("reports do not depend on the thread count") {
  for (const char* name : {"euclid2", "h2xr", "sphere2", "conf_nonsym"}) {
    TaskSpec one{.task = "check-all", .samples = 500};
    TaskSpec many = one;
    many.threads = 8;
    const Manifest m = fixture(name);
    CHECK(emit_report(run_task(m, one)) == emit_report(run_task(m, many)));
  }
}

// Python bindings for the core checks.

#include <numbers>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "equipart/equilibrium.hpp"
#include "equipart/error.hpp"
#include "equipart/manifest.hpp"
#include "equipart/polar.hpp"
#include "equipart/stability.hpp"
#include "equipart/symmetry.hpp"
#include "equipart/task.hpp"

namespace py = pybind11;
using namespace equipart;

namespace {

using MutableManifold = std::shared_ptr<Manifold>;

MutableManifold unconst(const ManifoldPtr& m) { return std::const_pointer_cast<Manifold>(m); }

// Names visible in expressions: the manifold's lets plus pi, as in manifests.
LetBindings scope(const LetBindings& lets) {
  LetBindings out = lets;
  out.try_emplace("pi", Expression::constant(std::numbers::pi));
  return out;
}

MutableManifold make_manifold(const std::string& name, const std::vector<std::string>& coords,
                              const std::vector<std::vector<std::string>>& metric,
                              const std::string& domain,
                              const std::vector<std::pair<std::string, std::string>>& lets) {
  LetBindings bound = scope({});
  for (const auto& [k, v] : lets) bound[k] = parse(v, coords, bound);
  if (metric.size() != coords.size()) throw GeometryError("metric must be a square matrix of size dim");
  std::vector<std::vector<Expression>> g;
  for (const auto& row : metric) {
    if (row.size() != coords.size()) throw GeometryError("metric must be a square matrix of size dim");
    std::vector<Expression> r;
    for (const auto& e : row) r.push_back(parse(e, coords, bound));
    g.push_back(std::move(r));
  }
  Domain d = domain.empty() ? Domain{} : Domain::parse(domain, coords, bound);
  bound.erase("pi");
  return std::make_shared<Manifold>(name, coords, g, d, bound);
}

SamplePlan make_plan(const std::vector<std::pair<double, double>>& box, std::size_t samples,
                     std::uint64_t seed) {
  SamplePlan p;
  p.samples = samples;
  p.seed = seed;
  for (const auto& [lo, hi] : box) p.box.push_back({lo, hi});
  return p;
}

}  // namespace

PYBIND11_MODULE(_equipart, m) {
  m.doc() = "Equilibrium functions, Killing symmetries, polar separability and circle stability";
  m.attr("__version__") = kVersion;

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<ManifestError>(m, "ManifestError", error);
  py::register_exception<DomainError>(m, "DomainError", error);
  auto geometry = py::register_exception<GeometryError>(m, "GeometryError", error);
  py::register_exception<CriticalPointError>(m, "CriticalPointError", geometry);
  py::register_exception<SamplingError>(m, "SamplingError", error);
  py::register_exception<PreconditionError>(m, "PreconditionError", error);

  py::enum_<Verdict>(m, "Verdict")
      .value("CONSISTENT", Verdict::Consistent)
      .value("REFUTED", Verdict::Refuted)
      .value("INCONCLUSIVE", Verdict::Inconclusive);

  py::class_<SubCheck>(m, "SubCheck")
      .def_readonly("name", &SubCheck::name)
      .def_readonly("verdict", &SubCheck::verdict)
      .def_readonly("max_residual", &SubCheck::max_residual)
      .def_readonly("tolerance", &SubCheck::tolerance)
      .def_readonly("samples", &SubCheck::samples)
      .def_readonly("excluded", &SubCheck::excluded)
      .def_readonly("witness", &SubCheck::witness);

  py::class_<CheckReport>(m, "CheckReport")
      .def_readonly("verdict", &CheckReport::verdict)
      .def_readonly("max_residual", &CheckReport::max_residual)
      .def_readonly("tolerance", &CheckReport::tolerance)
      .def_readonly("samples_used", &CheckReport::samples_used)
      .def_readonly("samples_excluded", &CheckReport::samples_excluded)
      .def_readonly("witness", &CheckReport::witness)
      .def_readonly("witness_residual", &CheckReport::witness_residual)
      .def_readonly("sub_checks", &CheckReport::sub_checks)
      .def_readonly("notes", &CheckReport::notes)
      .def_property_readonly("verdict_text", &CheckReport::verdict_text)
      .def("__repr__", [](const CheckReport& r) {
        return "<CheckReport " + r.verdict_text() + " max_residual=" + format_g17(r.max_residual) + ">";
      });

  py::class_<Manifold, MutableManifold>(m, "Manifold")
      .def(py::init(&make_manifold), py::arg("name"), py::arg("coords"), py::arg("metric"),
           py::arg("domain") = "", py::arg("lets") = std::vector<std::pair<std::string, std::string>>{},
           "Chart with a metric given as a matrix of expressions in the coordinates.")
      .def_property_readonly("name", &Manifold::name)
      .def_property_readonly("dim", &Manifold::dim)
      .def_property_readonly("coords", &Manifold::coords)
      .def("contains", [](const Manifold& self, std::vector<double> p) { return self.contains(p); })
      .def("metric_at", [](const Manifold& self, std::vector<double> p) { return metric_at(self, p).g; });

  py::class_<ScalarField>(m, "ScalarField")
      .def(py::init([](const MutableManifold& mf, const std::string& expr, const std::string& name,
                       const std::string& domain) {
             const LetBindings names = scope(mf->lets());
             Domain d = domain.empty() ? Domain{} : Domain::parse(domain, mf->coords(), names);
             return ScalarField(mf, parse(expr, mf->coords(), names), name.empty() ? expr : name, d);
           }),
           py::arg("manifold"), py::arg("expr"), py::arg("name") = "", py::arg("domain") = "")
      .def_readonly("name", &ScalarField::name)
      .def_property_readonly("manifold", [](const ScalarField& f) { return unconst(f.manifold); })
      .def_property_readonly("expr", [](const ScalarField& f) { return equipart::to_string(f.expr); })
      .def("__call__", [](const ScalarField& f, std::vector<double> p) { return evaluate(f.expr, p); });

  py::class_<VectorField>(m, "VectorField")
      .def(py::init([](const MutableManifold& mf, const std::vector<std::string>& comps, const std::string& name) {
             const LetBindings names = scope(mf->lets());
             std::vector<Expression> c;
             for (const auto& s : comps) c.push_back(parse(s, mf->coords(), names));
             return VectorField(mf, c, name);
           }),
           py::arg("manifold"), py::arg("components"), py::arg("name") = "X")
      .def_readonly("name", &VectorField::name)
      .def_property_readonly("components",
                             [](const VectorField& v) {
                               std::vector<std::string> out;
                               for (const auto& c : v.components) out.push_back(equipart::to_string(c));
                               return out;
                             })
      .def("__call__", [](const VectorField& v, std::vector<double> p) { return v.at(p); });

  m.def("grad_norm_sq", [](const ScalarField& f, std::vector<double> p) { return grad_norm_sq(f, p); },
        py::arg("field"), py::arg("point"));
  m.def("laplacian", [](const ScalarField& f, std::vector<double> p) { return laplace_beltrami(f, p); },
        py::arg("field"), py::arg("point"));
  m.def("killing_residual", [](const VectorField& x, std::vector<double> p) { return killing_residual(x, p); },
        py::arg("field"), py::arg("point"));
  m.def("lie_bracket", &lie_bracket, py::arg("x"), py::arg("y"));

  m.def(
      "check_equilibrium",
      [](const ScalarField& f, const std::vector<std::pair<double, double>>& box, std::size_t samples,
         std::uint64_t seed, double tol, unsigned threads) {
        return check_equilibrium(f, make_plan(box, samples, seed), CheckOptions{tol, threads});
      },
      py::arg("field"), py::arg("box"), py::arg("samples") = 2000, py::arg("seed") = 42,
      py::arg("tol") = 1e-8, py::arg("threads") = 1);

  m.def(
      "check_symmetry",
      [](const std::vector<VectorField>& fields, const ScalarField& f,
         const std::vector<std::pair<double, double>>& box, std::size_t samples, std::uint64_t seed, double tol,
         unsigned threads) {
        SymmetryOptions o;
        o.check = {tol, threads};
        return check_killing_induced_equilibrium({f.manifold, fields, 0}, f, make_plan(box, samples, seed), o);
      },
      py::arg("fields"), py::arg("field"), py::arg("box"), py::arg("samples") = 2000, py::arg("seed") = 42,
      py::arg("tol") = 1e-8, py::arg("threads") = 1);

  m.def(
      "check_separability",
      [](const MutableManifold& mf, std::vector<double> center, double rmax, double tol, unsigned threads) {
        PolarOptions o;
        o.rmax = rmax;
        o.tol = tol;
        o.threads = threads;
        return separability_check(*mf, center, o);
      },
      py::arg("manifold"), py::arg("center"), py::arg("rmax") = 1.0, py::arg("tol") = 1e-3,
      py::arg("threads") = 1);

  py::class_<WarpedPlane, std::shared_ptr<WarpedPlane>>(m, "WarpedPlane")
      .def(py::init([](const std::string& name, const std::string& f, double lo, double hi) {
             return std::make_shared<WarpedPlane>(WarpedPlane::parse(name, f, lo, hi));
           }),
           py::arg("name"), py::arg("f"), py::arg("r_min"), py::arg("r_max"),
           "The plane dr^2 + f(r)^2 dtheta^2 on r_min < r < r_max.")
      .def_property_readonly("name", &WarpedPlane::name)
      .def_property_readonly("r_min", &WarpedPlane::r_min)
      .def_property_readonly("r_max", &WarpedPlane::r_max)
      .def("criterion", [](const WarpedPlane& w, double r) { return evaluate(w.criterion(), std::span(&r, 1)); })
      .def("gauss_curvature", &WarpedPlane::gauss_curvature);

  m.def("ritore_criterion", [](const WarpedPlane& w, std::size_t samples) { return ritore_criterion(w, samples).report; },
        py::arg("warp"), py::arg("samples") = 201);
  m.def("second_variation_mode", &second_variation_mode, py::arg("warp"), py::arg("r0"), py::arg("k"),
        py::arg("nodes") = 1024);
  m.def(
      "first_variation_check",
      [](const WarpedPlane& w, double r0, std::vector<int> modes) { return first_variation_check(w, r0, modes).report; },
      py::arg("warp"), py::arg("r0"), py::arg("modes") = std::vector<int>{1, 2, 3});

  py::class_<Manifest>(m, "Manifest")
      .def_readonly("path", &Manifest::path)
      .def_property_readonly("manifolds",
                             [](const Manifest& mf) {
                               std::vector<std::string> out;
                               for (const auto& e : mf.manifolds) out.push_back(e.manifold->name());
                               return out;
                             })
      .def_property_readonly("fields",
                             [](const Manifest& mf) {
                               std::vector<std::string> out;
                               for (const auto& e : mf.fields) out.push_back(e.field->name);
                               return out;
                             })
      .def_property_readonly("vfields",
                             [](const Manifest& mf) {
                               std::vector<std::string> out;
                               for (const auto& e : mf.vfields) out.push_back(e.field->name);
                               return out;
                             })
      .def_property_readonly("warps",
                             [](const Manifest& mf) {
                               std::vector<std::string> out;
                               for (const auto& e : mf.warps) out.push_back(e.warp->name());
                               return out;
                             })
      .def("manifold", [](const Manifest& mf, const std::string& n) { return unconst(mf.manifold(n).manifold); })
      .def("field", [](const Manifest& mf, const std::string& n) { return *mf.field(n).field; })
      .def("vfield", [](const Manifest& mf, const std::string& n) { return *mf.vfield(n).field; })
      .def("warp", [](const Manifest& mf, const std::string& n) { return std::make_shared<WarpedPlane>(*mf.warp(n).warp); })
      .def("box", [](const Manifest& mf, const std::string& n) {
        std::vector<std::pair<double, double>> out;
        for (const auto& i : mf.manifold(n).box) out.emplace_back(i.lo, i.hi);
        return out;
      });

  m.def("load_manifest", &load_manifest, py::arg("path"));
  m.def("parse_manifest", &parse_manifest, py::arg("text"), py::arg("path") = "<manifest>");

  m.def(
      "run_task",
      [](const Manifest& mf, const std::string& task, const std::string& manifold, const std::string& field,
         std::vector<std::string> vfields, const std::string& warp, std::optional<std::size_t> samples,
         std::optional<std::uint64_t> seed, std::optional<double> tol, unsigned threads, bool csv) {
        TaskSpec s;
        s.task = task;
        s.manifold = manifold;
        s.field = field;
        s.vfields = std::move(vfields);
        s.warp = warp;
        s.samples = samples;
        s.seed = seed;
        s.tol = tol;
        s.threads = threads;
        return emit_report(run_task(mf, s), csv ? ReportFormat::Csv : ReportFormat::Text);
      },
      py::arg("manifest"), py::arg("task"), py::arg("manifold") = "", py::arg("field") = "",
      py::arg("vfields") = std::vector<std::string>{}, py::arg("warp") = "", py::arg("samples") = py::none(),
      py::arg("seed") = py::none(), py::arg("tol") = py::none(), py::arg("threads") = 1, py::arg("csv") = false,
      "Runs a command-line task and returns the report text.");
}

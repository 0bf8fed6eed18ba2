// equipart command line: runs checks on the entries of a manifest file and
// prints a text report.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "equipart/parallel.hpp"
#include "equipart/task.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRefuted = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitError = 3;

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string part = text.substr(start, comma - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) throw equipart::Error("bad coordinate `" + part + "` in `" + text + "`");
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

unsigned env_threads() {
  if (const char* s = std::getenv("EQUIPART_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(s, &end, 10);
    if (end != s && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    std::fprintf(stderr, "equipart: ignoring EQUIPART_THREADS=%s\n", s);
  }
  return equipart::default_thread_count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Checks equilibrium functions, Killing symmetries, polar separability and "
               "stability of circles on manifolds given in a manifest file."};
  app.set_version_flag("--version", equipart::kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string manifest_path;
  std::string plan;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<unsigned> threads;
  bool strict = false;
  app.add_option("--manifest", manifest_path, "Manifest file")->required();
  app.add_option("--plan", plan, "Named plan in the manifest");
  app.add_option("--samples", samples, "Number of sample points (default 2000)");
  app.add_option("--seed", seed, "Sampling seed (default 42)");
  app.add_option("--tol", tol, "Tolerance (default 1e-8, or 1e-3 for polar checks)");
  app.add_option("--threads", threads, "Worker threads (default: EQUIPART_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--strict", strict, "Exit 1 on REFUTED, 2 on INCONCLUSIVE");

  equipart::TaskSpec spec;
  std::string vfields;
  std::string center;
  std::string out_path;

  auto* eq = app.add_subcommand("check-equilibrium", "Rank test for an equilibrium function");
  eq->add_option("--manifold", spec.manifold);
  eq->add_option("--field", spec.field)->required();

  auto* kill = app.add_subcommand("check-killing", "Killing equation for vector fields and their brackets");
  kill->add_option("--vfield,--vfields", vfields, "Comma-separated vfield names")->required();

  auto* sym = app.add_subcommand("check-symmetry", "Killing-induced equilibrium partition");
  sym->add_option("--vfields", vfields, "Comma-separated vfield names")->required();
  sym->add_option("--field", spec.field)->required();

  auto* sep = app.add_subcommand("check-separability", "Separability of det g in geodesic polar coordinates");
  sep->add_option("--manifold", spec.manifold)->required();
  sep->add_option("--center", center, "Comma-separated coordinates");
  sep->add_option("--rmax", spec.rmax);

  auto* stab = app.add_subcommand("check-stability", "Stability of circles in a warped plane");
  stab->add_option("--warp", spec.warp)->required();
  stab->add_option("--mode", spec.mode, "Fourier mode (default 1,2,3)");
  stab->add_option("--r0", spec.r0, "Circle radius (default: middle of the range)");

  auto* prof = app.add_subcommand("profile", "Per-region profiles (grad f)^2 = F(f), Lap f = G(f)");
  prof->add_option("--manifold", spec.manifold);
  prof->add_option("--field", spec.field)->required();
  prof->add_option("--out", out_path, "CSV output path (default: stdout)");

  app.add_subcommand("check-all", "Every applicable check on every manifest entry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    spec.task = app.get_subcommands().front()->get_name();
    spec.plan = plan;
    spec.samples = samples;
    spec.seed = seed;
    spec.tol = tol;
    spec.threads = threads ? *threads : env_threads();
    if (!vfields.empty()) {
      std::size_t start = 0;
      while (start <= vfields.size()) {
        const std::size_t comma = std::min(vfields.find(',', start), vfields.size());
        spec.vfields.push_back(vfields.substr(start, comma - start));
        start = comma + 1;
      }
    }
    if (!center.empty()) spec.center = parse_point(center);

    const equipart::Manifest manifest = equipart::load_manifest(manifest_path);
    const equipart::TaskResult result = equipart::run_task(manifest, spec);

    if (spec.task == "profile") {
      const std::string csv = equipart::emit_report(result, equipart::ReportFormat::Csv);
      if (out_path.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(out_path, std::ios::binary);
        out << csv;
        if (!out) throw equipart::Error("cannot write `" + out_path + "`");
      }
    }
    if (spec.task != "profile" || !out_path.empty()) std::cout << equipart::emit_report(result);
    std::cout.flush();
    std::fprintf(stderr, "equipart: %s finished in %.3f s\n", spec.task.c_str(), result.wall_clock);

    if (strict && result.any(equipart::Verdict::Refuted)) return kExitRefuted;
    if (strict && result.any(equipart::Verdict::Inconclusive)) return kExitInconclusive;
    return kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "equipart: error: %s\n", e.what());
    return kExitError;
  }
}

#include "equipart/task.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "equipart/equilibrium.hpp"
#include "equipart/parallel.hpp"
#include "equipart/polar.hpp"
#include "equipart/stability.hpp"
#include "equipart/symmetry.hpp"

namespace equipart {

bool TaskResult::any(Verdict v) const {
  return std::any_of(checks.begin(), checks.end(), [&](const CheckLine& c) {
    return c.report.verdict == v ||
           std::any_of(c.report.sub_checks.begin(), c.report.sub_checks.end(),
                       [&](const SubCheck& s) { return s.verdict == v; });
  });
}

namespace {

constexpr double kSymbolicTol = 1e-8;
constexpr double kPolarTol = 1e-3;
constexpr double kSlopeTol = 0.05;

class Runner {
 public:
  Runner(const Manifest& manifest, const TaskSpec& spec, TaskResult& out)
      : manifest_(manifest), spec_(spec), out_(out) {
    if (!spec.plan.empty()) {
      const PlanEntry& p = manifest.plan(spec.plan);
      if (p.samples) samples_ = *p.samples;
      if (p.seed) seed_ = *p.seed;
      if (p.tol) tol_ = *p.tol;
      if (p.eps_crit) eps_crit_ = *p.eps_crit;
    }
    if (spec.samples) samples_ = *spec.samples;
    if (spec.seed) seed_ = *spec.seed;
    if (spec.tol) tol_ = *spec.tol;
    if (samples_ == 0) throw Error("--samples must be at least 1");
    out_.seed = seed_;
    out_.samples = samples_;
  }

  double symbolic_tol() const { return tol_.value_or(kSymbolicTol); }
  double polar_tol() const { return tol_.value_or(kPolarTol); }

  void equilibrium(const FieldEntry& fe) {
    CheckOptions o{symbolic_tol(), spec_.threads};
    add("check-equilibrium", fe.field->name, check_equilibrium(*fe.field, plan_for(fe), o));
  }

  void killing(const std::vector<const VectorFieldEntry*>& fields) {
    if (fields.empty()) throw Error("no vector fields given");
    const ManifoldEntry& m = manifest_.manifold(fields.front()->manifold);
    for (const auto* v : fields) {
      if (v->manifold != fields.front()->manifold) {
        throw Error("vfields `" + fields.front()->field->name + "` and `" + v->field->name +
                    "` live on different manifolds");
      }
    }
    const std::vector<Point> samples = sample_domain(*m.manifold, plan_for(m));
    for (const auto* v : fields) add("check-killing", v->field->name, killing_report(*v->field, samples));
    // Brackets of Killing fields are Killing.
    for (std::size_t i = 0; i < fields.size(); ++i) {
      for (std::size_t j = i + 1; j < fields.size(); ++j) {
        VectorField b = lie_bracket(*fields[i]->field, *fields[j]->field);
        add("check-killing", b.name, killing_report(b, samples));
      }
    }
  }

  void symmetry(const std::vector<const VectorFieldEntry*>& fields, const FieldEntry& fe) {
    KillingAlgebra algebra{manifest_.manifold(fe.manifold).manifold, {}, 0};
    for (const auto* v : fields) {
      if (v->manifold != fe.manifold) {
        throw Error("vfield `" + v->field->name + "` is not on the manifold of field `" +
                    fe.field->name + "`");
      }
      algebra.fields.push_back(*v->field);
    }
    SymmetryOptions o;
    o.check = {symbolic_tol(), spec_.threads};
    add("check-symmetry", fe.field->name,
        check_killing_induced_equilibrium(algebra, *fe.field, plan_for(fe), o));
  }

  void separability(const ManifoldEntry& me) {
    const Point center = spec_.center ? *spec_.center
                         : me.center  ? *me.center
                                      : throw Error("manifold `" + me.manifold->name() +
                                                    "` has no center; pass --center");
    if (center.size() != me.manifold->dim()) {
      throw Error("--center needs " + std::to_string(me.manifold->dim()) + " coordinates");
    }
    PolarOptions o;
    o.rmax = spec_.rmax ? *spec_.rmax : me.rmax.value_or(1.0);
    o.tol = polar_tol();
    o.threads = spec_.threads;
    if (!(o.rmax > 0.0)) throw Error("--rmax must be positive");
    const PolarPatch patch = build_polar_patch(*me.manifold, center, o);
    const std::string& name = me.manifold->name();
    add("check-separability", name, separability_check(patch, o));
    add("half-r2", name, half_r2_check(patch, o));

    const SlopeFit fit = small_r_slope(*me.manifold, center, o);
    CheckReport slope;
    slope.tolerance = kSlopeTol;
    slope.max_residual = fit.max_deviation;
    slope.samples_used = fit.slopes.size();
    if (fit.max_deviation > kSlopeTol) {
      slope.verdict = Verdict::Refuted;
      slope.witness = center;
      slope.witness_residual = fit.max_deviation;
    }
    slope.notes.push_back("d log det G / d log r at r = 0.01..0.05, expected " +
                          format_g17(fit.expected));
    add("log-det-slope", name, std::move(slope));
  }

  void stability(const WarpEntry& we) {
    const WarpedPlane& w = *we.warp;
    RitoreResult rit = ritore_criterion(w);
    const double r0 = spec_.r0.value_or(0.5 * (w.r_min() + w.r_max()));
    if (!(r0 > w.r_min() && r0 < w.r_max())) throw Error("--r0 must lie inside the warp's range");
    std::vector<int> modes{1, 2, 3};
    if (spec_.mode) {
      if (*spec_.mode < 1) throw Error("--mode must be a positive integer");
      modes = {*spec_.mode};
    }
    for (int k : modes) {
      rit.report.notes.push_back("second variation Q(cos " + std::to_string(k) + " theta) at r0 = " +
                                 format_g17(r0) + ": " +
                                 format_g17(second_variation_mode(w, r0, k)));
    }
    add("check-stability", w.name(), std::move(rit.report));
    add("first-variation", w.name(), first_variation_check(w, r0, modes).report);
  }

  void profile(const FieldEntry& fe) {
    ProfileOptions o;
    o.check = {symbolic_tol(), spec_.threads};
    o.regions.threads = spec_.threads;
    const ProfileSet set = extract_profiles(*fe.field, plan_for(fe), o);
    CheckReport report = set.check;
    for (const RegionProfile& rp : set.profiles) {
      const Region& region = set.decomposition.regions[static_cast<std::size_t>(rp.region)];
      SubCheck s{"region" + std::to_string(rp.region), rp.verdict, 0.0, o.profile_tol,
                 region.members.size(), 0, std::nullopt};
      for (const ProfileBin& bin : rp.bins) {
        s.max_residual = std::max(s.max_residual, bin.spread);
        out_.profile.push_back({rp.region, bin.f, bin.grad_norm_sq, bin.laplacian, bin.spread});
      }
      if (rp.offending_bin) {
        s.witness = set.decomposition.samples[rp.bins[*rp.offending_bin].members.front()];
        if (report.verdict != Verdict::Refuted) {
          report.verdict = Verdict::Refuted;
          report.witness = s.witness;
        }
      }
      report.notes.push_back("region" + std::to_string(rp.region) + ": f in (" +
                             format_g17(rp.f_lo) + ", " + format_g17(rp.f_hi) + "), " +
                             std::to_string(rp.bins.size()) + " bins");
      report.sub_checks.push_back(std::move(s));
    }
    std::string crit;
    for (double c : set.decomposition.critical_values) crit += (crit.empty() ? "" : ", ") + format_g17(c);
    report.notes.push_back("critical values: " + (crit.empty() ? std::string("none") : crit));
    add("profile", fe.field->name, std::move(report));
  }

 private:
  SamplePlan plan_for(const ManifoldEntry& m) const {
    if (m.box.empty()) {
      throw Error("manifold `" + m.manifold->name() + "` has no sampling box; add `box = ...`");
    }
    return {samples_, seed_, m.box, eps_crit_, 0};
  }

  SamplePlan plan_for(const FieldEntry& f) const {
    if (!f.box.empty()) return {samples_, seed_, f.box, eps_crit_, 0};
    const ManifoldEntry& m = manifest_.manifold(f.manifold);
    if (m.box.empty()) {
      throw Error("field `" + f.field->name + "` has no sampling box; add `box = ...` to it or to `" +
                  f.manifold + "`");
    }
    return plan_for(m);
  }

  CheckReport killing_report(const VectorField& x, const std::vector<Point>& samples) const {
    const KillingOperator op(x);
    std::vector<double> residual(samples.size(), -1.0);  // -1: excluded
    parallel_for(samples.size(), spec_.threads, [&](std::size_t i) {
      try {
        const double r = op.residual(samples[i]);
        if (std::isfinite(r)) residual[i] = r;
      } catch (const Error&) {
      }
    });
    CheckReport report;
    report.tolerance = symbolic_tol();
    std::optional<std::size_t> worst;
    for (std::size_t i = 0; i < residual.size(); ++i) {
      if (residual[i] < 0.0) {
        ++report.samples_excluded;
        continue;
      }
      ++report.samples_used;
      if (!worst || residual[i] > report.max_residual) {
        report.max_residual = residual[i];
        worst = i;
      }
    }
    if (worst && report.max_residual > report.tolerance) {
      report.verdict = Verdict::Refuted;
      report.witness = samples[*worst];
      report.witness_residual = report.max_residual;
    } else if (2 * report.samples_excluded > samples.size()) {
      report.verdict = Verdict::Inconclusive;
    }
    return report;
  }

  void add(std::string task, std::string target, CheckReport report) {
    out_.checks.push_back({std::move(task), std::move(target), std::move(report)});
  }

  const Manifest& manifest_;
  const TaskSpec& spec_;
  TaskResult& out_;
  std::size_t samples_ = 2000;
  std::uint64_t seed_ = 42;
  std::optional<double> tol_;
  double eps_crit_ = kDefaultEpsCrit;
};

std::vector<const VectorFieldEntry*> vfields_named(const Manifest& m, const std::vector<std::string>& names) {
  std::vector<const VectorFieldEntry*> out;
  for (const auto& n : names) out.push_back(&m.vfield(n));
  return out;
}

const FieldEntry& field_for(const Manifest& m, const TaskSpec& spec) {
  if (spec.field.empty()) throw Error(spec.task + " needs --field");
  const FieldEntry& f = m.field(spec.field);
  if (!spec.manifold.empty() && f.manifold != spec.manifold) {
    throw Error("field `" + spec.field + "` is defined on `" + f.manifold + "`, not on `" +
                spec.manifold + "`");
  }
  return f;
}

}  // namespace

TaskResult run_task(const Manifest& manifest, const TaskSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  TaskResult out;
  out.task = spec.task;
  out.manifest = std::filesystem::path(manifest.path).filename().string();
  Runner run(manifest, spec, out);
  const bool polar = spec.task == "check-separability";
  out.tol = polar ? run.polar_tol() : run.symbolic_tol();

  if (spec.task == "check-equilibrium") {
    out.targets = {spec.field};
    run.equilibrium(field_for(manifest, spec));
  } else if (spec.task == "check-killing") {
    if (spec.vfields.empty()) throw Error("check-killing needs --vfield");
    out.targets = spec.vfields;
    run.killing(vfields_named(manifest, spec.vfields));
  } else if (spec.task == "check-symmetry") {
    if (spec.vfields.empty()) throw Error("check-symmetry needs --vfields");
    out.targets = spec.vfields;
    out.targets.push_back(spec.field);
    run.symmetry(vfields_named(manifest, spec.vfields), field_for(manifest, spec));
  } else if (spec.task == "check-separability") {
    if (spec.manifold.empty()) throw Error("check-separability needs --manifold");
    out.targets = {spec.manifold};
    run.separability(manifest.manifold(spec.manifold));
  } else if (spec.task == "check-stability") {
    if (spec.warp.empty()) throw Error("check-stability needs --warp");
    out.targets = {spec.warp};
    run.stability(manifest.warp(spec.warp));
  } else if (spec.task == "profile") {
    out.targets = {spec.field};
    run.profile(field_for(manifest, spec));
  } else if (spec.task == "check-all") {
    out.targets = {"all"};
    for (const ManifoldEntry& me : manifest.manifolds) {
      const std::string& name = me.manifold->name();
      std::vector<const VectorFieldEntry*> vfs;
      for (const auto& v : manifest.vfields) {
        if (v.manifold == name) vfs.push_back(&v);
      }
      if (!vfs.empty()) run.killing(vfs);
      if (me.center) run.separability(me);
      for (const FieldEntry& fe : manifest.fields) {
        if (fe.manifold != name) continue;
        run.equilibrium(fe);
        if (!fe.symmetries.empty()) run.symmetry(vfields_named(manifest, fe.symmetries), fe);
      }
    }
    for (const WarpEntry& we : manifest.warps) run.stability(we);
  } else {
    throw Error("unknown task `" + spec.task + "`");
  }
  out.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

std::string join_g17(const Point& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + format_g17(p[i]);
  return s;
}

void check_line(std::ostringstream& os, const std::string& task, const std::string& target,
                const std::string& verdict, double max_residual, double tol, std::size_t samples,
                std::size_t excluded, const std::optional<Point>& witness) {
  os << "CHECK " << task << ' ' << target << " VERDICT " << verdict
     << " max_residual=" << format_g17(max_residual) << " tol=" << format_g17(tol)
     << " samples=" << samples << " excluded=" << excluded
     << " witness=" << (witness ? join_g17(*witness) : std::string("-")) << '\n';
}

}  // namespace

std::string emit_report(const TaskResult& result, ReportFormat format) {
  std::ostringstream os;
  if (format == ReportFormat::Csv) {
    os << "region,f,gradnormsq,laplacian,spread\n";
    for (const ProfileRow& r : result.profile) {
      os << r.region << ',' << format_g17(r.f) << ',' << format_g17(r.grad_norm_sq) << ','
         << format_g17(r.laplacian) << ',' << format_g17(r.spread) << '\n';
    }
    return os.str();
  }
  std::string targets;
  for (const auto& t : result.targets) targets += (targets.empty() ? "" : ",") + t;
  os << "# equipart " << result.version << " task=" << result.task << " targets=" << targets
     << " manifest=" << result.manifest << " seed=" << result.seed << " samples=" << result.samples
     << " tol=" << format_g17(result.tol) << '\n';
  for (const CheckLine& c : result.checks) {
    const CheckReport& r = c.report;
    check_line(os, c.task, c.target, r.verdict_text(), r.max_residual, r.tolerance, r.samples_used,
               r.samples_excluded, r.witness);
    for (const SubCheck& s : r.sub_checks) {
      check_line(os, c.task, c.target + ":" + s.name, to_string(s.verdict), s.max_residual,
                 s.tolerance, s.samples, s.excluded, s.witness);
    }
    for (const auto& n : r.notes) os << "# " << c.target << ": " << n << '\n';
  }
  return os.str();
}

namespace {

Verdict verdict_from(const std::string& s, std::optional<std::string>* label) {
  if (s == "CONSISTENT") return Verdict::Consistent;
  if (s == "REFUTED") return Verdict::Refuted;
  if (s == "INCONCLUSIVE") return Verdict::Inconclusive;
  if (!label) throw Error("unknown verdict `" + s + "` in report");
  *label = s;
  return Verdict::Consistent;
}

// key=value with the expected key.
std::string field_value(std::istringstream& in, const std::string& key) {
  std::string tok;
  in >> tok;
  if (tok.rfind(key + "=", 0) != 0) throw Error("report: expected `" + key + "=`, found `" + tok + "`");
  return tok.substr(key.size() + 1);
}

std::optional<Point> witness_from(const std::string& s) {
  if (s == "-") return std::nullopt;
  Point p;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) p.push_back(std::stod(part));
  return p;
}

}  // namespace

TaskResult parse_report(const std::string& text) {
  TaskResult out;
  std::istringstream lines(text);
  std::string line;
  if (!std::getline(lines, line) || line.rfind("# equipart ", 0) != 0) {
    throw Error("report: missing `# equipart` header");
  }
  {
    std::istringstream in(line.substr(11));
    in >> out.version;
    out.task = field_value(in, "task");
    const std::string targets = field_value(in, "targets");
    std::istringstream ts(targets);
    std::string t;
    while (std::getline(ts, t, ',')) out.targets.push_back(t);
    out.manifest = field_value(in, "manifest");
    out.seed = std::stoull(field_value(in, "seed"));
    out.samples = std::stoull(field_value(in, "samples"));
    out.tol = std::stod(field_value(in, "tol"));
  }
  while (std::getline(lines, line)) {
    if (line.rfind("# ", 0) == 0) {
      if (out.checks.empty()) throw Error("report: note before any check");
      const std::string prefix = out.checks.back().target + ": ";
      if (line.compare(2, prefix.size(), prefix) != 0) throw Error("report: stray note `" + line + "`");
      out.checks.back().report.notes.push_back(line.substr(2 + prefix.size()));
      continue;
    }
    std::istringstream in(line);
    std::string word, task, target, verdict;
    in >> word >> task >> target >> verdict;
    if (word != "CHECK" || verdict != "VERDICT") throw Error("report: unexpected line `" + line + "`");
    in >> verdict;
    const double max_residual = std::stod(field_value(in, "max_residual"));
    const double tol = std::stod(field_value(in, "tol"));
    const std::size_t samples = std::stoull(field_value(in, "samples"));
    const std::size_t excluded = std::stoull(field_value(in, "excluded"));
    const std::optional<Point> witness = witness_from(field_value(in, "witness"));

    const bool sub = !out.checks.empty() && out.checks.back().task == task &&
                     target.rfind(out.checks.back().target + ":", 0) == 0;
    if (sub) {
      CheckLine& c = out.checks.back();
      SubCheck s{target.substr(c.target.size() + 1), verdict_from(verdict, nullptr), max_residual,
                 tol, samples, excluded, witness};
      c.report.sub_checks.push_back(std::move(s));
    } else {
      CheckLine c{task, target, {}};
      c.report.verdict = verdict_from(verdict, &c.report.label);
      c.report.max_residual = max_residual;
      c.report.tolerance = tol;
      c.report.samples_used = samples;
      c.report.samples_excluded = excluded;
      c.report.witness = witness;
      out.checks.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace equipart

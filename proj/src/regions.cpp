#include <algorithm>
#include <cmath>
#include <numeric>

#include "equipart/equilibrium.hpp"
#include "equipart/error.hpp"
#include "equipart/parallel.hpp"

namespace equipart {

namespace {

struct PointInfo {
  bool ok = false;
  double value = 0.0;
  double grad = 0.0;  // |df|_g
  std::vector<double> df;
};

PointInfo probe(const FieldCalculus& fc, std::span<const double> p) {
  PointInfo info;
  if (!fc.field().contains(p)) return info;
  try {
    const MetricSample ms = metric_at(fc.manifold(), p);
    auto jet = fc.jet(p);
    info.value = jet.value;
    info.grad = covector_norm(ms, jet.df);
    info.df = std::move(jet.df);
    info.ok = std::isfinite(info.value) && std::isfinite(info.grad);
  } catch (const Error&) {
    info.ok = false;
  }
  return info;
}

// Newton iteration on df = 0 with a pseudo-inverse Hessian, so that
// degenerate critical sets (circles, planes) are reached along their normal.
std::optional<Point> refine_critical(const FieldCalculus& fc, Point x, double accept) {
  const std::size_t n = x.size();
  const long ln = static_cast<long>(n);
  for (int iter = 0; iter < 60; ++iter) {
    if (!fc.field().contains(x)) return std::nullopt;
    FieldCalculus::Jet jet;
    MetricSample ms;
    try {
      ms = metric_at(fc.manifold(), x);
      jet = fc.jet(x);
    } catch (const Error&) {
      return std::nullopt;
    }
    const double g = covector_norm(ms, jet.df);
    if (!std::isfinite(g)) return std::nullopt;
    if (g <= 1e-3 * accept) return x;
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        hess(jet.d2f.data(), ln, ln);
    const Eigen::Map<const Eigen::VectorXd> grad(jet.df.data(), ln);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(hess, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-8);
    const Eigen::VectorXd step = svd.solve(grad);
    double size = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] -= step(static_cast<long>(i));
      size = std::max(size, std::fabs(step(static_cast<long>(i))) / (1.0 + std::fabs(x[i])));
    }
    if (size < 1e-15) break;
  }
  const PointInfo last = probe(fc, x);
  if (last.ok && last.grad <= accept) return x;
  return std::nullopt;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

RegionDecomposition detect_regions(const ScalarField& f, const SamplePlan& plan,
                                   const RegionOptions& options) {
  const FieldCalculus fc(f);
  const std::size_t n = f.manifold->dim();
  RegionDecomposition out;
  out.samples = sample_domain(f, plan);
  const std::size_t count = out.samples.size();

  std::vector<PointInfo> info(count);
  parallel_for(count, options.threads, [&](std::size_t i) { info[i] = probe(fc, out.samples[i]); });

  out.values.assign(count, 0.0);
  double fmin = INFINITY;
  double fmax = -INFINITY;
  double gmax = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    out.values[i] = info[i].value;
    if (!info[i].ok) continue;
    fmin = std::min(fmin, info[i].value);
    fmax = std::max(fmax, info[i].value);
    gmax = std::max(gmax, info[i].grad);
  }

  // Critical values from refined low-gradient samples.
  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < count; ++i) {
    if (info[i].ok && info[i].grad <= options.seed_ratio * gmax) seeds.push_back(i);
  }
  std::stable_sort(seeds.begin(), seeds.end(),
                   [&](std::size_t a, std::size_t b) { return info[a].grad < info[b].grad; });
  if (seeds.size() > options.max_seeds) seeds.resize(options.max_seeds);
  const double accept = std::max(plan.eps_crit, 1e-9 * gmax);
  std::vector<std::optional<Point>> refined(seeds.size());
  parallel_for(seeds.size(), options.threads, [&](std::size_t k) {
    refined[k] = refine_critical(fc, out.samples[seeds[k]], accept);
  });
  struct Candidate {
    double value;
    double grad;
    Point where;
  };
  std::vector<Candidate> found;
  for (auto& r : refined) {
    if (!r) continue;
    const PointInfo pi = probe(fc, *r);
    found.push_back({pi.value, pi.grad, std::move(*r)});
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
  const double width = options.cluster_width * std::max(fmax - fmin, 1e-300);
  for (std::size_t k = 0; k < found.size();) {
    std::size_t end = k + 1;
    std::size_t best = k;
    while (end < found.size() && found[end].value - found[end - 1].value <= width) {
      if (found[end].grad < found[best].grad) best = end;
      ++end;
    }
    out.critical_values.push_back(found[best].value);
    out.critical_points.push_back(found[best].where);
    k = end;
  }

  // Nearest-neighbour graph over usable samples.
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < count; ++i) {
    if (info[i].ok && info[i].grad > plan.eps_crit) usable.push_back(i);
  }
  const std::size_t k_nn = std::min(options.neighbours, usable.empty() ? 0 : usable.size() - 1);
  std::vector<std::vector<std::size_t>> neighbours(usable.size());
  parallel_for(usable.size(), options.threads, [&](std::size_t a) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(usable.size());
    const Point& pa = out.samples[usable[a]];
    for (std::size_t b = 0; b < usable.size(); ++b) {
      if (b == a) continue;
      const Point& pb = out.samples[usable[b]];
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
      d.emplace_back(s, b);
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<long>(k_nn), d.end());
    for (std::size_t j = 0; j < k_nn; ++j) neighbours[a].push_back(d[j].second);
  });

  // An edge survives unless the segment leaves the domain, crosses a
  // critical level, or passes (close to) the critical set.
  constexpr int kProbes = 16;
  auto keep_edge = [&](std::size_t a, std::size_t b) {
    const Point& p = out.samples[usable[a]];
    const Point& q = out.samples[usable[b]];
    const double fp = info[usable[a]].value;
    const double fq = info[usable[b]].value;
    for (double c : out.critical_values) {
      if ((fp - c) * (fq - c) < 0.0) return false;
    }
    std::vector<double> dir(n);
    for (std::size_t i = 0; i < n; ++i) dir[i] = q[i] - p[i];
    auto at = [&](double t) {
      Point x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = p[i] + t * dir[i];
      return probe(fc, x);
    };
    const double floor_grad = 1e-3 * std::max(info[usable[a]].grad, info[usable[b]].grad);
    double t_prev = 0.0;
    double d_prev = dot(info[usable[a]].df, dir);
    for (int s = 1; s <= kProbes; ++s) {
      const double t = static_cast<double>(s) / kProbes;
      const PointInfo pi = s == kProbes ? info[usable[b]] : at(t);
      if (!pi.ok) return false;
      const double d = dot(pi.df, dir);
      if (d_prev * d < 0.0) {
        double lo = t_prev;
        double hi = t;
        double d_lo = d_prev;
        PointInfo mid;
        for (int it = 0; it < 50 && hi - lo > 1e-14; ++it) {
          const double tm = 0.5 * (lo + hi);
          mid = at(tm);
          if (!mid.ok) return false;
          const double dm = dot(mid.df, dir);
          if (dm == 0.0) break;
          if ((dm < 0.0) == (d_lo < 0.0)) {
            lo = tm;
            d_lo = dm;
          } else {
            hi = tm;
          }
        }
        if (mid.ok && mid.grad <= floor_grad) return false;
      }
      t_prev = t;
      d_prev = d;
    }
    return true;
  };

  std::vector<std::vector<char>> keep(usable.size());
  parallel_for(usable.size(), options.threads, [&](std::size_t a) {
    keep[a].resize(neighbours[a].size());
    for (std::size_t j = 0; j < neighbours[a].size(); ++j) {
      const std::size_t b = neighbours[a][j];
      // Evaluate each segment from its lower endpoint so both directions agree.
      keep[a][j] = a < b ? keep_edge(a, b) : keep_edge(b, a);
    }
  });
  UnionFind uf(usable.size());
  for (std::size_t a = 0; a < usable.size(); ++a) {
    for (std::size_t j = 0; j < neighbours[a].size(); ++j) {
      if (keep[a][j]) uf.unite(a, neighbours[a][j]);
    }
  }

  std::vector<std::vector<std::size_t>> components;
  std::vector<long> component_of(usable.size(), -1);
  for (std::size_t a = 0; a < usable.size(); ++a) {
    const std::size_t root = uf.find(a);
    if (component_of[root] < 0) {
      component_of[root] = static_cast<long>(components.size());
      components.emplace_back();
    }
    components[static_cast<std::size_t>(component_of[root])].push_back(usable[a]);
  }
  std::stable_sort(components.begin(), components.end(),
                   [](const auto& x, const auto& y) { return x.size() > y.size(); });

  out.region_of.assign(count, -1);
  for (std::size_t r = 0; r < components.size(); ++r) {
    Region reg;
    reg.id = static_cast<int>(r);
    reg.members = components[r];
    reg.f_min = INFINITY;
    reg.f_max = -INFINITY;
    reg.centroid.assign(n, 0.0);
    for (std::size_t i : reg.members) {
      out.region_of[i] = reg.id;
      reg.f_min = std::min(reg.f_min, out.values[i]);
      reg.f_max = std::max(reg.f_max, out.values[i]);
      for (std::size_t d = 0; d < n; ++d) reg.centroid[d] += out.samples[i][d];
    }
    for (auto& c : reg.centroid) c /= static_cast<double>(reg.members.size());
    reg.f_lo = reg.f_min;
    reg.f_hi = reg.f_max;
    for (double c : out.critical_values) {
      if (c <= reg.f_min) reg.f_lo = c;
      if (c >= reg.f_max && reg.f_hi == reg.f_max) reg.f_hi = c;
    }
    out.regions.push_back(std::move(reg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profiles

namespace {

// Largest deviation of y from a least-squares polynomial in t, relative to
// 1 + |mean y|. Degree is capped so that at least two residual degrees of
// freedom remain.
double fit_spread(const std::vector<double>& t, const std::vector<double>& y, double mean) {
  const std::size_t m = t.size();
  if (m < 3) return 0.0;
  const std::size_t degree = std::min<std::size_t>(5, m - 2);
  const auto [lo_it, hi_it] = std::minmax_element(t.begin(), t.end());
  const double centre = 0.5 * (*lo_it + *hi_it);
  const double half = 0.5 * (*hi_it - *lo_it);
  Eigen::MatrixXd a(static_cast<long>(m), static_cast<long>(degree + 1));
  Eigen::VectorXd b(static_cast<long>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const double u = half > 0.0 ? (t[i] - centre) / half : 0.0;
    double pk = 1.0;
    for (std::size_t k = 0; k <= degree; ++k) {
      a(static_cast<long>(i), static_cast<long>(k)) = pk;
      pk *= u;
    }
    b(static_cast<long>(i)) = y[i];
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  const Eigen::VectorXd resid = b - a * coef;
  return resid.cwiseAbs().maxCoeff() / (1.0 + std::fabs(mean));
}

}  // namespace

ProfileSet extract_profiles(const ScalarField& f, const SamplePlan& plan,
                            const ProfileOptions& options) {
  ProfileSet out;
  out.check = check_equilibrium(f, plan, options.check);
  if (!out.check.consistent()) {
    throw PreconditionError(std::string("profiles need a CONSISTENT equilibrium verdict, got ") +
                            to_string(out.check.verdict));
  }
  RegionOptions ro = options.regions;
  ro.threads = options.check.threads;
  out.decomposition = detect_regions(f, plan, ro);
  const auto& dec = out.decomposition;
  const std::size_t count = dec.samples.size();

  const FieldCalculus fc(f);
  out.grad_norm_sq.assign(count, NAN);
  out.laplacian.assign(count, NAN);
  parallel_for(count, options.check.threads, [&](std::size_t i) {
    if (dec.region_of[i] < 0) return;
    const auto t = fc.triple(dec.samples[i]);
    out.grad_norm_sq[i] = t.grad_norm_sq;
    out.laplacian[i] = t.laplacian;
  });

  for (const Region& reg : dec.regions) {
    RegionProfile prof;
    prof.region = reg.id;
    prof.f_lo = reg.f_lo;
    prof.f_hi = reg.f_hi;
    const std::size_t nbins = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(reg.members.size()))));
    const double span = reg.f_max - reg.f_min;
    std::vector<std::vector<std::size_t>> bins(nbins);
    for (std::size_t i : reg.members) {
      std::size_t b = span > 0.0 ? static_cast<std::size_t>(
                                       (dec.values[i] - reg.f_min) / span * static_cast<double>(nbins))
                                 : 0;
      bins[std::min(b, nbins - 1)].push_back(i);
    }
    // Near a critical endpoint the profiles are analytic in sqrt|f - c|
    // rather than in f, so fit in that variable there.
    const bool lo_critical =
        std::find(dec.critical_values.begin(), dec.critical_values.end(), reg.f_lo) !=
        dec.critical_values.end();
    const bool hi_critical =
        std::find(dec.critical_values.begin(), dec.critical_values.end(), reg.f_hi) !=
        dec.critical_values.end();

    double worst = -1.0;
    for (std::size_t b = 0; b < nbins; ++b) {
      if (bins[b].empty()) continue;
      ProfileBin bin;
      bin.f_lo = reg.f_min + span * static_cast<double>(b) / static_cast<double>(nbins);
      bin.f_hi = reg.f_min + span * static_cast<double>(b + 1) / static_cast<double>(nbins);
      bin.members = bins[b];
      std::sort(bin.members.begin(), bin.members.end());
      const double m = static_cast<double>(bin.members.size());
      const double mid = 0.5 * (bin.f_lo + bin.f_hi);
      std::optional<double> anchor;
      if (lo_critical && (!hi_critical || mid - reg.f_lo <= reg.f_hi - mid)) anchor = reg.f_lo;
      if (hi_critical && (!lo_critical || mid - reg.f_lo > reg.f_hi - mid)) anchor = reg.f_hi;
      std::vector<double> t;
      std::vector<double> yg;
      std::vector<double> yl;
      for (std::size_t i : bin.members) {
        bin.f += dec.values[i];
        bin.grad_norm_sq += out.grad_norm_sq[i];
        bin.laplacian += out.laplacian[i];
        t.push_back(anchor ? std::sqrt(std::fabs(dec.values[i] - *anchor)) : dec.values[i]);
        yg.push_back(out.grad_norm_sq[i]);
        yl.push_back(out.laplacian[i]);
      }
      bin.f /= m;
      bin.grad_norm_sq /= m;
      bin.laplacian /= m;
      bin.grad_norm_sq_spread = fit_spread(t, yg, bin.grad_norm_sq);
      bin.laplacian_spread = fit_spread(t, yl, bin.laplacian);
      bin.spread = std::max(bin.grad_norm_sq_spread, bin.laplacian_spread);
      if (bin.spread > options.profile_tol && bin.spread > worst) {
        worst = bin.spread;
        prof.verdict = Verdict::Refuted;
        prof.offending_bin = prof.bins.size();
      }
      prof.bins.push_back(std::move(bin));
    }
    out.profiles.push_back(std::move(prof));
  }
  return out;
}

}  // namespace equipart

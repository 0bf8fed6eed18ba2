#pragma once

// Equilibrium-function checks: fibrewise dependence of (grad f)^2 and the
// Laplacian on f, decomposition of the domain into regions between critical
// values, and per-region profiles F(f), G(f).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "equipart/geometry.hpp"
#include "equipart/report.hpp"

namespace equipart {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SamplePlan {
  std::size_t samples = 2000;
  std::uint64_t seed = 42;
  std::vector<Interval> box;  // one interval per coordinate
  double eps_crit = kDefaultEpsCrit;
  // Candidate points drawn before giving up; 0 means 1000 * samples.
  std::size_t max_attempts = 0;
};

// Deterministic quasi-uniform points (seed-shifted Halton sequence) inside
// the box and the domain. Throws SamplingError when the rejection budget runs
// out before `samples` points are accepted.
std::vector<Point> sample_domain(const Manifold& m, const SamplePlan& plan, const Domain& extra = {});
std::vector<Point> sample_domain(const ScalarField& f, const SamplePlan& plan);

struct DependenceResult {
  // |da ^ db| / (|da| |db| + eps_abs), in [0, 1]; 0 when parallel.
  double residual = 0.0;
  bool a_degenerate = false;  // |da| <= eps_crit
  bool b_degenerate = false;  // |db| <= eps_crit
};

inline constexpr double kEpsAbs = 1e-300;

// Covectors da, db at a point with the given metric.
DependenceResult dependence_residual(const MetricSample& ms, std::span<const double> da,
                                     std::span<const double> db,
                                     double eps_crit = kDefaultEpsCrit);
DependenceResult dependence_residual(const ScalarField& a, const ScalarField& b,
                                     std::span<const double> p,
                                     double eps_crit = kDefaultEpsCrit);

struct CheckOptions {
  double tol = 1e-8;
  unsigned threads = 1;  // never changes the result
};

// Rank test rank(df, d(grad f)^2) <= 1 and rank(df, d Lap f) <= 1 at every
// non-excluded sample. Samples with |df| <= eps_crit or where the field
// cannot be evaluated are excluded.
CheckReport check_equilibrium(const ScalarField& f, const SamplePlan& plan,
                              const CheckOptions& options = {});
CheckReport check_equilibrium(const FieldCalculus& f, std::span<const Point> samples,
                              double eps_crit, const CheckOptions& options = {});

// Samples of a field known only through a table: the value, (grad f)^2 and
// the Laplacian at some points.
struct TabulatedSample {
  double f = 0.0;
  double grad_norm_sq = 0.0;
  double laplacian = 0.0;
  Point where;
};

// Groups samples with equal f (|df| <= group_tol * (1 + |f|)) and checks that
// (grad f)^2 and the Laplacian agree within each group, relative to
// 1 + |group mean|.
CheckReport check_tabulated(std::span<const TabulatedSample> samples, double tol,
                            double group_tol = 1e-12);

struct Region {
  int id = 0;
  // Open f-interval between the neighbouring critical values, clipped to the
  // sampled f range.
  double f_lo = 0.0;
  double f_hi = 0.0;
  double f_min = 0.0;  // sampled extremes
  double f_max = 0.0;
  std::vector<std::size_t> members;  // indices into RegionDecomposition::samples
  Point centroid;
};

struct RegionDecomposition {
  std::vector<Point> samples;
  std::vector<double> values;          // f at each sample
  std::vector<int> region_of;          // -1 for excluded samples
  std::vector<double> critical_values; // ascending
  std::vector<Point> critical_points;  // one refined representative per value
  std::vector<Region> regions;         // ordered by size, largest first
};

struct RegionOptions {
  std::size_t neighbours = 8;
  double cluster_width = 1e-3;  // relative to the sampled f range
  double seed_ratio = 0.05;     // refine samples with |df| <= ratio * max |df|
  std::size_t max_seeds = 200;
  unsigned threads = 1;
};

// Critical values are found by refining low-gradient samples with
// Gauss-Newton on df = 0 and clustering the resulting values. Regions are
// the connected components of a nearest-neighbour graph whose edges are cut
// when the segment leaves the domain, crosses a critical level, or passes
// through the critical set.
RegionDecomposition detect_regions(const ScalarField& f, const SamplePlan& plan,
                                   const RegionOptions& options = {});

struct ProfileBin {
  double f_lo = 0.0;
  double f_hi = 0.0;
  double f = 0.0;             // mean of f over the bin
  double grad_norm_sq = 0.0;  // mean
  double laplacian = 0.0;     // mean
  double spread = 0.0;        // max of the two spreads below
  double grad_norm_sq_spread = 0.0;
  double laplacian_spread = 0.0;
  std::vector<std::size_t> members;
};

struct RegionProfile {
  int region = 0;
  double f_lo = 0.0;
  double f_hi = 0.0;
  std::vector<ProfileBin> bins;  // ordered by f
  Verdict verdict = Verdict::Consistent;
  std::optional<std::size_t> offending_bin;
};

struct ProfileOptions {
  CheckOptions check;
  RegionOptions regions;
  // Bound on a bin's spread: deviation of each sample from a least-squares
  // quadratic in f, relative to 1 + |bin mean|.
  double profile_tol = 1e-6;
};

struct ProfileSet {
  CheckReport check;
  RegionDecomposition decomposition;
  std::vector<double> grad_norm_sq;  // per sample
  std::vector<double> laplacian;     // per sample
  std::vector<RegionProfile> profiles;
};

// Requires a CONSISTENT equilibrium verdict (throws PreconditionError
// otherwise). Bins each region's f values into ceil(sqrt(size)) bins.
ProfileSet extract_profiles(const ScalarField& f, const SamplePlan& plan,
                            const ProfileOptions& options = {});

}  // namespace equipart

#pragma once

// Manifest files: named manifolds, fields, vector fields, warped planes and
// sample plans.
//
//   version = 1
//   manifold h2xr {
//     coords = x, y, z;
//     let F = (2 - x^2 - y^2)/2;
//     metric = diag(1/F^2, 1/F^2, 1);      # or [[..], [..], [..]]
//     domain = x^2 + y^2 < 2;
//     box = [-1.5, 1.5], [-1.5, 1.5], [-1, 1];
//   }
//   field f1 on h2xr { expr = x^2 + y^2; symmetries = X3, X4; }
//   vfield X4 on h2xr { components = (0, 0, 1); }
//   warp ritore { f = r*(1 + r^2); range = 0:2; }
//   plan quick { samples = 500; seed = 7; }
//
// `pi` is predefined. Comments start with '#'.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "equipart/equilibrium.hpp"
#include "equipart/error.hpp"
#include "equipart/geometry.hpp"
#include "equipart/stability.hpp"

namespace equipart {

struct SourceSpan {
  std::string file;
  std::size_t line = 0;  // 1-based
  std::size_t column = 0;
  std::string to_string() const;
};

// A manifest problem, reported as "file:line:col: message".
class ManifestError : public Error {
 public:
  ManifestError(const SourceSpan& where, const std::string& message);
  const SourceSpan& where() const { return where_; }

 private:
  SourceSpan where_;
};

struct ManifoldEntry {
  ManifoldPtr manifold;
  std::vector<Interval> box;
  std::optional<Point> center;  // default centre for polar checks
  std::optional<double> rmax;
  SourceSpan span;
};

struct FieldEntry {
  std::string manifold;
  std::shared_ptr<const ScalarField> field;
  std::vector<Interval> box;  // empty: the manifold's box
  // Killing fields expected to leave the field invariant (used by check-all).
  std::vector<std::string> symmetries;
  SourceSpan span;
};

struct VectorFieldEntry {
  std::string manifold;
  std::shared_ptr<const VectorField> field;
  SourceSpan span;
};

struct WarpEntry {
  std::shared_ptr<const WarpedPlane> warp;
  SourceSpan span;
};

struct PlanEntry {
  std::string name;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<double> eps_crit;
  SourceSpan span;
};

struct Manifest {
  std::string path;
  int version = 1;
  std::vector<ManifoldEntry> manifolds;  // in file order
  std::vector<FieldEntry> fields;
  std::vector<VectorFieldEntry> vfields;
  std::vector<WarpEntry> warps;
  std::vector<PlanEntry> plans;

  // Lookups throw Error naming the known entries when `name` is missing.
  const ManifoldEntry& manifold(std::string_view name) const;
  const FieldEntry& field(std::string_view name) const;
  const VectorFieldEntry& vfield(std::string_view name) const;
  const WarpEntry& warp(std::string_view name) const;
  const PlanEntry& plan(std::string_view name) const;
};

Manifest parse_manifest(std::string_view text, const std::string& path = "<manifest>");
// Throws Error if the file cannot be read.
Manifest load_manifest(const std::string& path);

}  // namespace equipart

#pragma once

// Task dispatch for the command line: resolve names in a manifest, run one
// family of checks, and serialize the outcome.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "equipart/manifest.hpp"
#include "equipart/report.hpp"

namespace equipart {

inline constexpr const char* kVersion = "0.1.0";

struct TaskSpec {
  // check-equilibrium, check-killing, check-symmetry, check-separability,
  // check-stability, profile or check-all.
  std::string task;
  std::string manifold;
  std::string field;
  std::vector<std::string> vfields;
  std::string warp;
  std::optional<Point> center;
  std::optional<double> rmax;
  std::optional<int> mode;
  std::optional<double> r0;
  // Plan: flags override the named plan, which overrides the defaults.
  std::string plan;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  unsigned threads = 1;
};

struct CheckLine {
  std::string task;
  std::string target;
  CheckReport report;
};

struct ProfileRow {
  int region = 0;
  double f = 0.0;
  double grad_norm_sq = 0.0;
  double laplacian = 0.0;
  double spread = 0.0;
};

struct TaskResult {
  std::string task;
  std::vector<std::string> targets;
  std::string manifest;  // file name without directories
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  double tol = 0.0;
  std::vector<CheckLine> checks;
  std::vector<ProfileRow> profile;
  double wall_clock = 0.0;  // seconds; never part of the report bytes

  bool any(Verdict v) const;
};

TaskResult run_task(const Manifest& manifest, const TaskSpec& spec);

enum class ReportFormat { Text, Csv };

// Text: a header line, then one CHECK line per check and per sub-check
// (target "<target>:<leg>"), with notes as "# <target>: ..." lines. Csv: the
// profile table.
std::string emit_report(const TaskResult& result, ReportFormat format = ReportFormat::Text);

// Reads a text report back. Sub-check lines are attached to the preceding
// top-level check; emit_report(parse_report(t)) == t for any emitted t.
TaskResult parse_report(const std::string& text);

}  // namespace equipart

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "equipart/geometry.hpp"

namespace equipart {

// CONSISTENT means no counterexample was found at the tolerance over the
// sampling plan; it is not a proof. REFUTED always carries a witness.
// INCONCLUSIVE means more than half of the samples had to be excluded.
enum class Verdict { Consistent, Refuted, Inconclusive };

const char* to_string(Verdict v);

// printf("%.17g"): round-trips every double.
std::string format_g17(double v);

struct SubCheck {
  std::string name;
  Verdict verdict = Verdict::Consistent;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::size_t samples = 0;
  std::size_t excluded = 0;
  std::optional<Point> witness;
};

struct CheckReport {
  Verdict verdict = Verdict::Consistent;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::size_t samples_used = 0;
  std::size_t samples_excluded = 0;
  std::optional<Point> witness;  // present iff verdict == Refuted
  double witness_residual = 0.0;
  std::vector<SubCheck> sub_checks;
  std::vector<std::string> notes;
  // Outcome name printed instead of the verdict when the check's payload is
  // not a pass/fail judgement (e.g. UNSTABLE for the stability criterion).
  std::optional<std::string> label;

  bool consistent() const { return verdict == Verdict::Consistent; }
  bool refuted() const { return verdict == Verdict::Refuted; }
  std::string verdict_text() const { return label ? *label : to_string(verdict); }
};

}  // namespace equipart

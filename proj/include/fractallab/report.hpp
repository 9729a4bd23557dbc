#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fitting.hpp"

namespace fractallab {

enum class Verdict { Pass, Fail };

inline const char* to_string(Verdict v) { return v == Verdict::Pass ? "pass" : "fail"; }

struct FunctionResult {
  std::string function_id;
  double best_constant = 0.0;
  std::vector<double> grid;    // t or r samples
  std::vector<double> values;  // per-sample ratios whose sup is best_constant
  Verdict verdict = Verdict::Fail;
  std::map<std::string, double> extras;
};

struct InequalityReport {
  static constexpr int schema_version = 1;
  std::string inequality_id;
  std::string model;
  int level = 0;
  double p = 0.0;
  std::map<std::string, double> exponents;
  std::map<std::string, std::string> provenance;  // exponent name -> theorem | conjecture
  std::vector<FunctionResult> results;
  double window_min = 0.0;
  double window_max = 0.0;
  std::string window_kind;
  std::vector<std::string> notes;

  bool passed() const {
    for (const auto& r : results)
      if (r.verdict != Verdict::Pass) return false;
    return !results.empty();
  }
  const FunctionResult& result(const std::string& id) const {
    for (const auto& r : results)
      if (r.function_id == id) return r;
    fail(ErrorKind::DomainError, "no result for function '" + id + "'");
  }
};

inline constexpr double stability_limit = 10.0;

/// Fill best_constant and verdict from per-sample values: finite and max/median below 10.
inline void settle(FunctionResult& r, bool require_stability = true) {
  double best = 0.0;
  bool finite = !r.values.empty();
  for (double v : r.values) {
    if (!std::isfinite(v)) finite = false;
    else best = std::max(best, v);
  }
  r.best_constant = finite ? best : std::numeric_limits<double>::infinity();
  const double s = spread(r.values);
  r.extras["spread"] = s;
  r.verdict = finite && (!require_stability || s < stability_limit) ? Verdict::Pass : Verdict::Fail;
}

}  // namespace fractallab

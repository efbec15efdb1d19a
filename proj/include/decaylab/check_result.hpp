#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace decaylab {

/// Outcome of certifying lhs <= rhs over a set of samples.
/// Comparisons run in the log domain so constants like exp(700) stay usable.
struct CheckResult {
  std::string bound_id;
  std::string zone;
  long samples = 0;
  long violations = 0;
  long nonfinite = 0;
  // min over samples of log(rhs) - log(lhs); +inf when every lhs is zero
  double worst_log_headroom = std::numeric_limits<double>::infinity();
  double worst_t = 0.0;
  double worst_xi = 0.0;
  std::map<std::string, double> constants_used;
  std::vector<std::string> notes;

  bool passed() const { return violations == 0 && nonfinite == 0; }

  /// 1 - lhs/rhs at the tightest sample (1 means lhs was zero everywhere).
  double worst_margin() const {
    if (std::isinf(worst_log_headroom) && worst_log_headroom > 0) return 1.0;
    return -std::expm1(-worst_log_headroom);
  }

  /// Records lhs <= rhs * (1 + rel_slack). lhs and rhs must be nonnegative.
  void record(double lhs, double rhs, double t = 0.0, double xi = 0.0, double rel_slack = 0.0) {
    if (!std::isfinite(lhs) || std::isnan(rhs)) {
      ++samples;
      ++nonfinite;
      return;
    }
    const double ll = lhs > 0.0 ? std::log(lhs) : -std::numeric_limits<double>::infinity();
    const double lr = rhs > 0.0 ? std::log(rhs) : -std::numeric_limits<double>::infinity();
    record_log(ll, lr, t, xi, rel_slack);
  }

  void record_log(double log_lhs, double log_rhs, double t = 0.0, double xi = 0.0, double rel_slack = 0.0) {
    ++samples;
    if (std::isnan(log_lhs) || std::isnan(log_rhs) || log_lhs == std::numeric_limits<double>::infinity()) {
      ++nonfinite;
      return;
    }
    double head;
    if (log_lhs == -std::numeric_limits<double>::infinity())
      head = std::numeric_limits<double>::infinity();
    else
      head = log_rhs - log_lhs;
    if (head < -std::log1p(rel_slack)) ++violations;
    if (head < worst_log_headroom) {
      worst_log_headroom = head;
      worst_t = t;
      worst_xi = xi;
    }
  }

  void merge(const CheckResult& o) {
    samples += o.samples;
    violations += o.violations;
    nonfinite += o.nonfinite;
    if (o.worst_log_headroom < worst_log_headroom) {
      worst_log_headroom = o.worst_log_headroom;
      worst_t = o.worst_t;
      worst_xi = o.worst_xi;
    }
    notes.insert(notes.end(), o.notes.begin(), o.notes.end());
  }
};

}  // namespace decaylab

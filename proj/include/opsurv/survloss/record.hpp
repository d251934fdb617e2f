#pragma once

#include "opsurv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace opsurv {

/// Slack used whenever a time is compared against a sensor time or grid knot,
/// so that knots built as j * tau / m match sensor times built as k * ds.
inline double time_tolerance(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

/// Right-continuous step function: the value at t is the value recorded at the
/// latest sensor time <= t. Undefined before the first sensor; held constant
/// after the last one.
struct StepPath {
  std::vector<double> times;
  std::vector<double> values;

  static StepPath constant(double v) { return StepPath{{0.0}, {v}}; }

  bool empty() const { return times.empty(); }

  std::optional<double> value_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t + time_tolerance(t));
    if (it == times.begin()) return std::nullopt;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  /// Keeps the sensors at times <= t.
  StepPath truncated(double t) const {
    StepPath out;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] > t + time_tolerance(t)) break;
      out.times.push_back(times[k]);
      out.values.push_back(values[k]);
    }
    return out;
  }

  bool operator==(const StepPath&) const = default;
};

/// One subject: observed time, event flag, time-varying covariate paths and
/// time-invariant covariates.
struct SurvivalRecord {
  std::string id;
  double y = 0.0;
  int delta = 0;
  std::vector<StepPath> tv;
  std::vector<double> ti;

  bool operator==(const SurvivalRecord&) const = default;
};

inline void validate_record(const SurvivalRecord& r) {
  if (!(r.y >= 0.0) || !std::isfinite(r.y))
    throw DataError("subject " + r.id + ": observed time must be finite and >= 0");
  if (r.delta != 0 && r.delta != 1)
    throw DataError("subject " + r.id + ": event indicator must be 0 or 1");
  for (const auto& p : r.tv) {
    if (p.times.size() != p.values.size())
      throw DataError("subject " + r.id + ": path times and values differ in length");
    if (!std::is_sorted(p.times.begin(), p.times.end()))
      throw DataError("subject " + r.id + ": path sensor times not sorted");
  }
}

}  // namespace opsurv

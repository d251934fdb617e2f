#pragma once

#include "opsurv/survloss/record.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace opsurv {

/// Survival probabilities on a set of increasing times, read as a right-
/// continuous step function.
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return times.size(); }

  /// Value at the latest time <= t; 1 before the first time.
  double at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t + time_tolerance(t));
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  /// Curve from a cumulative hazard on the same times; kept strictly positive.
  static SurvivalCurve from_cumulative_hazard(std::vector<double> times,
                                              const std::vector<double>& cumhaz) {
    SurvivalCurve c;
    c.times = std::move(times);
    c.values.reserve(cumhaz.size());
    for (double h : cumhaz)
      c.values.push_back(std::max(std::exp(-h), std::numeric_limits<double>::min()));
    return c;
  }

  bool is_valid() const {
    if (times.size() != values.size() || values.empty()) return false;
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!(values[k] > 0.0) || values[k] > 1.0) return false;
      if (k > 0 && values[k] > values[k - 1]) return false;
    }
    return true;
  }
};

}  // namespace opsurv

#pragma once

#include "opsurv/survloss/record.hpp"

#include <algorithm>
#include <span>
#include <vector>

namespace opsurv::evalmetrics {

/// Reverse Kaplan-Meier estimate of the censoring survival function G.
struct CensoringEstimate {
  std::vector<double> times;   // distinct censoring times, ascending
  std::vector<double> values;  // G just after each time

  /// G(t), right-continuous.
  double at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  /// G(t-): product over censoring times strictly before t.
  double left_limit(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

/// Kaplan-Meier with the censorings as events. Subjects failing at a tied time
/// stay in the risk set of that censoring time.
inline CensoringEstimate km_censoring(std::span<const SurvivalRecord> records) {
  std::vector<std::pair<double, int>> obs;
  obs.reserve(records.size());
  for (const auto& r : records) obs.emplace_back(r.y, r.delta);
  std::sort(obs.begin(), obs.end());

  CensoringEstimate g;
  double surv = 1.0;
  std::size_t i = 0;
  const std::size_t n = obs.size();
  while (i < n) {
    const double t = obs[i].first;
    const double at_risk = static_cast<double>(n - i);
    double censored = 0.0;
    std::size_t j = i;
    while (j < n && obs[j].first == t) {
      if (obs[j].second == 0) censored += 1.0;
      ++j;
    }
    if (censored > 0.0) {
      surv *= 1.0 - censored / at_risk;
      g.times.push_back(t);
      g.values.push_back(surv);
    }
    i = j;
  }
  return g;
}

/// Plain Kaplan-Meier of the event time (failures as events, censorings at a
/// tied time stay at risk).
inline CensoringEstimate km_events(std::span<const SurvivalRecord> records) {
  std::vector<SurvivalRecord> flipped(records.begin(), records.end());
  for (auto& r : flipped) r.delta = 1 - r.delta;
  return km_censoring(flipped);
}

}  // namespace opsurv::evalmetrics

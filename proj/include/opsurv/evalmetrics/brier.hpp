#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/evalmetrics/km.hpp"
#include "opsurv/survloss/curve.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace opsurv::evalmetrics {

/// Censoring-weighted Brier score at time t:
/// (1/n) sum_i [ S_i(t)^2 I(y_i <= t, d_i = 1) / G(y_i-) + (1 - S_i(t))^2 I(y_i > t) / G(t) ].
inline double brier_score(std::span<const SurvivalCurve> curves,
                          std::span<const SurvivalRecord> records, double t,
                          const CensoringEstimate& g) {
  if (curves.size() != records.size())
    throw DimensionError("brier_score: one curve per record required");
  if (records.empty()) throw DataError("brier_score: empty sample");
  const double g_t = g.at(t);
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const double s = curves[i].at(t);
    if (r.y <= t) {
      if (r.delta != 1) continue;
      const double w = g.left_limit(r.y);
      if (!(w > 0.0))
        throw EvaluationError("brier_score: G(y-) = 0 for subject " + r.id);
      total += s * s / w;
    } else {
      if (!(g_t > 0.0))
        throw EvaluationError("brier_score: G(t) = 0 at t = " + std::to_string(t));
      total += (1.0 - s) * (1.0 - s) / g_t;
    }
  }
  return total / static_cast<double>(records.size());
}

/// (1/upper) * integral over [0, upper] of the piecewise-linear interpolant.
inline double trapezoid_average(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size() || times.size() < 2)
    throw DimensionError("trapezoid_average: need at least two aligned points");
  // Normalised by the summed widths (equal to the span) so a constant
  // integrand comes back unchanged.
  double area = 0.0, span = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double w = times[k] - times[k - 1];
    area += 0.5 * (values[k] + values[k - 1]) * w;
    span += w;
  }
  if (!(span > 0.0)) throw DimensionError("trapezoid_average: empty range");
  return area / span;
}

struct IbsResult {
  double ibs = 0.0;
  double upper = 0.0;        // integration limit actually used
  bool truncated = false;    // upper was reduced because G hit 0
  std::string warning;
  std::vector<double> times;
  std::vector<double> scores;
};

/// Integrated Brier score over [0, upper], trapezoid rule on the curves' grid
/// knots (plus `upper` itself). If G vanishes inside the range, integration
/// stops at the last evaluable knot and a warning is attached.
inline IbsResult integrated_brier(std::span<const SurvivalCurve> curves,
                                  std::span<const SurvivalRecord> records, double upper,
                                  const CensoringEstimate& g) {
  if (curves.empty()) throw DataError("integrated_brier: no curves");
  if (!(upper > 0.0)) throw ParameterError("integrated_brier: upper limit must be positive");
  std::vector<double> ts;
  for (double t : curves.front().times)
    if (t < upper - time_tolerance(upper)) ts.push_back(t);
  ts.push_back(upper);
  if (ts.front() > 0.0) ts.insert(ts.begin(), 0.0);

  IbsResult res;
  for (double t : ts) {
    try {
      res.scores.push_back(brier_score(curves, records, t, g));
      res.times.push_back(t);
    } catch (const EvaluationError& e) {
      res.truncated = true;
      res.warning = std::string("integration range truncated: ") + e.what();
      break;
    }
  }
  if (res.times.size() < 2) throw EvaluationError("integrated_brier: no evaluable range");
  res.upper = res.times.back();
  res.ibs = trapezoid_average(res.times, res.scores);
  return res;
}

inline IbsResult integrated_brier(std::span<const SurvivalCurve> curves,
                                  std::span<const SurvivalRecord> records, double upper) {
  return integrated_brier(curves, records, upper, km_censoring(records));
}

/// Sample quantile with linear interpolation between order statistics
/// (position (n - 1) q).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DataError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Default IBS upper limit: 90th percentile of the observed times.
inline double default_ibs_upper(std::span<const SurvivalRecord> records) {
  std::vector<double> y;
  for (const auto& r : records) y.push_back(r.y);
  return quantile(std::move(y), 0.9);
}

/// Mean absolute difference over the prediction's knots, truth read as a step function.
inline double curve_error(const SurvivalCurve& pred, const SurvivalCurve& truth) {
  if (pred.times.empty()) throw DimensionError("curve_error: empty prediction");
  double total = 0.0;
  for (std::size_t k = 0; k < pred.times.size(); ++k)
    total += std::abs(pred.values[k] - truth.at(pred.times[k]));
  return total / static_cast<double>(pred.times.size());
}

}  // namespace opsurv::evalmetrics

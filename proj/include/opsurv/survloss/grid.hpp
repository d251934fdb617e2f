#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/survloss/record.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace opsurv {

using Index = Eigen::Index;

/// Partition 0 = t_0 < t_1 < ... < t_m = tau. Intervals are 1-based:
/// interval j is [t_{j-1}, t_j) with width t_j - t_{j-1}.
class TimeGrid {
 public:
  TimeGrid() = default;

  static TimeGrid even(double tau, Index m) {
    if (m < 1) throw ConfigError("grid needs m >= 1 intervals");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("grid needs a finite tau > 0");
    TimeGrid g;
    g.knots_.resize(static_cast<std::size_t>(m) + 1);
    for (Index j = 0; j <= m; ++j)
      g.knots_[static_cast<std::size_t>(j)] = tau * static_cast<double>(j) / static_cast<double>(m);
    g.knots_.back() = tau;
    return g;
  }

  Index m() const { return static_cast<Index>(knots_.size()) - 1; }
  double tau() const { return knots_.back(); }
  double knot(Index j) const { return knots_[static_cast<std::size_t>(j)]; }
  double width(Index j) const { return knot(j) - knot(j - 1); }
  const std::vector<double>& knots() const { return knots_; }

  /// Number of intervals j with t_{j-1} <= y, i.e. the expanded row count.
  Index rows_for(double y) const {
    Index n = 0;
    for (Index j = 1; j <= m(); ++j) {
      if (knot(j - 1) <= y + time_tolerance(y)) n = j;
      else break;
    }
    return n;
  }

  /// Number of intervals j with t_{j-1} < y (strictly), the counting-process
  /// row count used by the Cox expansion.
  Index open_rows_for(double y) const {
    Index n = 0;
    for (Index j = 1; j <= m(); ++j) {
      if (knot(j - 1) < y - time_tolerance(y)) n = j;
      else break;
    }
    return n;
  }

  /// Interval j with t_{j-1} < u <= t_j (u = 0 maps to 1, u > tau to m + 1).
  Index interval_containing(double u) const {
    for (Index j = 1; j <= m(); ++j)
      if (u <= knot(j) + time_tolerance(u)) return j;
    return m() + 1;
  }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> knots_;
};

/// Even grid on [0, tau] with tau = override, else the largest observed event time.
inline TimeGrid build_grid(std::span<const SurvivalRecord> records, Index m,
                           std::optional<double> tau_override = std::nullopt) {
  if (records.empty()) throw ConfigError("build_grid: no records");
  if (m < 1) throw ConfigError("build_grid: m must be >= 1");
  if (tau_override) return TimeGrid::even(*tau_override, m);
  double tau = -1.0;
  for (const auto& r : records)
    if (r.delta == 1) tau = std::max(tau, r.y);
  if (tau <= 0.0)
    throw ConfigError("build_grid: no positive event time and no tau override");
  return TimeGrid::even(tau, m);
}

}  // namespace opsurv

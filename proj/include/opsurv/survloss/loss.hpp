#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/survloss/expand.hpp"

#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace opsurv {

/// Largest log-hazard accepted inside exp(); anything above is divergence.
inline constexpr double kMaxLogHazard = 700.0;

inline void check_log_hazard(double h, std::size_t row) {
  if (!std::isfinite(h))
    throw NumericError("non-finite log-hazard at row " + std::to_string(row));
  if (h > kMaxLogHazard)
    throw NumericError("log-hazard " + std::to_string(h) + " at row " + std::to_string(row) +
                       " exceeds the exp overflow guard (" + std::to_string(kMaxLogHazard) + ")");
}

/// Discretized negative log-likelihood scaled by the number of subjects:
/// (1/n) sum over rows of exp(h) * width - h * delta.
inline double likelihood_loss(std::span<const double> h, std::span<const ExpandedRow> rows,
                              double n_subjects) {
  if (h.size() != rows.size()) throw DimensionError("likelihood_loss: h and rows differ in length");
  if (!(n_subjects > 0.0)) throw ParameterError("likelihood_loss: n must be positive");
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    check_log_hazard(h[r], r);
    total += std::exp(h[r]) * rows[r].width - h[r] * rows[r].delta;
  }
  return total / n_subjects;
}

inline std::size_t count_subjects(std::span<const ExpandedRow> rows) {
  std::set<Index> ids;
  for (const auto& r : rows) ids.insert(r.subject);
  return ids.size();
}

/// As above with n = number of distinct subjects among `rows`.
inline double likelihood_loss(std::span<const double> h, std::span<const ExpandedRow> rows) {
  return likelihood_loss(h, rows, static_cast<double>(count_subjects(rows)));
}

/// d loss / d h_r = (exp(h_r) * width_r - delta_r) * scale, written into `grad`.
/// Returns the loss sum times `scale`.
inline double likelihood_loss_grad(std::span<const double> h, std::span<const ExpandedRow> rows,
                                   double scale, std::span<double> grad) {
  if (h.size() != rows.size() || grad.size() != rows.size())
    throw DimensionError("likelihood_loss_grad: length mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    check_log_hazard(h[r], r);
    const double e = std::exp(h[r]) * rows[r].width;
    total += e - h[r] * rows[r].delta;
    grad[r] = (e - rows[r].delta) * scale;
  }
  return total * scale;
}

}  // namespace opsurv

#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/survloss/grid.hpp"
#include "opsurv/survloss/record.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace opsurv {

/// One (subject, interval) training row. The masked history itself is not
/// stored per row; ExpandedDataset::masked_history materialises it on demand
/// so the expanded data stay O(n * m) instead of O(n * m^2).
struct ExpandedRow {
  Index subject = 0;
  Index interval = 0;     // j, 1-based
  double eval_time = 0.0; // t_{j-1}
  double width = 0.0;     // t_j - t_{j-1}
  int delta = 0;          // delta_ij

  bool operator==(const ExpandedRow&) const = default;
};

struct ExpandedDataset {
  TimeGrid grid;
  Index d_tv = 0;
  Index d_ti = 0;
  std::vector<std::string> ids;
  /// Per subject, d_tv x m sensor values x(t_0), ..., x(t_{m-1}); columns the
  /// subject never reaches are zero.
  std::vector<Eigen::MatrixXd> sensors;
  std::vector<Eigen::VectorXd> ti;
  /// Per subject, the number of leading sensor columns that are observed.
  std::vector<Index> observed_sensors;
  std::vector<ExpandedRow> rows;

  Index n_subjects() const { return static_cast<Index>(ids.size()); }
  Index n_rows() const { return static_cast<Index>(rows.size()); }

  /// d_tv x m history for the row: x(t_0), ..., x(t_{j-1}) then zeros.
  Eigen::MatrixXd masked_history(const ExpandedRow& row) const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d_tv, grid.m());
    h.leftCols(row.interval) = sensors[static_cast<std::size_t>(row.subject)].leftCols(row.interval);
    return h;
  }
};

/// Table-style expansion: subject i contributes one row per interval j with
/// t_{j-1} <= y_i. The event flag sits on the subject's last row when the event
/// falls inside [0, tau]; every earlier row has delta_ij = 0.
inline ExpandedDataset expand_dataset(std::span<const SurvivalRecord> records,
                                      const TimeGrid& grid) {
  ExpandedDataset ds;
  ds.grid = grid;
  if (records.empty()) return ds;
  ds.d_tv = static_cast<Index>(records.front().tv.size());
  ds.d_ti = static_cast<Index>(records.front().ti.size());
  const Index m = grid.m();
  const double tau = grid.tau();

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    validate_record(r);
    if (static_cast<Index>(r.tv.size()) != ds.d_tv || static_cast<Index>(r.ti.size()) != ds.d_ti)
      throw DimensionError("subject " + r.id + ": covariate counts differ from first subject");

    const Index n_rows = grid.rows_for(r.y);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(ds.d_tv, m);
    for (Index c = 0; c < ds.d_tv; ++c) {
      for (Index k = 0; k < n_rows; ++k) {
        const auto v = r.tv[static_cast<std::size_t>(c)].value_at(grid.knot(k));
        if (!v)
          throw IngestError("subject " + r.id + ": covariate " + std::to_string(c) +
                            " undefined at knot t_" + std::to_string(k) + " = " +
                            std::to_string(grid.knot(k)));
        s(c, k) = *v;
      }
    }
    const Index subject = static_cast<Index>(i);
    ds.ids.push_back(r.id);
    ds.sensors.push_back(std::move(s));
    ds.ti.push_back(Eigen::Map<const Eigen::VectorXd>(r.ti.data(), ds.d_ti));
    ds.observed_sensors.push_back(n_rows);

    const bool event_in_grid = r.delta == 1 && r.y <= tau + time_tolerance(tau);
    for (Index j = 1; j <= n_rows; ++j) {
      ExpandedRow row;
      row.subject = subject;
      row.interval = j;
      row.eval_time = grid.knot(j - 1);
      row.width = grid.width(j);
      row.delta = (j == n_rows && event_in_grid) ? 1 : 0;
      ds.rows.push_back(row);
    }
  }
  return ds;
}

}  // namespace opsurv

#pragma once

#include "opsurv/deeponet/network.hpp"
#include "opsurv/survloss/expand.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace opsurv::deeponet {

using Vector = Eigen::VectorXd;

/// Per-covariate z-score constants. Time-varying covariates are standardized
/// before masking, so a masked sensor (0) sits at the training mean.
struct Standardizer {
  Vector tv_mean;
  Vector tv_sd;
  Vector ti_mean;
  Vector ti_sd;

  static Standardizer identity(Index d_tv, Index d_ti) {
    return {Vector::Zero(d_tv), Vector::Ones(d_tv), Vector::Zero(d_ti), Vector::Ones(d_ti)};
  }

  /// Fit on the observed (pre-mask) sensor values and the subjects'
  /// time-invariant covariates. Degenerate spreads fall back to sd = 1.
  static Standardizer fit(const ExpandedDataset& ds) {
    Standardizer st = identity(ds.d_tv, ds.d_ti);
    for (Index c = 0; c < ds.d_tv; ++c) {
      double sum = 0.0, sq = 0.0;
      double n = 0.0;
      for (Index i = 0; i < ds.n_subjects(); ++i) {
        const auto& s = ds.sensors[static_cast<std::size_t>(i)];
        for (Index k = 0; k < ds.observed_sensors[static_cast<std::size_t>(i)]; ++k) {
          sum += s(c, k);
          sq += s(c, k) * s(c, k);
          n += 1.0;
        }
      }
      set_moments(st.tv_mean(c), st.tv_sd(c), sum, sq, n);
    }
    for (Index c = 0; c < ds.d_ti; ++c) {
      double sum = 0.0, sq = 0.0;
      for (const auto& v : ds.ti) {
        sum += v(c);
        sq += v(c) * v(c);
      }
      set_moments(st.ti_mean(c), st.ti_sd(c), sum, sq, static_cast<double>(ds.ti.size()));
    }
    return st;
  }

  bool operator==(const Standardizer& o) const {
    return tv_mean == o.tv_mean && tv_sd == o.tv_sd && ti_mean == o.ti_mean && ti_sd == o.ti_sd;
  }

 private:
  static void set_moments(double& mean, double& sd, double sum, double sq, double n) {
    if (n <= 0.0) return;
    mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    sd = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
  }
};

/// A trained network together with everything needed to apply it to raw
/// records: standardization constants and the grid it was trained on.
struct SurvivalModel {
  DeepONet net;
  Standardizer scale;
  TimeGrid grid;
};

/// Standardize, mask and pack the given rows of `ds` into one network batch.
inline NetInput assemble_batch(const SurvivalModel& model, const ExpandedDataset& ds,
                               std::span<const Index> row_ids) {
  const Index m = model.grid.m();
  if (ds.grid.m() != m || ds.grid.tau() != model.grid.tau())
    throw DimensionError("dataset was expanded on a different grid than the model's");
  const auto& arch = model.net.arch();
  if (ds.d_tv != arch.d_tv || ds.d_ti != arch.d_ti)
    throw DimensionError("dataset covariate counts do not match the model");

  const Index batch = static_cast<Index>(row_ids.size());
  NetInput in;
  in.history = Matrix::Zero(ds.d_tv, batch * m);
  in.ti.resize(ds.d_ti, batch);
  in.s.resize(1, batch);
  const Vector inv_tv = model.scale.tv_sd.cwiseInverse();
  const Vector inv_ti = model.scale.ti_sd.cwiseInverse();
  const double tau = model.grid.tau();
  for (Index b = 0; b < batch; ++b) {
    const auto& row = ds.rows[static_cast<std::size_t>(row_ids[static_cast<std::size_t>(b)])];
    const auto& sensors = ds.sensors[static_cast<std::size_t>(row.subject)];
    auto block = in.history.middleCols(b * m, row.interval);
    block = (sensors.leftCols(row.interval).colwise() - model.scale.tv_mean);
    block = inv_tv.asDiagonal() * block;
    in.ti.col(b) = inv_ti.asDiagonal() *
                   (ds.ti[static_cast<std::size_t>(row.subject)] - model.scale.ti_mean);
    in.s(0, b) = row.eval_time / tau;
  }
  return in;
}

/// Log-hazard for each listed row, evaluated in chunks.
inline Vector h_eval_batch(SurvivalModel& model, const ExpandedDataset& ds,
                           std::span<const Index> row_ids, Index chunk = 2000) {
  Vector out(static_cast<Index>(row_ids.size()));
  for (std::size_t start = 0; start < row_ids.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(chunk), row_ids.size() - start);
    const NetInput in = assemble_batch(model, ds, row_ids.subspan(start, len));
    Tape tape;
    const NodePtr h = model.net.forward(tape, in);
    out.segment(static_cast<Index>(start), static_cast<Index>(len)) = h->value.row(0).transpose();
  }
  return out;
}

inline Vector h_eval_batch(SurvivalModel& model, const ExpandedDataset& ds) {
  std::vector<Index> all(static_cast<std::size_t>(ds.n_rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
  return h_eval_batch(model, ds, all);
}

}  // namespace opsurv::deeponet

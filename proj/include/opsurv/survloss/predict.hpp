#pragma once

#include "opsurv/deeponet/model.hpp"
#include "opsurv/survloss/curve.hpp"
#include "opsurv/survloss/loss.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace opsurv {

/// S(t_k) = exp(-sum_{j<=k} exp(h(t_{j-1})) * width_j) on the model's grid knots,
/// with each h evaluated on the history masked at t_{j-1}.
inline SurvivalCurve predict_survival(deeponet::SurvivalModel& model,
                                      const std::vector<StepPath>& tv,
                                      const std::vector<double>& ti) {
  const TimeGrid& grid = model.grid;
  SurvivalRecord probe{"predict", grid.tau(), 0, tv, ti};
  const std::vector<SurvivalRecord> one{probe};
  const ExpandedDataset ds = expand_dataset(one, grid);
  const Eigen::VectorXd h = deeponet::h_eval_batch(model, ds);

  std::vector<double> cumhaz(static_cast<std::size_t>(grid.m()) + 1, 0.0);
  for (Index j = 1; j <= grid.m(); ++j) {
    check_log_hazard(h(j - 1), static_cast<std::size_t>(j - 1));
    cumhaz[static_cast<std::size_t>(j)] =
        cumhaz[static_cast<std::size_t>(j - 1)] + std::exp(h(j - 1)) * grid.width(j);
  }
  return SurvivalCurve::from_cumulative_hazard(grid.knots(), cumhaz);
}

inline SurvivalCurve predict_survival(deeponet::SurvivalModel& model,
                                      const std::vector<StepPath>& tv,
                                      const std::vector<double>& ti, const TimeGrid& grid) {
  if (!(grid == model.grid)) throw DimensionError("predict_survival: grid differs from the model's grid");
  return predict_survival(model, tv, ti);
}

}  // namespace opsurv

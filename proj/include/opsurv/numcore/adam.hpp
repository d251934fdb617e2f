#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/numcore/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace opsurv::numcore {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one parameter list, in list order.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const ParamList& params, AdamConfig config = {}) : config_(config) {
    for (const auto* p : params) {
      first_.push_back(Matrix::Zero(p->rows(), p->cols()));
      second_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }

  std::uint64_t step() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Matrix>& first_moments() const { return first_; }
  const std::vector<Matrix>& second_moments() const { return second_; }

  /// One bias-corrected Adam update; gradients are zeroed afterwards. A
  /// non-finite gradient aborts before any parameter is touched.
  void update(const ParamList& params, double lr) {
    if (params.size() != first_.size())
      throw DimensionError("adam: parameter list does not match optimizer state");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->grad.rows() != first_[i].rows() ||
          params[i]->grad.cols() != first_[i].cols())
        throw DimensionError("adam: shape of " + params[i]->name + " changed");
      if (!params[i]->grad.allFinite())
        throw NumericError("adam: non-finite gradient in " + params[i]->name);
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& g = params[i]->grad;
      first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * g;
      second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
      params[i]->value.array() -=
          lr * (first_[i].array() / c1) /
          ((second_[i].array() / c2).sqrt() + config_.epsilon);
      g.setZero();
    }
  }

 private:
  AdamConfig config_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::uint64_t step_ = 0;
};

inline void adam_step(const ParamList& params, AdamState& state, double lr) {
  state.update(params, lr);
}

}  // namespace opsurv::numcore

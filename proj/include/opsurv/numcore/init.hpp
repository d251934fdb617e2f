#pragma once

#include "opsurv/numcore/tensor.hpp"
#include "opsurv/rng.hpp"

#include <cmath>
#include <random>
#include <string>

namespace opsurv::numcore {

inline double glorot_limit(Index fan_in, Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Weights ~ Uniform(-L, L), L = sqrt(6 / (fan_in + fan_out)), filled in
/// column-major order from `rng`.
inline ParamTensor glorot_uniform(std::string name, Index rows, Index cols, Index fan_in,
                                  Index fan_out, Rng& rng) {
  ParamTensor t(std::move(name), rows, cols);
  const double limit = glorot_limit(fan_in, fan_out);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index i = 0; i < t.size(); ++i) t.value.data()[i] = dist(rng);
  return t;
}

/// Dense weight (out x in) with the usual fans.
inline ParamTensor glorot_uniform(std::string name, Index out, Index in, Rng& rng) {
  return glorot_uniform(std::move(name), out, in, in, out, rng);
}

inline ParamTensor zero_bias(std::string name, Index rows, Index cols = 1) {
  return ParamTensor(std::move(name), rows, cols);
}

}  // namespace opsurv::numcore

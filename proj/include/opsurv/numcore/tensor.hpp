#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace opsurv::numcore {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// A trainable parameter: values plus a same-shape gradient accumulator.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  ParamTensor(std::string tensor_name, Index rows, Index cols)
      : name(std::move(tensor_name)),
        value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)) {}

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
  Index size() const { return value.size(); }

  std::vector<std::size_t> shape() const {
    return {static_cast<std::size_t>(value.rows()),
            static_cast<std::size_t>(value.cols())};
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  bool all_finite() const { return value.allFinite() && grad.allFinite(); }
};

using ParamList = std::vector<ParamTensor*>;

inline Index total_size(const ParamList& params) {
  Index n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

inline void zero_grads(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace opsurv::numcore

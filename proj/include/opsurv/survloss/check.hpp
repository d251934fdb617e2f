#pragma once

#include "opsurv/deeponet/model.hpp"
#include "opsurv/numcore/grad_check.hpp"
#include "opsurv/survloss/loss.hpp"

#include <numeric>
#include <span>
#include <vector>

namespace opsurv {

/// Full-data loss and its parameter gradient (written into the tensors' grad).
/// The tape's activation pattern is returned alongside so finite differences
/// can detect ReLU or argmax flips.
inline numcore::LossProbe loss_with_gradient(deeponet::SurvivalModel& model,
                                             const ExpandedDataset& ds, bool with_backward) {
  std::vector<Index> ids(static_cast<std::size_t>(ds.n_rows()));
  std::iota(ids.begin(), ids.end(), Index{0});
  const deeponet::NetInput in = deeponet::assemble_batch(model, ds, ids);
  numcore::Tape tape(true);
  const numcore::NodePtr h = model.net.forward(tape, in);
  std::vector<double> grad(ids.size());
  const double loss = likelihood_loss_grad(
      std::span<const double>(h->value.data(), ids.size()), ds.rows,
      1.0 / static_cast<double>(ds.n_subjects()), grad);
  if (with_backward) {
    numcore::zero_grads(model.net.params());
    tape.backward(h, Eigen::Map<const numcore::Matrix>(grad.data(), 1, ds.n_rows()));
  }
  return {loss, tape.pattern()};
}

/// Compares backpropagated loss gradients against central differences for
/// every network parameter.
inline numcore::GradCheckReport loss_grad_check(deeponet::SurvivalModel& model,
                                                const ExpandedDataset& ds,
                                                numcore::GradCheckOptions opt = {}) {
  loss_with_gradient(model, ds, true);
  return numcore::grad_check([&] { return loss_with_gradient(model, ds, false); },
                             model.net.params(), opt);
}

}  // namespace opsurv

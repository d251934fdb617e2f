#pragma once

#include "opsurv/deeponet/model.hpp"
#include "opsurv/rng.hpp"
#include "opsurv/survloss/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace opsurv {

struct EpochTrace {
  Index epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  bool improved = false;
};

enum class StopReason { early_stopping, max_epochs, aborted };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::early_stopping: return "early_stopping";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::aborted: return "aborted";
  }
  return "unknown";
}

struct TrainOptions {
  /// Grid upper bound; defaults to the largest training event time.
  std::optional<double> tau;
  /// Called after every epoch (progress reporting).
  std::function<void(const EpochTrace&)> on_epoch;
};

struct TrainResult {
  deeponet::SurvivalModel model;
  std::vector<EpochTrace> trace;
  Index best_epoch = 0;
  double best_valid_loss = std::numeric_limits<double>::infinity();
  StopReason reason = StopReason::max_epochs;
  std::string message;
};

/// Full-data loss of `model` on an expanded dataset (forward only).
inline double dataset_loss(deeponet::SurvivalModel& model, const ExpandedDataset& ds) {
  if (ds.n_rows() == 0) return 0.0;
  const Eigen::VectorXd h = deeponet::h_eval_batch(model, ds);
  return likelihood_loss(std::span<const double>(h.data(), static_cast<std::size_t>(h.size())),
                         ds.rows, static_cast<double>(ds.n_subjects()));
}

/// log(events / exposure) over expanded rows: the constant-hazard minimizer of
/// the discretized loss.
inline double constant_log_hazard(const ExpandedDataset& ds) {
  double events = 0.0, exposure = 0.0;
  for (const auto& r : ds.rows) {
    events += r.delta;
    exposure += r.width;
  }
  if (events <= 0.0 || exposure <= 0.0) return 0.0;
  return std::log(events / exposure);
}

/// One epoch of mini-batch Adam over shuffled expanded rows. Each batch loss is
/// rescaled by rows / (n * batch) so it is an unbiased estimate of the full loss.
inline double train_epoch(deeponet::SurvivalModel& model, const ExpandedDataset& ds,
                          numcore::AdamState& adam, double lr, Index batch_size, Rng& shuffle) {
  const Index n_rows = ds.n_rows();
  std::vector<Index> order(static_cast<std::size_t>(n_rows));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), shuffle);

  const Index bs = std::min(batch_size, n_rows);
  const double n = static_cast<double>(ds.n_subjects());
  auto params = model.net.params();
  double loss_sum = 0.0;
  Index batches = 0;
  std::vector<ExpandedRow> batch_rows;
  std::vector<double> grad;
  for (Index start = 0; start < n_rows; start += bs) {
    const Index len = std::min(bs, n_rows - start);
    std::span<const Index> ids(order.data() + start, static_cast<std::size_t>(len));
    const deeponet::NetInput in = deeponet::assemble_batch(model, ds, ids);
    numcore::Tape tape;
    const numcore::NodePtr h = model.net.forward(tape, in);

    batch_rows.clear();
    for (Index id : ids) batch_rows.push_back(ds.rows[static_cast<std::size_t>(id)]);
    grad.assign(static_cast<std::size_t>(len), 0.0);
    const double scale = static_cast<double>(n_rows) / (n * static_cast<double>(len));
    loss_sum += likelihood_loss_grad(
        std::span<const double>(h->value.data(), static_cast<std::size_t>(len)), batch_rows, scale,
        grad);
    ++batches;

    tape.backward(h, Eigen::Map<const numcore::Matrix>(grad.data(), 1, len));
    adam.update(params, lr);
  }
  return loss_sum / static_cast<double>(std::max<Index>(batches, 1));
}

/// Fit a DeepONet on `train_records`, early-stopping on the validation loss.
/// Returns the parameters of the best validation epoch. Stopping follows the
/// usual patience rule: stop once `patience` consecutive epochs (at least one)
/// fail to improve on the best validation loss.
inline TrainResult train(deeponet::BranchVariant variant, const deeponet::HyperParams& hyper,
                         std::span<const SurvivalRecord> train_records,
                         std::span<const SurvivalRecord> valid_records, std::uint64_t seed,
                         const TrainOptions& options = {}) {
  hyper.validate();
  if (train_records.empty() || valid_records.empty())
    throw DataError("train: training and validation sets must be non-empty");

  const TimeGrid grid = build_grid(train_records, hyper.m, options.tau);
  const ExpandedDataset ds_train = expand_dataset(train_records, grid);
  const ExpandedDataset ds_valid = expand_dataset(valid_records, grid);

  deeponet::Architecture arch{variant, ds_train.d_tv, ds_train.d_ti, hyper};
  Rng init_rng = substream(seed, "init");
  Rng shuffle_rng = substream(seed, "shuffle");

  TrainResult result{deeponet::SurvivalModel{deeponet::DeepONet(arch, init_rng),
                                             deeponet::Standardizer::fit(ds_train), grid},
                     {}, 0, std::numeric_limits<double>::infinity(), StopReason::max_epochs, ""};
  auto& model = result.model;
  model.net.merge_bias().value(0, 0) = constant_log_hazard(ds_train);

  numcore::AdamState adam(model.net.params());
  std::vector<numcore::ParamTensor> best = model.net.tensors();
  Index wait = 0;
  for (Index epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    EpochTrace tr;
    tr.epoch = epoch;
    try {
      tr.train_loss =
          train_epoch(model, ds_train, adam, hyper.learning_rate, hyper.batch_size, shuffle_rng);
      tr.valid_loss = dataset_loss(model, ds_valid);
      if (!std::isfinite(tr.train_loss) || !std::isfinite(tr.valid_loss))
        throw NumericError("non-finite loss");
    } catch (const NumericError& e) {
      result.reason = StopReason::aborted;
      result.message = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    tr.improved = tr.valid_loss < result.best_valid_loss;
    result.trace.push_back(tr);
    if (options.on_epoch) options.on_epoch(tr);
    if (tr.improved) {
      result.best_valid_loss = tr.valid_loss;
      result.best_epoch = epoch;
      best = model.net.tensors();
      wait = 0;
    } else if (++wait >= std::max<Index>(hyper.patience, 1)) {
      result.reason = StopReason::early_stopping;
      break;
    }
  }
  model.net.tensors() = std::move(best);
  return result;
}

}  // namespace opsurv

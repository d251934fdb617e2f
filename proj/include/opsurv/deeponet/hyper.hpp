#pragma once

#include "opsurv/errors.hpp"

#include <Eigen/Dense>

#include <string>

namespace opsurv::deeponet {

using Index = Eigen::Index;

enum class BranchVariant { fnn, cnn };

inline std::string to_string(BranchVariant v) { return v == BranchVariant::fnn ? "fnn" : "cnn"; }

inline BranchVariant parse_variant(const std::string& s) {
  if (s == "fnn") return BranchVariant::fnn;
  if (s == "cnn") return BranchVariant::cnn;
  throw ConfigError("unknown branch variant '" + s + "' (expected fnn or cnn)");
}

/// Network and training hyperparameters. Defaults are the simulation settings:
/// 128 nodes, 16 filters, pool 8, lr 1e-3, batch 1000, m = 250, p = 10.
struct HyperParams {
  Index nodes = 128;
  Index conv_filters = 16;
  Index pool_size = 8;
  Index kernel_width = 8;
  double learning_rate = 1e-3;
  Index batch_size = 1000;
  Index m = 250;
  Index p = 10;
  Index patience = 10;
  Index max_epochs = 500;
  /// Dense hidden layers in the FNN branch (the reduced real-data setup uses 1).
  Index fnn_hidden_layers = 2;
  /// Dense hidden layers after the convolution blocks in the CNN branch.
  Index cnn_hidden_layers = 1;

  void validate() const {
    auto positive = [](Index v, const char* name) {
      if (v <= 0) throw ConfigError(std::string("hyperparameter ") + name + " must be positive");
    };
    positive(nodes, "nodes");
    positive(conv_filters, "conv_filters");
    positive(pool_size, "pool_size");
    positive(kernel_width, "kernel_width");
    positive(batch_size, "batch_size");
    positive(m, "m");
    positive(p, "p");
    positive(max_epochs, "max_epochs");
    if (!(learning_rate > 0.0)) throw ConfigError("hyperparameter learning_rate must be positive");
    if (patience < 0) throw ConfigError("hyperparameter patience must be >= 0");
    if (fnn_hidden_layers < 1) throw ConfigError("fnn_hidden_layers must be >= 1");
    if (cnn_hidden_layers < 1) throw ConfigError("cnn_hidden_layers must be >= 1");
  }

  bool operator==(const HyperParams&) const = default;
};

/// Input dimensions plus hyperparameters: everything needed to lay out the
/// parameter tensors.
struct Architecture {
  BranchVariant variant = BranchVariant::fnn;
  Index d_tv = 1;
  Index d_ti = 0;
  HyperParams hyper;

  Index m() const { return hyper.m; }
  bool operator==(const Architecture&) const = default;
};

}  // namespace opsurv::deeponet

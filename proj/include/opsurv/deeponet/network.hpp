#pragma once

#include "opsurv/deeponet/hyper.hpp"
#include "opsurv/numcore.hpp"
#include "opsurv/rng.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace opsurv::deeponet {

using numcore::Matrix;
using numcore::NodePtr;
using numcore::ParamList;
using numcore::ParamTensor;
using numcore::Tape;

/// A batch of network inputs, already standardized and masked.
struct NetInput {
  Matrix history;  // d_tv x (B * m), column b*m + k is sensor k of sample b
  Matrix ti;       // d_ti x B
  Matrix s;        // 1 x B, evaluation time divided by tau

  Index batch() const { return s.cols(); }
};

/// Unstacked DeepONet: h = <branch(history, ti), trunk(s)> + merge bias.
class DeepONet {
 public:
  DeepONet() = default;

  DeepONet(Architecture arch, Rng& rng) : arch_(std::move(arch)) {
    arch_.hyper.validate();
    if (arch_.variant == BranchVariant::cnn && arch_.d_tv < 1)
      throw ConfigError("cnn branch needs at least one time-varying covariate");
    const auto& hp = arch_.hyper;
    const Index m = hp.m;

    Index dense_in = 0;
    Index hidden = 0;
    if (arch_.variant == BranchVariant::fnn) {
      dense_in = arch_.d_tv * m + arch_.d_ti;
      hidden = hp.fnn_hidden_layers;
    } else {
      Index cin = arch_.d_tv;
      Index len = m;
      for (int blk = 0; blk < kConvBlocks; ++blk) {
        const std::string base = "branch.conv" + std::to_string(blk);
        add(numcore::glorot_uniform(base + ".kernel", hp.conv_filters, hp.kernel_width * cin,
                                    hp.kernel_width * cin, hp.kernel_width * hp.conv_filters, rng));
        add(numcore::zero_bias(base + ".bias", hp.conv_filters));
        cin = hp.conv_filters;
        len = numcore::pooled_length(len, hp.pool_size);
      }
      dense_in = cin * len + arch_.d_ti;
      hidden = hp.cnn_hidden_layers;
    }
    Index in = dense_in;
    for (Index k = 0; k < hidden; ++k) {
      add_dense("branch.fc" + std::to_string(k), hp.nodes, in, rng);
      in = hp.nodes;
    }
    add_dense("branch.out", hp.p, in, rng);
    add_dense("trunk.fc0", hp.nodes, 1, rng);
    add_dense("trunk.out", hp.p, hp.nodes, rng);
    add(ParamTensor("merge.bias", 1, 1));
  }

  const Architecture& arch() const { return arch_; }
  Index p() const { return arch_.hyper.p; }

  ParamList params() {
    ParamList out;
    for (auto& t : tensors_) out.push_back(&t);
    return out;
  }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }
  std::vector<ParamTensor>& tensors() { return tensors_; }

  ParamTensor& tensor(const std::string& name) { return tensors_.at(index_.at(name)); }
  const ParamTensor& tensor(const std::string& name) const { return tensors_.at(index_.at(name)); }
  ParamTensor& merge_bias() { return tensor("merge.bias"); }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& t : tensors_)
      if (!t.value.allFinite()) return false;
    return true;
  }

  NodePtr branch(Tape& tape, const NetInput& in) {
    check_input(in);
    const auto& hp = arch_.hyper;
    const Index batch = in.batch();
    NodePtr hist = tape.input(in.history);
    NodePtr ti = tape.input(in.ti);
    NodePtr x;
    Index hidden = 0;
    if (arch_.variant == BranchVariant::fnn) {
      NodePtr flat = numcore::reshape(tape, hist, arch_.d_tv * hp.m, batch);
      x = numcore::concat_rows(tape, flat, ti);
      hidden = hp.fnn_hidden_layers;
    } else {
      Index len = hp.m;
      x = hist;
      for (int blk = 0; blk < kConvBlocks; ++blk) {
        const std::string base = "branch.conv" + std::to_string(blk);
        x = guard(numcore::conv1d_causal(tape, tensor(base + ".kernel"), tensor(base + ".bias"),
                                         x, len, numcore::Activation::relu),
                  base);
        x = numcore::maxpool1d(tape, x, len, hp.pool_size, hp.pool_size);
        len = numcore::pooled_length(len, hp.pool_size);
      }
      NodePtr flat = numcore::reshape(tape, x, hp.conv_filters * len, batch);
      x = numcore::concat_rows(tape, flat, ti);
      hidden = hp.cnn_hidden_layers;
    }
    for (Index k = 0; k < hidden; ++k) {
      const std::string base = "branch.fc" + std::to_string(k);
      x = guard(numcore::dense(tape, tensor(base + ".weight"), tensor(base + ".bias"), x,
                               numcore::Activation::relu),
                base);
    }
    return guard(numcore::dense(tape, tensor("branch.out.weight"), tensor("branch.out.bias"), x,
                                numcore::Activation::linear),
                 "branch.out");
  }

  NodePtr trunk(Tape& tape, const NetInput& in) {
    if (in.s.rows() != 1) throw DimensionError("trunk input must be 1 x B");
    NodePtr s = tape.input(in.s);
    NodePtr hidden = guard(numcore::dense(tape, tensor("trunk.fc0.weight"),
                                          tensor("trunk.fc0.bias"), s, numcore::Activation::relu),
                           "trunk.fc0");
    return guard(numcore::dense(tape, tensor("trunk.out.weight"), tensor("trunk.out.bias"), hidden,
                                numcore::Activation::linear),
                 "trunk.out");
  }

  /// Log-hazard for every column of the batch: 1 x B.
  NodePtr forward(Tape& tape, const NetInput& in) {
    NodePtr b = branch(tape, in);
    NodePtr t = trunk(tape, in);
    return guard(numcore::dot_merge(tape, b, t, merge_bias()), "merge");
  }

 private:
  static constexpr int kConvBlocks = 2;

  static NodePtr guard(NodePtr n, const std::string& layer) {
    if (!n->value.allFinite()) throw NumericError("non-finite activation in layer " + layer);
    return n;
  }

  void add(ParamTensor t) {
    index_[t.name] = tensors_.size();
    tensors_.push_back(std::move(t));
  }

  void add_dense(const std::string& base, Index out, Index in, Rng& rng) {
    add(numcore::glorot_uniform(base + ".weight", out, in, rng));
    add(numcore::zero_bias(base + ".bias", out));
  }

  void check_input(const NetInput& in) const {
    const Index batch = in.batch();
    if (in.history.rows() != arch_.d_tv || in.history.cols() != batch * arch_.hyper.m)
      throw DimensionError("branch input history must be d_tv x (B * m) with m = " +
                           std::to_string(arch_.hyper.m));
    if (in.ti.rows() != arch_.d_ti || in.ti.cols() != batch)
      throw DimensionError("branch time-invariant input must be d_ti x B");
  }

  Architecture arch_;
  std::vector<ParamTensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Single-sample log-hazard. `masked_history` is d_tv x m (future sensors
/// already zero) and `s` the normalized evaluation time.
inline double h_eval(DeepONet& net, const Matrix& masked_history, const Eigen::VectorXd& ti,
                     double s) {
  if (masked_history.cols() != net.arch().hyper.m)
    throw DimensionError("history length must equal m = " + std::to_string(net.arch().hyper.m));
  NetInput in;
  in.history = masked_history;
  in.ti = ti;
  in.s = Matrix::Constant(1, 1, s);
  Tape tape;
  const double h = net.forward(tape, in)->value(0, 0);
  if (!std::isfinite(h)) throw NumericError("h_eval: non-finite log-hazard");
  return h;
}

}  // namespace opsurv::deeponet

#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/numcore/tape.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>

// Batched layers. Every activation matrix holds one sample per column; a
// sequence batch with C channels, length L and B samples is a C x (B*L) matrix
// whose column b*L + t is the channel vector of sample b at position t.

namespace opsurv::numcore {

enum class Activation { relu, linear };

namespace detail {

inline void mix_relu_pattern(Tape& tape, const Matrix& z) {
  std::uint64_t h = 0;
  const double* d = z.data();
  for (Index i = 0; i < z.size(); ++i) {
    h = h * 1099511628211ULL + (d[i] > 0.0 ? 1u : 0u) + static_cast<std::uint64_t>(i);
  }
  tape.mix_pattern(h);
}

/// ReLU subgradient at exactly zero is 0.
inline void apply_activation(Matrix& z, Activation act) {
  if (act == Activation::relu) z = z.cwiseMax(0.0);
}

inline void activation_backward(Matrix& dz, const Matrix& y, Activation act) {
  if (act == Activation::relu) dz = (y.array() > 0.0).select(dz, 0.0);
}

}  // namespace detail

/// act(W x + b) applied column-wise. W is out x in, b is out x 1.
inline NodePtr dense(Tape& tape, ParamTensor& W, ParamTensor& b, const NodePtr& x,
                     Activation act) {
  if (W.cols() != x->value.rows())
    throw DimensionError("dense: weight columns (" + std::to_string(W.cols()) +
                         ") do not match input length (" +
                         std::to_string(x->value.rows()) + ")");
  if (b.rows() != W.rows() || b.cols() != 1)
    throw DimensionError("dense: bias shape does not match weight rows");

  Matrix z = W.value * x->value;
  z.colwise() += b.value.col(0);
  if (tape.tracks_pattern() && act == Activation::relu) detail::mix_relu_pattern(tape, z);
  detail::apply_activation(z, act);
  NodePtr out = tape.make_node(std::move(z), true);

  std::weak_ptr<Node> wout = out;
  tape.record([&W, &b, x, wout, act] {
    auto o = wout.lock();
    if (!o || o->grad.size() == 0) return;
    Matrix dz = o->grad;
    detail::activation_backward(dz, o->value, act);
    W.grad.noalias() += dz * x->value.transpose();
    b.grad.col(0) += dz.rowwise().sum();
    if (x->requires_grad) x->ensure_grad().noalias() += W.value.transpose() * dz;
  });
  return out;
}

/// Stride-1 causal 1D convolution. `kernels` is C_out x (width * C_in) with
/// column k*C_in + c multiplying channel c at offset k - (width - 1), i.e. the
/// input is left-padded with width - 1 zeros and output t sees inputs <= t.
inline NodePtr conv1d_causal(Tape& tape, ParamTensor& kernels, ParamTensor& bias,
                             const NodePtr& x, Index length, Activation act) {
  const Index cin = x->value.rows();
  if (length <= 0 || x->value.cols() == 0)
    throw DimensionError("conv1d_causal: zero-length sequence");
  if (x->value.cols() % length != 0)
    throw DimensionError("conv1d_causal: input columns not a multiple of length");
  if (cin == 0 || kernels.cols() % cin != 0 || kernels.cols() == 0)
    throw DimensionError("conv1d_causal: kernel columns not a multiple of input channels");
  if (bias.rows() != kernels.rows() || bias.cols() != 1)
    throw DimensionError("conv1d_causal: bias shape does not match filters");

  const Index width = kernels.cols() / cin;
  const Index batch = x->value.cols() / length;
  auto col = std::make_shared<Matrix>(Matrix::Zero(width * cin, batch * length));
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < length; ++t) {
      for (Index k = 0; k < width; ++k) {
        const Index src = t - (width - 1) + k;
        if (src < 0) continue;
        col->col(b * length + t).segment(k * cin, cin) = x->value.col(b * length + src);
      }
    }
  }

  Matrix z = kernels.value * (*col);
  z.colwise() += bias.value.col(0);
  if (tape.tracks_pattern() && act == Activation::relu) detail::mix_relu_pattern(tape, z);
  detail::apply_activation(z, act);
  NodePtr out = tape.make_node(std::move(z), true);

  std::weak_ptr<Node> wout = out;
  tape.record([&kernels, &bias, x, wout, col, act, cin, width, batch, length] {
    auto o = wout.lock();
    if (!o || o->grad.size() == 0) return;
    Matrix dz = o->grad;
    detail::activation_backward(dz, o->value, act);
    kernels.grad.noalias() += dz * col->transpose();
    bias.grad.col(0) += dz.rowwise().sum();
    if (!x->requires_grad) return;
    const Matrix dcol = kernels.value.transpose() * dz;
    Matrix& dx = x->ensure_grad();
    for (Index b = 0; b < batch; ++b) {
      for (Index t = 0; t < length; ++t) {
        for (Index k = 0; k < width; ++k) {
          const Index src = t - (width - 1) + k;
          if (src < 0) continue;
          dx.col(b * length + src) += dcol.col(b * length + t).segment(k * cin, cin);
        }
      }
    }
  });
  return out;
}

inline Index pooled_length(Index length, Index stride) {
  return (length + stride - 1) / stride;
}

/// Windowed max over [o*stride, o*stride + pool), truncated at the sequence end
/// so a trailing partial window is pooled over the entries it has. Ties go to
/// the first position.
inline NodePtr maxpool1d(Tape& tape, const NodePtr& x, Index length, Index pool,
                         Index stride) {
  if (pool <= 0 || stride <= 0)
    throw ParameterError("maxpool1d: pool and stride must be positive");
  if (length <= 0 || x->value.cols() % length != 0)
    throw DimensionError("maxpool1d: input columns not a multiple of length");

  const Index channels = x->value.rows();
  const Index batch = x->value.cols() / length;
  const Index out_len = pooled_length(length, stride);
  Matrix y(channels, batch * out_len);
  auto argmax = std::make_shared<Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>>(
      channels, batch * out_len);

  for (Index b = 0; b < batch; ++b) {
    for (Index o = 0; o < out_len; ++o) {
      const Index begin = o * stride;
      const Index end = std::min(begin + pool, length);
      for (Index c = 0; c < channels; ++c) {
        Index best = begin;
        double best_v = x->value(c, b * length + begin);
        for (Index t = begin + 1; t < end; ++t) {
          const double v = x->value(c, b * length + t);
          if (v > best_v) {
            best_v = v;
            best = t;
          }
        }
        y(c, b * out_len + o) = best_v;
        (*argmax)(c, b * out_len + o) = b * length + best;
      }
    }
  }
  if (tape.tracks_pattern()) {
    std::uint64_t h = 0;
    for (Index i = 0; i < argmax->size(); ++i)
      h = h * 1099511628211ULL + static_cast<std::uint64_t>(argmax->data()[i]);
    tape.mix_pattern(h);
  }

  NodePtr out = tape.make_node(std::move(y), x->requires_grad);
  std::weak_ptr<Node> wout = out;
  tape.record([x, wout, argmax] {
    auto o = wout.lock();
    if (!o || o->grad.size() == 0 || !x->requires_grad) return;
    Matrix& dx = x->ensure_grad();
    for (Index j = 0; j < o->grad.cols(); ++j)
      for (Index c = 0; c < o->grad.rows(); ++c) dx(c, (*argmax)(c, j)) += o->grad(c, j);
  });
  return out;
}

/// Reinterpret the column-major storage of x as a rows x cols matrix.
inline NodePtr reshape(Tape& tape, const NodePtr& x, Index rows, Index cols) {
  if (rows * cols != x->value.size()) throw DimensionError("reshape: size mismatch");
  Matrix y = Eigen::Map<const Matrix>(x->value.data(), rows, cols);
  NodePtr out = tape.make_node(std::move(y), x->requires_grad);
  std::weak_ptr<Node> wout = out;
  tape.record([x, wout] {
    auto o = wout.lock();
    if (!o || o->grad.size() == 0 || !x->requires_grad) return;
    Matrix& dx = x->ensure_grad();
    dx += Eigen::Map<const Matrix>(o->grad.data(), dx.rows(), dx.cols());
  });
  return out;
}

/// Stack a over b row-wise; both must have the same number of columns.
inline NodePtr concat_rows(Tape& tape, const NodePtr& a, const NodePtr& b) {
  if (a->value.cols() != b->value.cols())
    throw DimensionError("concat_rows: column counts differ");
  Matrix y(a->value.rows() + b->value.rows(), a->value.cols());
  y.topRows(a->value.rows()) = a->value;
  y.bottomRows(b->value.rows()) = b->value;
  NodePtr out = tape.make_node(std::move(y), a->requires_grad || b->requires_grad);
  std::weak_ptr<Node> wout = out;
  tape.record([a, b, wout] {
    auto o = wout.lock();
    if (!o || o->grad.size() == 0) return;
    if (a->requires_grad) a->ensure_grad() += o->grad.topRows(a->value.rows());
    if (b->requires_grad) b->ensure_grad() += o->grad.bottomRows(b->value.rows());
  });
  return out;
}

/// Column-wise dot product of two p x B matrices plus a scalar bias: 1 x B.
inline NodePtr dot_merge(Tape& tape, const NodePtr& left, const NodePtr& right,
                         ParamTensor& bias) {
  if (left->value.rows() != right->value.rows() || left->value.cols() != right->value.cols())
    throw DimensionError("dot_merge: operand shapes differ");
  if (bias.size() != 1) throw DimensionError("dot_merge: bias must be scalar");
  Matrix y = left->value.cwiseProduct(right->value).colwise().sum();
  y.array() += bias.value(0, 0);
  NodePtr out = tape.make_node(std::move(y), true);
  std::weak_ptr<Node> wout = out;
  tape.record([left, right, &bias, wout] {
    auto o = wout.lock();
    if (!o || o->grad.size() == 0) return;
    const auto& g = o->grad;
    bias.grad(0, 0) += g.sum();
    if (left->requires_grad)
      left->ensure_grad() += (right->value.array().rowwise() * g.row(0).array()).matrix();
    if (right->requires_grad)
      right->ensure_grad() += (left->value.array().rowwise() * g.row(0).array()).matrix();
  });
  return out;
}

/// Sum of all entries: 1 x 1.
inline NodePtr sum_all(Tape& tape, const NodePtr& x) {
  NodePtr out = tape.make_node(Matrix::Constant(1, 1, x->value.sum()), x->requires_grad);
  std::weak_ptr<Node> wout = out;
  tape.record([x, wout] {
    auto o = wout.lock();
    if (!o || o->grad.size() == 0 || !x->requires_grad) return;
    x->ensure_grad().array() += o->grad(0, 0);
  });
  return out;
}

}  // namespace opsurv::numcore

#include "opsurv/numcore.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace opsurv;
using namespace opsurv::numcore;

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

ParamTensor random_param(const std::string& name, Index r, Index c, Rng& rng) {
  ParamTensor t(name, r, c);
  t.value = random_matrix(r, c, rng);
  return t;
}

// Explicit left-padded sum, one sample at a time.
Matrix conv_oracle(const Matrix& kernels, const Matrix& bias, const Matrix& x, Index length,
                   bool relu) {
  const Index cin = x.rows();
  const Index width = kernels.cols() / cin;
  const Index batch = x.cols() / length;
  Matrix out(kernels.rows(), x.cols());
  for (Index b = 0; b < batch; ++b)
    for (Index f = 0; f < kernels.rows(); ++f)
      for (Index t = 0; t < length; ++t) {
        double acc = bias(f, 0);
        for (Index k = 0; k < width; ++k) {
          const Index src = t - (width - 1) + k;
          for (Index c = 0; c < cin; ++c) {
            const double v = src < 0 ? 0.0 : x(c, b * length + src);
            acc += kernels(f, k * cin + c) * v;
          }
        }
        out(f, b * length + t) = relu ? std::max(acc, 0.0) : acc;
      }
  return out;
}

}  // namespace

TEST(Dense, IdentityRelu) {
  ParamTensor W("W", 2, 2), b("b", 2, 1);
  W.value = Matrix::Identity(2, 2);
  Tape tape;
  Matrix x(2, 1);
  x << -1, 2;
  auto y = dense(tape, W, b, tape.input(x), Activation::relu);
  EXPECT_EQ(y->value(0, 0), 0.0);
  EXPECT_EQ(y->value(1, 0), 2.0);
}

TEST(Dense, IdentityLinear) {
  ParamTensor W("W", 2, 2), b("b", 2, 1);
  W.value = Matrix::Identity(2, 2);
  Tape tape;
  Matrix x(2, 1);
  x << -1, 2;
  auto y = dense(tape, W, b, tape.input(x), Activation::linear);
  EXPECT_EQ(y->value(0, 0), -1.0);
  EXPECT_EQ(y->value(1, 0), 2.0);
}

TEST(Dense, MatchesTripleLoopOracle) {
  Rng rng(11);
  auto W = random_param("W", 7, 5, rng);
  auto b = random_param("b", 7, 1, rng);
  const Matrix x = random_matrix(5, 9, rng);
  Tape tape;
  auto y = dense(tape, W, b, tape.input(x), Activation::linear);
  for (Index s = 0; s < 9; ++s)
    for (Index i = 0; i < 7; ++i) {
      double acc = b.value(i, 0);
      for (Index j = 0; j < 5; ++j) acc += W.value(i, j) * x(j, s);
      EXPECT_NEAR(y->value(i, s), acc, 1e-12);
    }
}

TEST(Dense, ShapeMismatchThrows) {
  ParamTensor W("W", 2, 3), b("b", 2, 1);
  Tape tape;
  EXPECT_THROW(dense(tape, W, b, tape.input(Matrix::Zero(2, 1)), Activation::relu), DimensionError);
  ParamTensor bad_b("b", 3, 1);
  EXPECT_THROW(dense(tape, W, bad_b, tape.input(Matrix::Zero(3, 1)), Activation::relu),
               DimensionError);
}

TEST(Conv1d, UnitKernelIsIdentity) {
  ParamTensor K("K", 1, 1), b("b", 1, 1);
  K.value(0, 0) = 1.0;
  Rng rng(3);
  const Matrix x = random_matrix(1, 6, rng, 0.0, 1.0);
  Tape tape;
  auto y = conv1d_causal(tape, K, b, tape.input(x), 6, Activation::relu);
  EXPECT_TRUE(y->value.isApprox(x, 0.0));
}

TEST(Conv1d, FutureInputsNeverReachEarlierOutputs) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ParamTensor K = random_param("K", 3, 2 * 4, rng);  // width 4, 2 channels
    ParamTensor b = random_param("b", 3, 1, rng);
    const Index L = 9;
    const Matrix x = random_matrix(2, L, rng);
    Tape tape;
    const Matrix y0 = conv1d_causal(tape, K, b, tape.input(x), L, Activation::linear)->value;
    for (Index u = 0; u < L; ++u) {
      Matrix xp = x;
      xp.col(u).array() += 3.0;
      Tape t2;
      const Matrix y1 = conv1d_causal(t2, K, b, t2.input(xp), L, Activation::linear)->value;
      for (Index t = 0; t < u; ++t) EXPECT_EQ((y1.col(t) - y0.col(t)).norm(), 0.0);
    }
  }
}

TEST(Conv1d, ShiftKernelDependsOnlyOnPast) {
  // kernel (0, 1): output t = x_t; perturbing c (position 2) leaves 0 and 1 alone.
  ParamTensor K("K", 1, 2), b("b", 1, 1);
  K.value << 0.0, 1.0;
  Matrix x(1, 3);
  x << 1.0, 2.0, 3.0;
  Tape tape;
  const Matrix y0 = conv1d_causal(tape, K, b, tape.input(x), 3, Activation::relu)->value;
  x(0, 2) = -40.0;
  Tape t2;
  const Matrix y1 = conv1d_causal(t2, K, b, t2.input(x), 3, Activation::relu)->value;
  EXPECT_EQ(y0(0, 0), y1(0, 0));
  EXPECT_EQ(y0(0, 1), y1(0, 1));
}

TEST(Conv1d, MatchesPaddedSumOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Index cin = 1 + trial % 3, cout = 2 + trial % 4, width = 1 + trial % 8, L = 5 + trial;
    const Index batch = 3;
    ParamTensor K = random_param("K", cout, width * cin, rng);
    ParamTensor b = random_param("b", cout, 1, rng);
    const Matrix x = random_matrix(cin, batch * L, rng);
    const bool relu = trial % 2 == 0;
    Tape tape;
    auto y = conv1d_causal(tape, K, b, tape.input(x), L, relu ? Activation::relu : Activation::linear);
    const Matrix ref = conv_oracle(K.value, b.value, x, L, relu);
    EXPECT_LT((y->value - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Conv1d, ZeroLengthThrows) {
  ParamTensor K("K", 1, 1), b("b", 1, 1);
  Tape tape;
  EXPECT_THROW(conv1d_causal(tape, K, b, tape.input(Matrix::Zero(1, 0)), 0, Activation::relu),
               DimensionError);
}

TEST(MaxPool, PairsOfFour) {
  Matrix x(1, 4);
  x << 1, 2, 3, 4;
  Tape tape;
  auto y = maxpool1d(tape, tape.input(x), 4, 2, 2);
  ASSERT_EQ(y->value.cols(), 2);
  EXPECT_EQ(y->value(0, 0), 2.0);
  EXPECT_EQ(y->value(0, 1), 4.0);
}

TEST(MaxPool, ConstantSequence) {
  const Matrix x = Matrix::Constant(2, 10, 0.7);
  Tape tape;
  auto y = maxpool1d(tape, tape.input(x), 10, 3, 3);
  EXPECT_EQ(y->value.cols(), 4);
  EXPECT_TRUE((y->value.array() == 0.7).all());
}

TEST(MaxPool, MatchesWindowScanOracle) {
  Rng rng(23);
  const Index L = 250, pool = 8, batch = 3;
  const Matrix x = random_matrix(4, batch * L, rng);
  Tape tape;
  auto y = maxpool1d(tape, tape.input(x), L, pool, pool);
  const Index out_len = (L + pool - 1) / pool;
  ASSERT_EQ(y->value.cols(), batch * out_len);
  for (Index b = 0; b < batch; ++b)
    for (Index c = 0; c < 4; ++c)
      for (Index o = 0; o < out_len; ++o) {
        double best = -INFINITY;
        for (Index t = o * pool; t < std::min(o * pool + pool, L); ++t)
          best = std::max(best, x(c, b * L + t));
        EXPECT_EQ(y->value(c, b * out_len + o), best);
      }
}

TEST(MaxPool, NonPositivePoolThrows) {
  Tape tape;
  EXPECT_THROW(maxpool1d(tape, tape.input(Matrix::Zero(1, 4)), 4, 0, 0), ParameterError);
}

TEST(MaxPool, BackwardRoutesToArgmaxOnly) {
  Rng rng(29);
  const Index L = 21, pool = 4;
  Tape tape;
  auto x = tape.input(random_matrix(3, 2 * L, rng), true);
  auto y = maxpool1d(tape, x, L, pool, pool);
  const Matrix up = random_matrix(y->value.rows(), y->value.cols(), rng);
  tape.backward(y, up);
  EXPECT_NEAR(x->grad.sum(), up.sum(), 1e-12);
  for (Index i = 0; i < x->value.size(); ++i) {
    if (x->grad.data()[i] == 0.0) continue;
    // every receiving position holds the max of some window
    bool is_max = false;
    for (Index j = 0; j < y->value.size(); ++j)
      if (y->value.data()[j] == x->value.data()[i]) is_max = true;
    EXPECT_TRUE(is_max);
  }
}

TEST(Backward, LinearDenseSumGivesColumnSums) {
  ParamTensor W("W", 3, 3), b("b", 3, 1);
  W.value = Matrix::Identity(3, 3);
  Tape tape;
  auto x = tape.input(Matrix::Constant(3, 1, 0.5), true);
  auto y = dense(tape, W, b, x, Activation::linear);
  auto loss = sum_all(tape, y);
  tape.backward(loss);
  EXPECT_TRUE(x->grad.isApprox(Matrix::Ones(3, 1)));
}

TEST(Backward, ReluAtZeroHasZeroSubgradient) {
  ParamTensor W("W", 1, 1), b("b", 1, 1);
  W.value(0, 0) = 1.0;
  Tape tape;
  auto x = tape.input(Matrix::Zero(1, 1), true);
  auto y = dense(tape, W, b, x, Activation::relu);
  tape.backward(sum_all(tape, y));
  EXPECT_EQ(x->grad(0, 0), 0.0);
  EXPECT_EQ(W.grad(0, 0), 0.0);
  EXPECT_EQ(b.grad(0, 0), 0.0);
}

TEST(Backward, WithoutForwardIsStateError) {
  Tape tape;
  auto x = tape.input(Matrix::Zero(1, 1));
  EXPECT_THROW(tape.backward(x), StateError);
}

TEST(Backward, SecondBackwardIsStateError) {
  ParamTensor W("W", 1, 1), b("b", 1, 1);
  Tape tape;
  auto y = sum_all(tape, dense(tape, W, b, tape.input(Matrix::Ones(1, 1)), Activation::linear));
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), StateError);
}

// Property: analytic gradients of every layer type agree with central
// differences over 100 random seeds.
TEST(GradCheck, EveryLayerTypeOverRandomSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Index cin = 2, L = 11, batch = 2, width = 3, pool = 4, filters = 3;
    ParamTensor K = random_param("K", filters, width * cin, rng);
    ParamTensor bk = random_param("bk", filters, 1, rng);
    ParamTensor xin = random_param("x", cin, batch * L, rng);
    const Index pooled = pooled_length(L, pool);
    ParamTensor W = random_param("W", 4, filters * pooled + 1, rng);
    ParamTensor bw = random_param("bw", 4, 1, rng);
    ParamTensor ti = random_param("ti", 1, batch, rng);
    ParamTensor W2 = random_param("W2", 4, 4, rng);
    ParamTensor b2 = random_param("b2", 4, 1, rng);
    ParamTensor mb = random_param("mb", 1, 1, rng);
    const Matrix weights = random_matrix(1, batch, rng);
    ParamList params{&K, &bk, &xin, &W, &bw, &ti, &W2, &b2, &mb};

    auto run = [&](bool with_backward) {
      Tape tape(true);
      auto x = tape.input(xin.value, true);
      auto t = tape.input(ti.value, true);
      auto c = conv1d_causal(tape, K, bk, x, L, Activation::relu);
      auto p = maxpool1d(tape, c, L, pool, pool);
      auto f = reshape(tape, p, filters * pooled, batch);
      auto z = concat_rows(tape, f, t);
      auto d = dense(tape, W, bw, z, Activation::relu);
      auto e = dense(tape, W2, b2, d, Activation::linear);
      auto h = dot_merge(tape, d, e, mb);
      Matrix hw = h->value.cwiseProduct(weights);
      const LossProbe probe{hw.sum(), tape.pattern()};
      if (with_backward) {
        zero_grads(params);
        tape.backward(h, weights);
        xin.grad = x->grad;
        ti.grad = t->grad;
      }
      return probe;
    };
    run(true);
    const auto report = grad_check([&] { return run(false); }, params);
    EXPECT_LT(report.max_rel_error, 1e-5) << "seed " << seed << " worst " << report.worst;
    EXPECT_GT(report.checked, report.skipped);
  }
}

TEST(GradCheck, QuadraticIsExact) {
  ParamTensor theta("theta", 3, 1);
  theta.value << 0.5, -2.0, 3.0;
  theta.grad = theta.value;  // d/dtheta 0.5 theta^2
  ParamList params{&theta};
  auto f = [&] { return 0.5 * theta.value.squaredNorm(); };
  const auto report = grad_check(f, params);
  EXPECT_LT(report.max_rel_error, 1e-9);
  EXPECT_EQ(report.checked, 3);
}

TEST(GradCheck, KinkIsNudgedAwayNotReported) {
  // relu(theta) with theta exactly at the kink: both sides differ, so the
  // coordinate is skipped rather than producing a bogus ratio.
  ParamTensor theta("theta", 1, 1);
  theta.value(0, 0) = 0.0;
  theta.grad(0, 0) = 0.0;
  ParamList params{&theta};
  auto f = [&] {
    const double v = theta.value(0, 0);
    return LossProbe{std::max(v, 0.0), v > 0.0 ? 1u : 0u};
  };
  const auto report = grad_check(f, params);
  EXPECT_TRUE(std::isfinite(report.max_rel_error));
  EXPECT_EQ(report.skipped, 1);
}

TEST(Adam, ZeroGradientIsIdentity) {
  Rng rng(1);
  ParamTensor p = random_param("p", 3, 2, rng);
  const Matrix before = p.value;
  ParamList params{&p};
  AdamState state(params);
  for (int i = 0; i < 5; ++i) adam_step(params, state, 0.1);
  EXPECT_EQ((p.value - before).norm(), 0.0);
  EXPECT_EQ(state.step(), 5u);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  // With a constant gradient g the bias-corrected moments are exactly g and
  // g^2, so every step moves by lr * |g| / (|g| + eps).
  ParamTensor p("p", 1, 1);
  ParamList params{&p};
  AdamState state(params);
  const double lr = 1e-3, g = 0.37;
  double prev = p.value(0, 0);
  for (int k = 1; k <= 200; ++k) {
    p.grad(0, 0) = g;
    adam_step(params, state, lr);
    const double step = prev - p.value(0, 0);
    EXPECT_NEAR(step, lr * g / (g + 1e-8), 1e-12 * lr);
    prev = p.value(0, 0);
    EXPECT_EQ(p.grad(0, 0), 0.0);
  }
  EXPECT_EQ(state.step(), 200u);
  EXPECT_TRUE((state.second_moments()[0].array() >= 0.0).all());
}

TEST(Adam, NonFiniteGradientAborts) {
  ParamTensor p("p", 1, 1);
  ParamList params{&p};
  AdamState state(params);
  p.grad(0, 0) = NAN;
  EXPECT_THROW(adam_step(params, state, 0.1), NumericError);
  EXPECT_EQ(p.value(0, 0), 0.0);
  EXPECT_EQ(state.step(), 0u);
}

TEST(Glorot, SameSeedIsBitIdentical) {
  Rng a(99), b(99);
  const auto t1 = glorot_uniform("w", 16, 8, a);
  const auto t2 = glorot_uniform("w", 16, 8, b);
  EXPECT_EQ(std::memcmp(t1.value.data(), t2.value.data(), sizeof(double) * 128), 0);
}

TEST(Glorot, VarianceMatchesUniformMoment) {
  Rng rng(7);
  const Index fan_in = 40, fan_out = 60;
  const auto t = glorot_uniform("w", 1000, 100, fan_in, fan_out, rng);
  const double L = glorot_limit(fan_in, fan_out);
  const double mean = t.value.mean();
  const double var = (t.value.array() - mean).square().mean();
  EXPECT_NEAR(var / (L * L / 3.0), 1.0, 0.05);
  EXPECT_LE(t.value.cwiseAbs().maxCoeff(), L);
}

TEST(Glorot, BiasesAreZero) {
  const auto b = zero_bias("b", 12);
  EXPECT_EQ(b.value.cwiseAbs().sum(), 0.0);
  EXPECT_EQ(b.shape(), (std::vector<std::size_t>{12, 1}));
}

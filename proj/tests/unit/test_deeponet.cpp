#include "opsurv/deeponet.hpp"
#include "opsurv/survloss.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace opsurv;
using namespace opsurv::deeponet;

namespace {

HyperParams small_hyper() {
  HyperParams hp;
  hp.m = 12;
  hp.nodes = 8;
  hp.p = 3;
  hp.conv_filters = 4;
  hp.kernel_width = 3;
  hp.pool_size = 2;
  return hp;
}

NetInput random_input(const Architecture& a, Index batch, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  NetInput in;
  in.history.resize(a.d_tv, batch * a.hyper.m);
  in.ti.resize(a.d_ti, batch);
  in.s.resize(1, batch);
  for (Index i = 0; i < in.history.size(); ++i) in.history.data()[i] = g(rng);
  for (Index i = 0; i < in.ti.size(); ++i) in.ti.data()[i] = g(rng);
  for (Index b = 0; b < batch; ++b) in.s(0, b) = static_cast<double>(b) / static_cast<double>(batch);
  return in;
}

}  // namespace

TEST(Hyper, Defaults) {
  HyperParams hp;
  EXPECT_EQ(hp.nodes, 128);
  EXPECT_EQ(hp.conv_filters, 16);
  EXPECT_EQ(hp.pool_size, 8);
  EXPECT_EQ(hp.learning_rate, 1e-3);
  EXPECT_EQ(hp.batch_size, 1000);
  EXPECT_EQ(hp.m, 250);
  EXPECT_EQ(hp.p, 10);
  EXPECT_NO_THROW(hp.validate());
  hp.p = 0;
  EXPECT_THROW(hp.validate(), ConfigError);
}

TEST(Hyper, VariantNames) {
  EXPECT_EQ(parse_variant("cnn"), BranchVariant::cnn);
  EXPECT_EQ(to_string(BranchVariant::fnn), "fnn");
  EXPECT_THROW(parse_variant("rnn"), ConfigError);
}

TEST(Network, FnnParameterCount) {
  HyperParams hp = small_hyper();
  Rng rng(1);
  DeepONet net({BranchVariant::fnn, 1, 2, hp}, rng);
  const Index in = 12 + 2;
  const Index expected = (in * 8 + 8) + (8 * 8 + 8) + (8 * 3 + 3) + (1 * 8 + 8) + (8 * 3 + 3) + 1;
  EXPECT_EQ(net.parameter_count(), expected);
}

TEST(Network, CnnParameterCountAndOrder) {
  HyperParams hp = small_hyper();
  Rng rng(1);
  DeepONet net({BranchVariant::cnn, 1, 2, hp}, rng);
  // 12 -> 6 -> 3 after two pools of 2
  const Index conv = (4 * 3 * 1 + 4) + (4 * 3 * 4 + 4);
  const Index dense_in = 4 * 3 + 2;
  const Index expected = conv + (dense_in * 8 + 8) + (8 * 3 + 3) + (8 + 8) + (8 * 3 + 3) + 1;
  EXPECT_EQ(net.parameter_count(), expected);
  EXPECT_EQ(net.tensors().front().name, "branch.conv0.kernel");
  EXPECT_EQ(net.tensors().back().name, "merge.bias");
}

TEST(Network, InitialisationIsSeedDeterministic) {
  Rng a(5), b(5), c(6);
  DeepONet n1({BranchVariant::cnn, 1, 2, small_hyper()}, a);
  DeepONet n2({BranchVariant::cnn, 1, 2, small_hyper()}, b);
  DeepONet n3({BranchVariant::cnn, 1, 2, small_hyper()}, c);
  for (std::size_t i = 0; i < n1.tensors().size(); ++i)
    EXPECT_EQ(n1.tensors()[i].value, n2.tensors()[i].value);
  EXPECT_NE(n1.tensors()[0].value, n3.tensors()[0].value);
}

TEST(Network, ZeroWeightsGiveMergeBias) {
  for (auto v : {BranchVariant::fnn, BranchVariant::cnn}) {
    Rng rng(2);
    Architecture a{v, 1, 2, small_hyper()};
    DeepONet net(a, rng);
    for (auto& t : net.tensors()) t.value.setZero();
    net.merge_bias().value(0, 0) = 0.3;
    Tape tape;
    const auto h = net.forward(tape, random_input(a, 5, rng));
    EXPECT_TRUE((h->value.array() == 0.3).all());
  }
}

TEST(Network, BatchMatchesSingleEvaluation) {
  for (auto v : {BranchVariant::fnn, BranchVariant::cnn}) {
    Rng rng(3);
    Architecture a{v, 2, 1, small_hyper()};
    DeepONet net(a, rng);
    const NetInput in = random_input(a, 6, rng);
    Tape tape;
    const Matrix batch = net.forward(tape, in)->value;
    for (Index b = 0; b < 6; ++b) {
      const double single = h_eval(net, in.history.middleCols(b * 12, 12), in.ti.col(b), in.s(0, b));
      EXPECT_NEAR(single, batch(0, b), 1e-13);
    }
  }
}

TEST(Network, BranchOutputHasWidthP) {
  Rng rng(4);
  Architecture a{BranchVariant::cnn, 1, 2, small_hyper()};
  DeepONet net(a, rng);
  Tape tape;
  const NetInput in = random_input(a, 3, rng);
  EXPECT_EQ(net.branch(tape, in)->value.rows(), 3);
  EXPECT_EQ(net.trunk(tape, in)->value.rows(), 3);
}

TEST(Network, WrongHistoryLengthIsDimensionError) {
  Rng rng(4);
  Architecture a{BranchVariant::fnn, 1, 2, small_hyper()};
  DeepONet net(a, rng);
  EXPECT_THROW(h_eval(net, Matrix::Zero(1, 11), Eigen::VectorXd::Zero(2), 0.0), DimensionError);
  NetInput in = random_input(a, 2, rng);
  in.ti.resize(3, 2);
  Tape tape;
  EXPECT_THROW(net.forward(tape, in), DimensionError);
}

TEST(Network, NonFiniteActivationNamesLayer) {
  Rng rng(4);
  Architecture a{BranchVariant::fnn, 1, 2, small_hyper()};
  DeepONet net(a, rng);
  net.tensor("trunk.fc0.bias").value(0, 0) = INFINITY;
  try {
    h_eval(net, Matrix::Zero(1, 12), Eigen::VectorXd::Zero(2), 0.5);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("trunk.fc0"), std::string::npos);
  }
}

TEST(Network, CnnIgnoresMaskedFuture) {
  // Changing sensors at or after position k never affects a row whose history
  // is masked from k on; checked through assemble_batch on expanded data.
  const auto recs = oracle::toy_cohort(5, 12.0, 31, 12);
  const auto grid = TimeGrid::even(12.0, 12);
  auto ds = expand_dataset(recs, grid);
  Rng rng(8);
  SurvivalModel model{DeepONet({BranchVariant::cnn, 1, 2, small_hyper()}, rng),
                      Standardizer::fit(ds), grid};
  const auto h0 = h_eval_batch(model, ds);
  for (auto& s : ds.sensors) s.rightCols(6).array() += 5.0;
  const auto h1 = h_eval_batch(model, ds);
  for (Index r = 0; r < ds.n_rows(); ++r)
    if (ds.rows[static_cast<std::size_t>(r)].interval <= 6) EXPECT_EQ(h0(r), h1(r));
}

TEST(Standardizer, FitsObservedSensorsOnly) {
  std::vector<SurvivalRecord> recs{{"a", 1.0, 1, {StepPath{{0.0}, {2.0}}}, {1.0}},
                                   {"b", 3.0, 0, {StepPath{{0.0}, {4.0}}}, {3.0}}};
  const auto ds = expand_dataset(recs, TimeGrid::even(4.0, 4));
  const auto st = Standardizer::fit(ds);
  // a observes knots 0,1 (value 2); b observes 0..3 (value 4): mean 20/6
  EXPECT_NEAR(st.tv_mean(0), 20.0 / 6.0, 1e-14);
  EXPECT_NEAR(st.ti_mean(0), 2.0, 1e-14);
  EXPECT_NEAR(st.ti_sd(0), 1.0, 1e-14);
}

TEST(Standardizer, DegenerateSpreadFallsBackToOne) {
  std::vector<SurvivalRecord> recs{{"a", 1.0, 1, {StepPath::constant(3.0)}, {5.0}},
                                   {"b", 2.0, 1, {StepPath::constant(3.0)}, {5.0}}};
  const auto st = Standardizer::fit(expand_dataset(recs, TimeGrid::even(2.0, 2)));
  EXPECT_EQ(st.tv_sd(0), 1.0);
  EXPECT_EQ(st.ti_sd(0), 1.0);
}

TEST(Serialize, RoundTripIsExact) {
  for (auto v : {BranchVariant::fnn, BranchVariant::cnn}) {
    Rng rng(12);
    const auto recs = oracle::toy_cohort(6, 12.0, 2, 12);
    const auto grid = TimeGrid::even(12.0, 12);
    const auto ds = expand_dataset(recs, grid);
    SurvivalModel model{DeepONet({v, 1, 2, small_hyper()}, rng), Standardizer::fit(ds), grid};
    model.net.merge_bias().value(0, 0) = 1.0 / 3.0;
    std::stringstream ss;
    write_model(ss, model);
    const std::string text = ss.str();
    SurvivalModel back = read_model(ss);
    for (std::size_t i = 0; i < model.net.tensors().size(); ++i)
      EXPECT_EQ(model.net.tensors()[i].value, back.net.tensors()[i].value);
    EXPECT_TRUE(model.scale == back.scale);
    EXPECT_TRUE(model.grid == back.grid);
    EXPECT_TRUE(model.net.arch() == back.net.arch());
    std::stringstream again;
    write_model(again, back);
    EXPECT_EQ(text, again.str());
    EXPECT_EQ(h_eval_batch(model, ds), h_eval_batch(back, ds));
  }
}

TEST(Serialize, RejectsCorruptFiles) {
  std::stringstream bad_header("opsurv-model 9\n");
  EXPECT_THROW(read_model(bad_header), IngestError);
  Rng rng(1);
  SurvivalModel model{DeepONet({BranchVariant::fnn, 1, 0, small_hyper()}, rng),
                      Standardizer::identity(1, 0), TimeGrid::even(1.0, 12)};
  std::stringstream ss;
  write_model(ss, model);
  std::string text = ss.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(read_model(truncated), IngestError);
}

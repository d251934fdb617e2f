#include "opsurv/survloss.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace opsurv;

namespace {

SurvivalRecord simple(const std::string& id, double y, int delta, double x = 1.0) {
  return SurvivalRecord{id, y, delta, {StepPath::constant(x)}, {}};
}

deeponet::SurvivalModel constant_model(double c, const TimeGrid& grid, Index d_tv = 1,
                                       Index d_ti = 0) {
  deeponet::HyperParams hp;
  hp.m = grid.m();
  hp.nodes = 4;
  hp.p = 2;
  Rng rng(1);
  deeponet::DeepONet net({deeponet::BranchVariant::fnn, d_tv, d_ti, hp}, rng);
  for (auto& t : net.tensors()) t.value.setZero();
  net.merge_bias().value(0, 0) = c;
  return {std::move(net), deeponet::Standardizer::identity(d_tv, d_ti), grid};
}

}  // namespace

TEST(StepPath, ValueIsLatestSensorAtOrBefore) {
  StepPath p{{0.0, 6.0, 18.0}, {1.0, 2.0, 3.0}};
  EXPECT_EQ(*p.value_at(0.0), 1.0);
  EXPECT_EQ(*p.value_at(5.999), 1.0);
  EXPECT_EQ(*p.value_at(6.0), 2.0);
  EXPECT_EQ(*p.value_at(12.0), 2.0);
  EXPECT_EQ(*p.value_at(100.0), 3.0);
  StepPath late{{2.0}, {1.0}};
  EXPECT_FALSE(late.value_at(1.0).has_value());
}

TEST(StepPath, SensorTimeWithinToleranceMatchesKnot) {
  // 0.1 * 3 is not exactly 0.3; the tolerance absorbs that.
  StepPath p{{0.0, 0.1 * 3}, {1.0, 2.0}};
  EXPECT_EQ(*p.value_at(0.3), 2.0);
}

TEST(TimeGrid, EvenWidths) {
  const auto g = TimeGrid::even(100.0, 250);
  EXPECT_EQ(g.m(), 250);
  for (Index j = 1; j <= g.m(); ++j) EXPECT_NEAR(g.width(j), 0.4, 1e-12);
  EXPECT_EQ(g.knot(250), 100.0);
}

TEST(TimeGrid, RejectsBadShape) {
  EXPECT_THROW(TimeGrid::even(1.0, 0), ConfigError);
  EXPECT_THROW(TimeGrid::even(0.0, 4), ConfigError);
}

TEST(TimeGrid, BuildUsesLargestEventTime) {
  std::vector<SurvivalRecord> recs{simple("a", 3.0, 1), simple("b", 9.0, 0), simple("c", 5.0, 1)};
  EXPECT_EQ(build_grid(recs, 5).tau(), 5.0);
  EXPECT_EQ(build_grid(recs, 5, 20.0).tau(), 20.0);
  std::vector<SurvivalRecord> none{simple("a", 3.0, 0)};
  EXPECT_THROW(build_grid(none, 5), ConfigError);
}

TEST(TimeGrid, RowCountsAndIntervals) {
  const auto g = TimeGrid::even(1.0, 2);
  EXPECT_EQ(g.rows_for(0.0), 1);
  EXPECT_EQ(g.rows_for(0.5), 2);
  EXPECT_EQ(g.rows_for(0.7), 2);
  EXPECT_EQ(g.open_rows_for(0.5), 1);
  EXPECT_EQ(g.open_rows_for(0.0), 0);
  EXPECT_EQ(g.interval_containing(0.0), 1);
  EXPECT_EQ(g.interval_containing(0.5), 1);
  EXPECT_EQ(g.interval_containing(0.6), 2);
  EXPECT_EQ(g.interval_containing(1.5), 3);
}

TEST(Expand, SingleSubjectTable) {
  // y = 2.5 on knots 0..4: rows for t_0, t_1, t_2 with the event on the last.
  StepPath p{{0.0, 1.0, 2.0}, {10.0, 20.0, 30.0}};
  std::vector<SurvivalRecord> recs{{"a", 2.5, 1, {p}, {7.0}}};
  const auto ds = expand_dataset(recs, TimeGrid::even(4.0, 4));
  ASSERT_EQ(ds.n_rows(), 3);
  EXPECT_EQ(ds.rows[0].delta, 0);
  EXPECT_EQ(ds.rows[1].delta, 0);
  EXPECT_EQ(ds.rows[2].delta, 1);
  EXPECT_EQ(ds.rows[2].eval_time, 2.0);
  const Eigen::MatrixXd h = ds.masked_history(ds.rows[1]);
  ASSERT_EQ(h.cols(), 4);
  EXPECT_EQ(h(0, 0), 10.0);
  EXPECT_EQ(h(0, 1), 20.0);
  EXPECT_EQ(h(0, 2), 0.0);
  EXPECT_EQ(h(0, 3), 0.0);
}

TEST(Expand, EventAtTauLandsOnLastRow) {
  std::vector<SurvivalRecord> recs{simple("a", 1.0, 1)};
  const auto ds = expand_dataset(recs, TimeGrid::even(1.0, 4));
  ASSERT_EQ(ds.n_rows(), 4);
  EXPECT_EQ(ds.rows.back().delta, 1);
}

TEST(Expand, EventBeyondTauIsCensoredAtTau) {
  std::vector<SurvivalRecord> recs{simple("a", 3.0, 1)};
  const auto ds = expand_dataset(recs, TimeGrid::even(1.0, 4));
  EXPECT_EQ(ds.n_rows(), 4);
  for (const auto& r : ds.rows) EXPECT_EQ(r.delta, 0);
}

TEST(Expand, UndefinedPathNamesSubjectAndKnot) {
  std::vector<SurvivalRecord> recs{{"late", 2.0, 1, {StepPath{{0.5}, {1.0}}}, {}}};
  try {
    expand_dataset(recs, TimeGrid::even(2.0, 4));
    FAIL();
  } catch (const IngestError& e) {
    EXPECT_NE(std::string(e.what()).find("late"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("t_0"), std::string::npos);
  }
}

// Property: row count is sum of rows_for(y_i), at most one event per subject,
// masked histories never carry a sensor past the evaluation time.
TEST(Expand, StructuralInvariants) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto recs = oracle::toy_cohort(15, 10.0, seed);
    const auto grid = TimeGrid::even(10.0, 9);
    const auto ds = expand_dataset(recs, grid);
    Index expected = 0;
    for (const auto& r : recs) expected += grid.rows_for(r.y);
    EXPECT_EQ(ds.n_rows(), expected);
    std::vector<int> events(recs.size(), 0);
    for (const auto& row : ds.rows) {
      events[static_cast<std::size_t>(row.subject)] += row.delta;
      const auto h = ds.masked_history(row);
      for (Index k = row.interval; k < grid.m(); ++k) EXPECT_EQ(h(0, k), 0.0);
    }
    for (std::size_t i = 0; i < recs.size(); ++i)
      EXPECT_EQ(events[i], recs[i].delta == 1 && recs[i].y <= 10.0 ? 1 : 0);
  }
}

TEST(Loss, HandCase) {
  std::vector<SurvivalRecord> recs{simple("a", 0.7, 1)};
  const auto ds = expand_dataset(recs, TimeGrid::even(1.0, 2));
  const std::vector<double> h(2, 0.0);
  EXPECT_DOUBLE_EQ(likelihood_loss(h, ds.rows), 1.0);
}

TEST(Loss, MatchesPerSubjectOracle) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.7);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 20, m = 1 + trial % 12;
    const double tau = 5.0;
    auto recs = oracle::toy_cohort(n, tau, 1000 + static_cast<std::uint64_t>(trial));
    std::vector<std::vector<double>> table(static_cast<std::size_t>(n), std::vector<double>(m + 1));
    for (auto& row : table)
      for (auto& v : row) v = g(rng);
    const auto ds = expand_dataset(recs, TimeGrid::even(tau, m));
    std::vector<double> h;
    for (const auto& r : ds.rows)
      h.push_back(table[static_cast<std::size_t>(r.subject)][static_cast<std::size_t>(r.interval)]);
    const double ref = oracle::per_subject_loss(recs, tau, m, [&](int i, int j) {
      return table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    });
    EXPECT_NEAR(likelihood_loss(h, ds.rows), ref, 1e-12);
  }
}

TEST(Loss, GradientMatchesDerivative) {
  const auto recs = oracle::toy_cohort(6, 3.0, 8);
  const auto ds = expand_dataset(recs, TimeGrid::even(3.0, 5));
  std::vector<double> h(ds.rows.size());
  for (std::size_t r = 0; r < h.size(); ++r) h[r] = 0.1 * static_cast<double>(r % 7) - 0.3;
  std::vector<double> grad(h.size());
  const double scaled = likelihood_loss_grad(h, ds.rows, 1.0 / 6.0, grad);
  EXPECT_NEAR(scaled, likelihood_loss(h, ds.rows), 1e-14);
  for (std::size_t r = 0; r < h.size(); ++r) {
    auto hp = h, hm = h;
    hp[r] += 1e-6;
    hm[r] -= 1e-6;
    const double fd = (likelihood_loss(hp, ds.rows) - likelihood_loss(hm, ds.rows)) / 2e-6;
    EXPECT_NEAR(grad[r], fd, 1e-8);
  }
}

TEST(Loss, OverflowGuard) {
  std::vector<SurvivalRecord> recs{simple("a", 0.7, 1)};
  const auto ds = expand_dataset(recs, TimeGrid::even(1.0, 2));
  EXPECT_THROW(likelihood_loss(std::vector<double>{0.0, 701.0}, ds.rows), NumericError);
  EXPECT_THROW(likelihood_loss(std::vector<double>{0.0, NAN}, ds.rows), NumericError);
  EXPECT_THROW(likelihood_loss(std::vector<double>{0.0}, ds.rows), DimensionError);
}

TEST(Loss, ConstantMinimizerIsOccurrenceExposure) {
  const auto recs = oracle::toy_cohort(40, 4.0, 12);
  const auto ds = expand_dataset(recs, TimeGrid::even(4.0, 8));
  const double c = constant_log_hazard(ds);
  auto at = [&](double v) { return likelihood_loss(std::vector<double>(ds.rows.size(), v), ds.rows); };
  EXPECT_LT(at(c), at(c + 1e-3));
  EXPECT_LT(at(c), at(c - 1e-3));
}

TEST(Loss, MinimizerStableUnderGridRefinement) {
  // Occurrence/exposure on m and 2m differs only through discretization of exposure.
  const auto recs = oracle::toy_cohort(200, 4.0, 21);
  const double c1 = constant_log_hazard(expand_dataset(recs, TimeGrid::even(4.0, 200)));
  const double c2 = constant_log_hazard(expand_dataset(recs, TimeGrid::even(4.0, 400)));
  EXPECT_NEAR(c1, c2, 0.02);
}

TEST(Curve, UnitHazard) {
  const auto grid = TimeGrid::even(1.0, 4);
  auto model = constant_model(0.0, grid);
  const auto c = predict_survival(model, {StepPath::constant(0.3)}, {});
  ASSERT_EQ(c.size(), 5u);
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(c.values[static_cast<std::size_t>(k)], std::exp(-0.25 * k), 1e-15);
  EXPECT_TRUE(c.is_valid());
}

TEST(Curve, ConstantHazardTwo) {
  const auto grid = TimeGrid::even(3.0, 6);
  auto model = constant_model(std::log(2.0), grid);
  const auto c = predict_survival(model, {StepPath::constant(0.0)}, {});
  for (std::size_t k = 0; k < c.size(); ++k)
    EXPECT_NEAR(c.values[k], std::exp(-2.0 * c.times[k]), 1e-13);
}

TEST(Curve, ValidityAndStepLookup) {
  const auto c = SurvivalCurve::from_cumulative_hazard({0.0, 1.0, 2.0}, {0.0, 0.5, 2000.0});
  EXPECT_TRUE(c.is_valid());
  EXPECT_GT(c.values[2], 0.0);
  EXPECT_EQ(c.at(-1.0), 1.0);
  EXPECT_EQ(c.at(1.5), c.values[1]);
  SurvivalCurve bad{{0.0, 1.0}, {0.5, 0.6}};
  EXPECT_FALSE(bad.is_valid());
}

TEST(Curve, GridMismatchIsDimensionError) {
  auto model = constant_model(0.0, TimeGrid::even(1.0, 4));
  EXPECT_THROW(predict_survival(model, {StepPath::constant(0.0)}, {}, TimeGrid::even(1.0, 5)),
               DimensionError);
}

TEST(Curve, FutureCovariatesDoNotChangePastSurvival) {
  Rng rng(3);
  deeponet::HyperParams hp;
  hp.m = 10;
  hp.nodes = 8;
  hp.p = 3;
  hp.conv_filters = 3;
  hp.kernel_width = 3;
  hp.pool_size = 2;
  for (auto variant : {deeponet::BranchVariant::fnn, deeponet::BranchVariant::cnn}) {
    deeponet::SurvivalModel model{deeponet::DeepONet({variant, 1, 0, hp}, rng),
                                  deeponet::Standardizer::identity(1, 0), TimeGrid::even(10.0, 10)};
    StepPath a{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}};
    StepPath b = a;
    for (std::size_t k = 5; k < 10; ++k) b.values[k] = -7.0;
    const auto ca = predict_survival(model, {a}, {});
    const auto cb = predict_survival(model, {b}, {});
    // S(t_k) depends on h at t_0..t_{k-1}, which sees sensors up to t_{k-1}.
    for (std::size_t k = 0; k <= 5; ++k) EXPECT_EQ(ca.values[k], cb.values[k]);
    EXPECT_NE(ca.values[10], cb.values[10]);
  }
}

TEST(Gradients, NetworkLossBothVariants) {
  deeponet::HyperParams hp;
  hp.m = 10;
  hp.nodes = 6;
  hp.p = 3;
  hp.conv_filters = 3;
  hp.kernel_width = 3;
  hp.pool_size = 2;
  for (auto variant : {deeponet::BranchVariant::fnn, deeponet::BranchVariant::cnn}) {
    const auto recs = oracle::toy_cohort(8, 10.0, 77);
    const auto grid = TimeGrid::even(10.0, 10);
    const auto ds = expand_dataset(recs, grid);
    Rng rng(5);
    deeponet::SurvivalModel model{deeponet::DeepONet({variant, 1, 2, hp}, rng),
                                  deeponet::Standardizer::fit(ds), grid};
    for (auto& t : model.net.tensors())
      if (t.name.find("bias") != std::string::npos) t.value.setConstant(0.05);
    const auto report = loss_grad_check(model, ds);
    EXPECT_LT(report.max_rel_error, 1e-5) << deeponet::to_string(variant) << " " << report.worst;
    EXPECT_GT(report.checked, 0);
  }
}

TEST(Train, RecoversConstantHazard) {
  // Exponential(rate 0.2) failures, uniform censoring, covariate unrelated.
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> fail(0.2);
  std::uniform_real_distribution<double> cens(0.0, 15.0), x(0.0, 1.0);
  auto make = [&](int n) {
    std::vector<SurvivalRecord> out;
    for (int i = 0; i < n; ++i) {
      const double t = fail(rng), c = cens(rng);
      out.push_back(simple("s" + std::to_string(i), std::min(t, c), t <= c ? 1 : 0, x(rng)));
    }
    return out;
  };
  const auto tr = make(400), va = make(200);
  deeponet::HyperParams hp;
  hp.m = 20;
  hp.nodes = 16;
  hp.p = 4;
  hp.batch_size = 256;
  hp.max_epochs = 30;
  const auto res = train(deeponet::BranchVariant::fnn, hp, tr, va, 42);
  EXPECT_NE(res.reason, StopReason::aborted);
  auto model = res.model;
  const auto ds = expand_dataset(tr, model.grid);
  const double target = std::exp(constant_log_hazard(ds));
  const auto h = deeponet::h_eval_batch(model, ds);
  EXPECT_NEAR(h.array().exp().mean() / target, 1.0, 0.1);
}

TEST(Train, SameSeedSameParameters) {
  const auto tr = oracle::toy_cohort(30, 5.0, 1), va = oracle::toy_cohort(10, 5.0, 2);
  deeponet::HyperParams hp;
  hp.m = 8;
  hp.nodes = 8;
  hp.p = 3;
  hp.batch_size = 32;
  hp.max_epochs = 5;
  const auto a = train(deeponet::BranchVariant::fnn, hp, tr, va, 7);
  const auto b = train(deeponet::BranchVariant::fnn, hp, tr, va, 7);
  ASSERT_EQ(a.model.net.tensors().size(), b.model.net.tensors().size());
  for (std::size_t i = 0; i < a.model.net.tensors().size(); ++i)
    EXPECT_EQ(a.model.net.tensors()[i].value, b.model.net.tensors()[i].value);
  EXPECT_EQ(a.trace.size(), b.trace.size());
}

TEST(Train, PatienceZeroStopsAfterFirstNonImprovement) {
  const auto tr = oracle::toy_cohort(30, 5.0, 3), va = oracle::toy_cohort(10, 5.0, 4);
  deeponet::HyperParams hp;
  hp.m = 8;
  hp.nodes = 8;
  hp.p = 3;
  hp.batch_size = 8;
  hp.learning_rate = 0.05;
  hp.patience = 0;
  hp.max_epochs = 200;
  const auto res = train(deeponet::BranchVariant::fnn, hp, tr, va, 3);
  ASSERT_EQ(res.reason, StopReason::early_stopping);
  EXPECT_FALSE(res.trace.back().improved);
  for (std::size_t i = 0; i + 1 < res.trace.size(); ++i) EXPECT_TRUE(res.trace[i].improved);
}

TEST(Train, ReturnsBestValidationCheckpoint) {
  const auto tr = oracle::toy_cohort(30, 5.0, 5), va = oracle::toy_cohort(10, 5.0, 6);
  deeponet::HyperParams hp;
  hp.m = 8;
  hp.nodes = 8;
  hp.p = 3;
  hp.batch_size = 16;
  hp.patience = 3;
  hp.max_epochs = 40;
  auto res = train(deeponet::BranchVariant::fnn, hp, tr, va, 11);
  const auto dv = expand_dataset(va, res.model.grid);
  EXPECT_NEAR(dataset_loss(res.model, dv), res.best_valid_loss, 1e-12);
}

TEST(Train, EmptyInputsRejected) {
  deeponet::HyperParams hp;
  std::vector<SurvivalRecord> none;
  const auto some = oracle::toy_cohort(3, 1.0, 1);
  EXPECT_THROW(train(deeponet::BranchVariant::fnn, hp, none, some, 1), DataError);
}

#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/survloss/curve.hpp"
#include "opsurv/survloss/grid.hpp"
#include "opsurv/survloss/record.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace opsurv::coxtv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Counting-process row: at risk on (start, stop], covariates frozen at start.
struct CoxRow {
  Index subject = 0;
  double start = 0.0;
  double stop = 0.0;
  int event = 0;
  Vector x;
};

/// Covariate vector at time t: time-varying values at t then the time-invariant ones.
inline Vector covariates_at(const std::vector<StepPath>& tv, const std::vector<double>& ti,
                            double t, const std::string& id = "") {
  Vector x(static_cast<Index>(tv.size() + ti.size()));
  for (std::size_t c = 0; c < tv.size(); ++c) {
    const auto v = tv[c].value_at(t);
    if (!v)
      throw IngestError("subject " + id + ": covariate " + std::to_string(c) +
                        " undefined at t = " + std::to_string(t));
    x(static_cast<Index>(c)) = *v;
  }
  for (std::size_t c = 0; c < ti.size(); ++c) x(static_cast<Index>(tv.size() + c)) = ti[c];
  return x;
}

/// Rows (t_{j-1}, min(t_j, y)] for every t_{j-1} < y, covariates at t_{j-1};
/// the last row carries the event. Subjects with y = 0 have no rows.
inline std::vector<CoxRow> cox_expand(std::span<const SurvivalRecord> records, const TimeGrid& grid) {
  std::vector<CoxRow> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    validate_record(r);
    const Index n = grid.open_rows_for(r.y);
    for (Index j = 1; j <= n; ++j) {
      CoxRow row;
      row.subject = static_cast<Index>(i);
      row.start = grid.knot(j - 1);
      row.stop = std::min(grid.knot(j), r.y);
      row.event = (j == n && r.delta == 1 && r.y <= grid.knot(j) + time_tolerance(r.y)) ? 1 : 0;
      row.x = covariates_at(r.tv, r.ti, row.start, r.id);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

struct PartialLikelihood {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

namespace detail {

/// Distinct event times (descending) with, for each, the risk-set sums
/// S0, S1, S2 over rows with start < u <= stop and the event count/covariate sum.
struct RiskSweep {
  std::vector<double> times;
  std::vector<double> deaths;
  std::vector<long double> s0;
  std::vector<Vector> s1;
  std::vector<Matrix> s2;
  std::vector<Vector> xsum;
  std::vector<double> eta_sum;
};

inline RiskSweep risk_sweep(const Vector& beta, std::span<const CoxRow> rows, const Vector& center,
                            bool second_order) {
  const Index p = beta.size();
  const std::size_t n = rows.size();
  std::vector<std::size_t> by_stop(n), by_start(n);
  std::iota(by_stop.begin(), by_stop.end(), std::size_t{0});
  std::iota(by_start.begin(), by_start.end(), std::size_t{0});
  auto stop_desc = [&](std::size_t a, std::size_t b) {
    if (rows[a].stop != rows[b].stop) return rows[a].stop > rows[b].stop;
    return rows[a].event > rows[b].event;
  };
  std::stable_sort(by_stop.begin(), by_stop.end(), stop_desc);
  std::stable_sort(by_start.begin(), by_start.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].start > rows[b].start; });

  std::vector<double> risk(n);
  std::vector<Vector> xc(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].x.size() != p) throw DimensionError("cox: covariate length differs from beta");
    xc[i] = rows[i].x - center;
    risk[i] = std::exp(beta.dot(xc[i]));
  }

  RiskSweep sw;
  long double s0 = 0.0L;
  Eigen::Matrix<long double, Eigen::Dynamic, 1> s1 = Eigen::Matrix<long double, Eigen::Dynamic, 1>::Zero(p);
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> s2 =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>::Zero(p, p);
  std::size_t add = 0, rem = 0;
  std::size_t k = 0;
  while (k < n) {
    const std::size_t i0 = by_stop[k];
    if (!rows[i0].event) {
      ++k;
      continue;
    }
    const double u = rows[i0].stop;
    while (add < n && rows[by_stop[add]].stop >= u) {
      const std::size_t i = by_stop[add++];
      const Eigen::Matrix<long double, Eigen::Dynamic, 1> xl = xc[i].cast<long double>();
      s0 += risk[i];
      s1 += static_cast<long double>(risk[i]) * xl;
      if (second_order) s2 += static_cast<long double>(risk[i]) * xl * xl.transpose();
    }
    while (rem < n && rows[by_start[rem]].start >= u) {
      const std::size_t i = by_start[rem++];
      const Eigen::Matrix<long double, Eigen::Dynamic, 1> xl = xc[i].cast<long double>();
      s0 -= risk[i];
      s1 -= static_cast<long double>(risk[i]) * xl;
      if (second_order) s2 -= static_cast<long double>(risk[i]) * xl * xl.transpose();
    }
    double d = 0.0;
    double eta = 0.0;
    Vector xs = Vector::Zero(p);
    while (k < n && rows[by_stop[k]].stop == u) {
      const std::size_t i = by_stop[k++];
      if (!rows[i].event) continue;
      d += 1.0;
      xs += xc[i];
      eta += beta.dot(xc[i]);
    }
    if (!(s0 > 0.0L))
      throw DataError("cox: empty risk set at event time " + std::to_string(u));
    sw.times.push_back(u);
    sw.deaths.push_back(d);
    sw.s0.push_back(s0);
    sw.s1.push_back(s1.cast<double>());
    if (second_order) sw.s2.push_back(s2.cast<double>());
    sw.xsum.push_back(std::move(xs));
    sw.eta_sum.push_back(eta);
  }
  return sw;
}

inline Vector column_means(std::span<const CoxRow> rows, Index p) {
  Vector c = Vector::Zero(p);
  if (rows.empty()) return c;
  for (const auto& r : rows) c += r.x;
  return c / static_cast<double>(rows.size());
}

}  // namespace detail

/// Breslow partial log-likelihood with analytic gradient and Hessian. The
/// value is computed on centred covariates, which leaves it unchanged.
inline PartialLikelihood partial_loglik(const Vector& beta, std::span<const CoxRow> rows) {
  const Index p = beta.size();
  const Vector center = detail::column_means(rows, p);
  const auto sw = detail::risk_sweep(beta, rows, center, true);
  PartialLikelihood pl;
  pl.gradient = Vector::Zero(p);
  pl.hessian = Matrix::Zero(p, p);
  long double value = 0.0L;
  for (std::size_t e = 0; e < sw.times.size(); ++e) {
    const double s0 = static_cast<double>(sw.s0[e]);
    const Vector mean = sw.s1[e] / s0;
    value += sw.eta_sum[e] - sw.deaths[e] * std::log(sw.s0[e]);
    pl.gradient += sw.xsum[e] - sw.deaths[e] * mean;
    pl.hessian -= sw.deaths[e] * (sw.s2[e] / s0 - mean * mean.transpose());
  }
  pl.value = static_cast<double>(value);
  return pl;
}

struct CoxFit {
  Vector beta;
  std::vector<double> event_times;   // ascending
  std::vector<double> hazard_jumps;  // Breslow dLambda0 at each event time
  std::vector<double> cumulative;    // Lambda0 at each event time
  Index iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> loglik_trace;

  /// Lambda0(t): sum of jumps at event times <= t.
  double baseline_cumhaz(double t) const {
    auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
    if (it == event_times.begin()) return 0.0;
    return cumulative[static_cast<std::size_t>(it - event_times.begin()) - 1];
  }
};

struct CoxOptions {
  double gradient_tolerance = 1e-8;
  Index max_iterations = 100;
  int max_halvings = 40;
};

/// Breslow baseline jumps d(u) / sum_{at risk} exp(beta' x) for a given beta.
inline void breslow_baseline(CoxFit& fit, std::span<const CoxRow> rows) {
  const Index p = fit.beta.size();
  const Vector center = detail::column_means(rows, p);
  const auto sw = detail::risk_sweep(fit.beta, rows, center, false);
  const double shift = std::exp(-fit.beta.dot(center));
  fit.event_times.assign(sw.times.rbegin(), sw.times.rend());
  fit.hazard_jumps.clear();
  fit.cumulative.clear();
  double acc = 0.0;
  for (std::size_t e = sw.times.size(); e-- > 0;) {
    const double jump = sw.deaths[e] * shift / static_cast<double>(sw.s0[e]);
    acc += jump;
    fit.hazard_jumps.push_back(jump);
    fit.cumulative.push_back(acc);
  }
}

/// Newton-Raphson from beta = 0 with step halving whenever the partial
/// likelihood fails to increase, then the Breslow baseline.
inline CoxFit fit_cox(std::span<const CoxRow> rows, const CoxOptions& opt = {}) {
  if (rows.empty()) throw DataError("fit_cox: no rows");
  if (std::none_of(rows.begin(), rows.end(), [](const CoxRow& r) { return r.event == 1; }))
    throw DataError("fit_cox: no events");
  const Index p = rows.front().x.size();
  CoxFit fit;
  fit.beta = Vector::Zero(p);
  PartialLikelihood pl = partial_loglik(fit.beta, rows);
  fit.loglik_trace.push_back(pl.value);
  for (Index it = 0;; ++it) {
    fit.gradient_norm = pl.gradient.norm();
    fit.iterations = it;
    if (fit.gradient_norm < opt.gradient_tolerance) break;
    if (it >= opt.max_iterations) {
      std::string trace;
      for (double v : fit.loglik_trace) trace += " " + std::to_string(v);
      throw DataError("fit_cox: no convergence after " + std::to_string(it) +
                      " iterations (|grad| = " + std::to_string(fit.gradient_norm) +
                      "); loglik trace:" + trace);
    }
    Vector step = (-pl.hessian).ldlt().solve(pl.gradient);
    if (!step.allFinite()) throw DataError("fit_cox: singular information matrix");
    PartialLikelihood next;
    Vector candidate;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      candidate = fit.beta + step;
      next = partial_loglik(candidate, rows);
      if (std::isfinite(next.value) && next.value >= pl.value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No ascent direction left at machine precision: accept the current point.
      break;
    }
    fit.beta = candidate;
    pl = std::move(next);
    fit.loglik_trace.push_back(pl.value);
  }
  breslow_baseline(fit, rows);
  return fit;
}

/// S(t_k) = exp(-sum_{u <= t_k} dLambda0(u) exp(beta' x(t_{j(u)-1}))), where
/// t_{j(u)-1} is the left knot of the grid interval holding event time u.
inline SurvivalCurve cox_predict_survival(const CoxFit& fit, const std::vector<StepPath>& tv,
                                          const std::vector<double>& ti, const TimeGrid& grid) {
  std::vector<double> cum(static_cast<std::size_t>(grid.m()) + 1, 0.0);
  std::vector<double> increments(static_cast<std::size_t>(grid.m()) + 2, 0.0);
  for (std::size_t e = 0; e < fit.event_times.size(); ++e) {
    const double u = fit.event_times[e];
    const Index j = grid.interval_containing(u);
    if (j > grid.m()) break;
    const Vector x = covariates_at(tv, ti, grid.knot(j - 1));
    increments[static_cast<std::size_t>(j)] += fit.hazard_jumps[e] * std::exp(fit.beta.dot(x));
  }
  for (Index k = 1; k <= grid.m(); ++k)
    cum[static_cast<std::size_t>(k)] = cum[static_cast<std::size_t>(k - 1)] + increments[static_cast<std::size_t>(k)];
  return SurvivalCurve::from_cumulative_hazard(grid.knots(), cum);
}

}  // namespace opsurv::coxtv

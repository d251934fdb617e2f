#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/evalmetrics/brier.hpp"
#include "opsurv/harness/csvio.hpp"
#include "opsurv/survloss/curve.hpp"

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace opsurv::harness {

struct BandSummary {
  std::vector<double> mean;
  std::vector<double> lower;  // pointwise 5% quantile
  std::vector<double> upper;  // pointwise 95% quantile
};

/// Estimated curves of one method on a common time grid, indexed by covariate
/// set then replication. A failed replication leaves an empty slot.
struct CurveTable {
  std::string method;
  std::vector<double> times;
  std::vector<std::vector<std::optional<std::vector<double>>>> curves;

  CurveTable(std::string name, std::vector<double> t, std::size_t sets, std::size_t reps)
      : method(std::move(name)), times(std::move(t)),
        curves(sets, std::vector<std::optional<std::vector<double>>>(reps)) {}

  std::size_t sets() const { return curves.size(); }
  std::size_t replications() const { return curves.empty() ? 0 : curves.front().size(); }

  void set(std::size_t set, std::size_t rep, const SurvivalCurve& c) {
    if (c.times.size() != times.size()) throw DimensionError("CurveTable: curve grid differs");
    curves[set][rep] = c.values;
  }

  /// Pointwise mean and empirical 5-95% band over the completed replications.
  /// With few replications the interpolated quantiles can miss the mean; the
  /// band is widened to contain it.
  BandSummary summary(std::size_t set) const {
    std::vector<const std::vector<double>*> done;
    for (const auto& c : curves[set])
      if (c) done.push_back(&*c);
    if (done.empty()) throw EvaluationError("no completed replication for covariate set " +
                                            std::to_string(set + 1) + " (" + method + ")");
    BandSummary b;
    std::vector<double> column(done.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
      double sum = 0.0;
      for (std::size_t r = 0; r < done.size(); ++r) {
        column[r] = (*done[r])[k];
        sum += column[r];
      }
      const double mean = sum / static_cast<double>(done.size());
      b.mean.push_back(mean);
      b.lower.push_back(std::min(evalmetrics::quantile(column, 0.05), mean));
      b.upper.push_back(std::max(evalmetrics::quantile(column, 0.95), mean));
    }
    return b;
  }

  SurvivalCurve mean_curve(std::size_t set) const { return {times, summary(set).mean}; }

  double mean_band_width(std::size_t set) const {
    const auto b = summary(set);
    double w = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) w += b.upper[k] - b.lower[k];
    return w / static_cast<double>(times.size());
  }
};

/// Long format: method,covariate_set,replication,t,S (sets and replications 1-based).
inline void write_curves_long(std::ostream& os, const std::vector<CurveTable>& tables,
                              bool header = true) {
  if (header) os << "method,covariate_set,replication,t,S\n";
  for (const auto& tab : tables)
    for (std::size_t s = 0; s < tab.sets(); ++s)
      for (std::size_t r = 0; r < tab.replications(); ++r) {
        const auto& c = tab.curves[s][r];
        if (!c) continue;
        for (std::size_t k = 0; k < tab.times.size(); ++k)
          os << tab.method << ',' << s + 1 << ',' << r + 1 << ',' << format_csv_real(tab.times[k])
             << ',' << format_csv_real((*c)[k]) << '\n';
      }
}

/// method,covariate_set,t,mean,q05,q95,truth
inline void write_curve_summary(std::ostream& os, const std::vector<CurveTable>& tables,
                                const std::vector<SurvivalCurve>& truth) {
  os << "method,covariate_set,t,mean,q05,q95,truth\n";
  for (const auto& tab : tables)
    for (std::size_t s = 0; s < tab.sets(); ++s) {
      BandSummary b;
      try {
        b = tab.summary(s);
      } catch (const EvaluationError&) {
        continue;
      }
      for (std::size_t k = 0; k < tab.times.size(); ++k)
        os << tab.method << ',' << s + 1 << ',' << format_csv_real(tab.times[k]) << ','
           << format_csv_real(b.mean[k]) << ',' << format_csv_real(b.lower[k]) << ','
           << format_csv_real(b.upper[k]) << ','
           << (s < truth.size() ? format_csv_real(truth[s].at(tab.times[k])) : std::string("NA"))
           << '\n';
    }
}

}  // namespace opsurv::harness

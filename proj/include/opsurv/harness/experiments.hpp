#pragma once

#include "opsurv/coxtv.hpp"
#include "opsurv/deeponet.hpp"
#include "opsurv/evalmetrics.hpp"
#include "opsurv/harness/config.hpp"
#include "opsurv/harness/curves.hpp"
#include "opsurv/simgen.hpp"
#include "opsurv/survloss.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace opsurv::harness {

using Logger = std::function<void(const std::string&)>;

inline void log_to(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

/// A covariate history plus time-invariant values, as fed to a predictor.
struct CovariateSet {
  std::vector<StepPath> tv;
  std::vector<double> ti;
  std::optional<SurvivalCurve> truth;
  simgen::Covariates latent;
};

/// The fixed evaluation subjects: full paths on the fine grid with their true curves.
inline std::vector<CovariateSet> fixed_covariate_sets(const ExperimentConfig& cfg) {
  std::vector<CovariateSet> out;
  for (std::size_t i = 0; i < cfg.covariate_sets; ++i) {
    Rng rng = substream(cfg.seed, "covsets", i);
    CovariateSet s;
    s.latent = simgen::draw_covariates(rng);
    const StepPath p = simgen::path_from_alpha(s.latent.alpha, cfg.sim);
    s.tv = {p};
    s.ti = {s.latent.z, s.latent.w};
    s.truth = simgen::true_survival(p, s.latent.z, s.latent.w, cfg.sim);
    out.push_back(std::move(s));
  }
  return out;
}

inline simgen::SimConfig sim_with_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  simgen::SimConfig s = cfg.sim;
  s.seed = seed;
  return s;
}

inline TrainOptions train_options(const ExperimentConfig& cfg, const Logger& log,
                                  const std::string& tag) {
  TrainOptions o;
  o.tau = cfg.tau;
  if (log)
    o.on_epoch = [log, tag](const EpochTrace& t) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s epoch %ld train %.6f valid %.6f%s", tag.c_str(),
                    static_cast<long>(t.epoch), t.train_loss, t.valid_loss, t.improved ? " *" : "");
      log(buf);
    };
  return o;
}

// ---------------------------------------------------------------- replicate

struct MethodSummary {
  std::string method;
  std::vector<double> mean_curve_error;  // per covariate set
  std::vector<double> band_width;        // per covariate set
  double mean_band_width = 0.0;
  std::size_t completed = 0;
};

struct ReplicationFailure {
  std::size_t replication = 0;
  std::string method;
  std::string message;
};

struct ReplicationResult {
  std::vector<CovariateSet> sets;
  std::vector<CurveTable> tables;
  std::vector<MethodSummary> summaries;
  std::vector<ReplicationFailure> failures;

  const MethodSummary* summary(const std::string& method) const {
    for (const auto& s : summaries)
      if (s.method == method) return &s;
    return nullptr;
  }
};

/// N independent train/validation draws; each is fitted by every configured
/// method and predicted on the fixed covariate sets on one common grid.
inline ReplicationResult run_replications(const ExperimentConfig& cfg, const Logger& log = {}) {
  cfg.validate();
  if (!cfg.tau) throw ConfigError("replicate needs an explicit grid.tau (a common curve grid)");
  const TimeGrid grid = TimeGrid::even(*cfg.tau, cfg.hyper.m);
  ReplicationResult res;
  res.sets = fixed_covariate_sets(cfg);
  for (const auto& m : cfg.methods)
    res.tables.emplace_back(m, grid.knots(), cfg.covariate_sets, cfg.replications);

  for (std::size_t r = 0; r < cfg.replications; ++r) {
    const std::uint64_t rep_seed = substream_seed(cfg.seed, "replication", r);
    const auto train_set = simgen::observed(simgen::gen_dataset(sim_with_seed(cfg, rep_seed)));
    const auto valid_set =
        simgen::observed(simgen::gen_dataset(sim_with_seed(cfg, substream_seed(rep_seed, "valid"))));
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const std::string& method = cfg.methods[mi];
      const std::string tag = "rep " + std::to_string(r + 1) + " " + method;
      try {
        if (method == "cox") {
          const auto fit = coxtv::fit_cox(coxtv::cox_expand(train_set, grid));
          for (std::size_t s = 0; s < res.sets.size(); ++s)
            res.tables[mi].set(s, r, coxtv::cox_predict_survival(fit, res.sets[s].tv, res.sets[s].ti, grid));
          log_to(log, tag + " done");
          continue;
        }
        auto tr = train(deeponet::parse_variant(method), cfg.hyper, train_set, valid_set, rep_seed,
                        train_options(cfg, log, tag));
        if (tr.reason == StopReason::aborted) throw NumericError(tr.message);
        for (std::size_t s = 0; s < res.sets.size(); ++s)
          res.tables[mi].set(s, r, predict_survival(tr.model, res.sets[s].tv, res.sets[s].ti));
        log_to(log, tag + " done after " + std::to_string(tr.trace.size()) + " epochs (best " +
                        std::to_string(tr.best_epoch) + ")");
      } catch (const std::exception& e) {
        res.failures.push_back({r + 1, method, e.what()});
        log_to(log, tag + " failed: " + e.what());
      }
    }
  }

  for (const auto& tab : res.tables) {
    MethodSummary ms;
    ms.method = tab.method;
    for (std::size_t r = 0; r < tab.replications(); ++r)
      if (tab.curves.front()[r]) ++ms.completed;
    if (ms.completed > 0) {
      for (std::size_t s = 0; s < tab.sets(); ++s) {
        ms.mean_curve_error.push_back(evalmetrics::curve_error(tab.mean_curve(s), *res.sets[s].truth));
        ms.band_width.push_back(tab.mean_band_width(s));
        ms.mean_band_width += ms.band_width.back();
      }
      ms.mean_band_width /= static_cast<double>(tab.sets());
    }
    res.summaries.push_back(std::move(ms));
  }
  return res;
}

inline json to_json(const ReplicationResult& r) {
  json methods = json::object();
  for (const auto& s : r.summaries)
    methods[s.method] = {{"completed_replications", s.completed},
                         {"mean_curve_error", s.mean_curve_error},
                         {"band_width", s.band_width},
                         {"mean_band_width", s.mean_band_width}};
  json failures = json::array();
  for (const auto& f : r.failures)
    failures.push_back({{"replication", f.replication}, {"method", f.method}, {"message", f.message}});
  json sets = json::array();
  for (const auto& s : r.sets)
    sets.push_back({{"alpha", s.latent.alpha}, {"z", s.latent.z}, {"w", s.latent.w}});
  return {{"covariate_sets", sets}, {"methods", methods}, {"failures", failures}};
}

// ----------------------------------------------------------------------- cv

struct FoldReport {
  int fold = 0;
  std::size_t n_test = 0;
  std::size_t events = 0;
  double deeponet_ibs = std::numeric_limits<double>::quiet_NaN();
  double cox_ibs = std::numeric_limits<double>::quiet_NaN();
  double upper = 0.0;
  std::vector<std::string> warnings;
};

struct CvReport {
  std::string variant;
  double tau_star = 0.0;
  std::vector<FoldReport> folds;
  double deeponet_mean = 0.0, deeponet_sd = 0.0;
  double cox_mean = 0.0, cox_sd = 0.0;
};

inline double resolve_tau_star(const ExperimentConfig& cfg, std::span<const SurvivalRecord> recs) {
  if (cfg.tau_star == "q90") return evalmetrics::default_ibs_upper(recs);
  return std::strtod(cfg.tau_star.c_str(), nullptr);
}

namespace detail {
inline void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}
}  // namespace detail

/// k-fold cross-validated IBS of the configured DeepONet and the Cox model.
/// Within each training part a random validation share drives early stopping;
/// Cox is fitted on the whole training part. Both are scored on the held-out
/// fold with G estimated on that fold.
inline CvReport run_cv(const ExperimentConfig& cfg, const std::vector<SurvivalRecord>& records,
                       const Logger& log = {}) {
  cfg.validate();
  if (records.size() < static_cast<std::size_t>(cfg.folds))
    throw DataError("cv: fewer subjects than folds");
  CvReport rep;
  rep.variant = deeponet::to_string(cfg.variant);
  rep.tau_star = resolve_tau_star(cfg, records);
  Rng fold_rng = substream(cfg.seed, "folds");
  const auto folds = evalmetrics::kfold_split(records.size(), cfg.folds, fold_rng);

  std::vector<double> dn, cx;
  for (int f = 0; f < cfg.folds; ++f) {
    const auto test = evalmetrics::select(records, folds.members(f));
    auto pool_idx = folds.complement(f);
    FoldReport fr;
    fr.fold = f + 1;
    fr.n_test = test.size();
    for (const auto& r : test) fr.events += static_cast<std::size_t>(r.delta);
    if (fr.events == 0) throw DataError("cv: fold " + std::to_string(f + 1) + " has no events");

    Rng split_rng = substream(cfg.seed, "validation", static_cast<std::uint64_t>(f));
    std::shuffle(pool_idx.begin(), pool_idx.end(), split_rng);
    const auto n_valid = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(pool_idx.size()))));
    std::vector<std::size_t> valid_idx(pool_idx.begin(), pool_idx.begin() + static_cast<std::ptrdiff_t>(n_valid));
    std::vector<std::size_t> train_idx(pool_idx.begin() + static_cast<std::ptrdiff_t>(n_valid), pool_idx.end());
    std::sort(valid_idx.begin(), valid_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    const auto train_set = evalmetrics::select(records, train_idx);
    const auto valid_set = evalmetrics::select(records, valid_idx);
    const auto pool = evalmetrics::select(records, folds.complement(f));

    const std::uint64_t fold_seed = substream_seed(cfg.seed, "cv", static_cast<std::uint64_t>(f));
    auto tr = train(cfg.variant, cfg.hyper, train_set, valid_set, fold_seed,
                    train_options(cfg, log, "fold " + std::to_string(f + 1)));
    if (tr.reason == StopReason::aborted) fr.warnings.push_back("training aborted: " + tr.message);
    const TimeGrid& grid = tr.model.grid;
    const auto fit = coxtv::fit_cox(coxtv::cox_expand(pool, grid));

    std::vector<SurvivalCurve> dc, cc;
    for (const auto& r : test) {
      dc.push_back(predict_survival(tr.model, r.tv, r.ti));
      cc.push_back(coxtv::cox_predict_survival(fit, r.tv, r.ti, grid));
    }
    const auto g = evalmetrics::km_censoring(test);
    const double upper = std::min(rep.tau_star, grid.tau());
    if (upper < rep.tau_star)
      fr.warnings.push_back("tau* reduced to the model grid end " + std::to_string(grid.tau()));
    const auto di = evalmetrics::integrated_brier(dc, test, upper, g);
    const auto ci = evalmetrics::integrated_brier(cc, test, upper, g);
    if (di.truncated) fr.warnings.push_back(di.warning);
    fr.upper = di.upper;
    fr.deeponet_ibs = di.ibs;
    fr.cox_ibs = ci.ibs;
    dn.push_back(di.ibs);
    cx.push_back(ci.ibs);
    log_to(log, "fold " + std::to_string(f + 1) + " ibs deeponet " + std::to_string(di.ibs) +
                    " cox " + std::to_string(ci.ibs));
    rep.folds.push_back(std::move(fr));
  }
  detail::mean_sd(dn, rep.deeponet_mean, rep.deeponet_sd);
  detail::mean_sd(cx, rep.cox_mean, rep.cox_sd);
  return rep;
}

inline json to_json(const CvReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold},
                     {"n_test", f.n_test},
                     {"events", f.events},
                     {"upper", f.upper},
                     {"deeponet_ibs", f.deeponet_ibs},
                     {"cox_ibs", f.cox_ibs},
                     {"warnings", f.warnings}});
  return {{"variant", r.variant},
          {"tau_star", r.tau_star},
          {"folds", folds},
          {"deeponet", {{"mean_ibs", r.deeponet_mean}, {"sd_ibs", r.deeponet_sd}}},
          {"cox", {{"mean_ibs", r.cox_mean}, {"sd_ibs", r.cox_sd}}}};
}

// --------------------------------------------------------------------- tune

struct TuningRow {
  deeponet::HyperParams hyper;
  Index parameters = 0;
  Index epochs = 0;
  double valid_loss = 0.0;
  double test_loss = std::numeric_limits<double>::infinity();
  std::string status = "ok";
};

struct TuningResult {
  deeponet::HyperParams best;
  std::size_t best_row = 0;
  std::vector<TuningRow> table;
};

/// Grid search scored by test loss; ties go to the smaller network.
inline TuningResult run_tuning(const ExperimentConfig& cfg, const std::vector<SurvivalRecord>& train_set,
                               const std::vector<SurvivalRecord>& valid_set,
                               const std::vector<SurvivalRecord>& test_set, const Logger& log = {}) {
  cfg.validate();
  const bool cnn = cfg.variant == deeponet::BranchVariant::cnn;
  const std::vector<Index> one_filter{cfg.hyper.conv_filters}, one_pool{cfg.hyper.pool_size};
  const auto& filters = cnn ? cfg.tuning.conv_filters : one_filter;
  const auto& pools = cnn ? cfg.tuning.pool_size : one_pool;
  TuningResult res;
  for (Index m : cfg.tuning.m)
    for (Index nodes : cfg.tuning.nodes)
      for (Index nf : filters)
        for (Index pool : pools)
          for (double lr : cfg.tuning.learning_rate)
            for (Index bs : cfg.tuning.batch_size) {
              TuningRow row;
              row.hyper = cfg.hyper;
              row.hyper.m = m;
              row.hyper.nodes = nodes;
              row.hyper.conv_filters = nf;
              row.hyper.pool_size = pool;
              row.hyper.learning_rate = lr;
              row.hyper.batch_size = bs;
              const std::uint64_t seed = substream_seed(cfg.seed, "tune", res.table.size());
              try {
                auto tr = train(cfg.variant, row.hyper, train_set, valid_set, seed,
                                train_options(cfg, {}, ""));
                row.parameters = tr.model.net.parameter_count();
                row.epochs = static_cast<Index>(tr.trace.size());
                row.valid_loss = tr.best_valid_loss;
                if (tr.reason == StopReason::aborted) row.status = "aborted";
                row.test_loss = dataset_loss(tr.model, expand_dataset(test_set, tr.model.grid));
              } catch (const std::exception& e) {
                row.status = std::string("failed: ") + e.what();
              }
              log_to(log, "combination " + std::to_string(res.table.size() + 1) + " test loss " +
                              std::to_string(row.test_loss));
              res.table.push_back(row);
            }
  bool found = false;
  for (std::size_t i = 0; i < res.table.size(); ++i) {
    const auto& r = res.table[i];
    if (!std::isfinite(r.test_loss)) continue;
    const auto& b = res.table[res.best_row];
    if (!found || r.test_loss < b.test_loss ||
        (r.test_loss == b.test_loss && r.parameters < b.parameters)) {
      res.best_row = i;
      found = true;
    }
  }
  if (!found) throw DataError("tune: every combination failed");
  res.best = res.table[res.best_row].hyper;
  return res;
}

inline void write_tuning_table(std::ostream& os, const TuningResult& t) {
  os << "m,nodes,conv_filters,pool_size,learning_rate,batch_size,parameters,epochs,valid_loss,test_loss,status\n";
  for (const auto& r : t.table)
    os << r.hyper.m << ',' << r.hyper.nodes << ',' << r.hyper.conv_filters << ',' << r.hyper.pool_size
       << ',' << format_csv_real(r.hyper.learning_rate) << ',' << r.hyper.batch_size << ','
       << r.parameters << ',' << r.epochs << ',' << format_csv_real(r.valid_loss) << ','
       << format_csv_real(r.test_loss) << ',' << r.status << '\n';
}

// ----------------------------------------------------------------- contrast

struct ContrastPair {
  SurvivalCurve control;  // treatment covariate set to 0
  SurvivalCurve treated;  // treatment covariate set to 1
  std::optional<SurvivalCurve> true_control, true_treated;
};

/// Predicted curves for every covariate set with the treatment covariate
/// forced to 0 and to 1.
inline std::vector<ContrastPair> treatment_contrast(deeponet::SurvivalModel& model,
                                                    const std::vector<CovariateSet>& sets,
                                                    std::size_t treatment_index,
                                                    const simgen::SimConfig* sim = nullptr) {
  std::vector<ContrastPair> out;
  for (const auto& s : sets) {
    if (treatment_index >= s.ti.size()) throw DimensionError("contrast: treatment index out of range");
    auto ti0 = s.ti, ti1 = s.ti;
    ti0[treatment_index] = 0.0;
    ti1[treatment_index] = 1.0;
    ContrastPair p{predict_survival(model, s.tv, ti0), predict_survival(model, s.tv, ti1), {}, {}};
    if (sim) {
      p.true_control = simgen::true_survival(s.tv.front(), 0.0, s.latent.w, *sim);
      p.true_treated = simgen::true_survival(s.tv.front(), 1.0, s.latent.w, *sim);
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// covariate_set,treatment,t,S,truth
inline void write_contrast(std::ostream& os, const std::vector<ContrastPair>& pairs) {
  os << "covariate_set,treatment,t,S,truth\n";
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (int z = 0; z <= 1; ++z) {
      const auto& c = z ? pairs[i].treated : pairs[i].control;
      const auto& truth = z ? pairs[i].true_treated : pairs[i].true_control;
      for (std::size_t k = 0; k < c.times.size(); ++k)
        os << i + 1 << ',' << z << ',' << format_csv_real(c.times[k]) << ','
           << format_csv_real(c.values[k]) << ','
           << (truth ? format_csv_real(truth->at(c.times[k])) : std::string("NA")) << '\n';
    }
}

}  // namespace opsurv::harness

// opsurv: command-line front end for simulation, fitting and evaluation runs.
//
// Every subcommand reads one JSON config (optional) plus overrides and writes
// its artifacts into the configured output directory. Exit status: 0 success,
// 1 invalid input or configuration, 2 runtime failure.

#include "opsurv/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace opsurv;
using namespace opsurv::harness;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> variant;
  std::optional<std::string> data;
  bool quiet = false;
};

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "JSON experiment config");
  app->add_option("--set", c.sets, "override a config key, e.g. --set hyper.nodes=64")
      ->type_name("KEY=VALUE");
  app->add_option("--seed", c.seed, "root seed");
  app->add_option("-o,--out", c.out, "output directory");
  app->add_option("--variant", c.variant, "branch net: fnn or cnn");
  app->add_option("--data", c.data, "longitudinal CSV input");
  app->add_flag("-q,--quiet", c.quiet, "no progress output");
}

ExperimentConfig resolve(const Common& c) {
  json file = c.config_path.empty() ? json() : read_json_file(c.config_path);
  std::vector<std::string> overrides = c.sets;
  if (c.seed) overrides.push_back("seed=" + std::to_string(*c.seed));
  if (c.out) overrides.push_back("output_dir=" + json(*c.out).dump());
  if (c.variant) overrides.push_back("variant=" + json(*c.variant).dump());
  if (c.data) overrides.push_back("data.csv=" + json(*c.data).dump());
  ExperimentConfig cfg = merge_config(file, overrides);
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  std::ofstream(fs::path(cfg.output_dir) / "config.json") << to_json(cfg).dump(2) << '\n';
  return cfg;
}

Logger logger(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& m) { std::cerr << m << '\n'; };
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
  std::ofstream os(fs::path(cfg.output_dir) / name, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (fs::path(cfg.output_dir) / name).string());
  return os;
}

void write_json(const ExperimentConfig& cfg, const std::string& name, const json& j) {
  open_out(cfg, name) << j.dump(2) << '\n';
}

std::vector<SurvivalRecord> load_data(const ExperimentConfig& cfg, const Logger& log) {
  auto res = ingest_csv(cfg.data.csv, cfg.data);
  log_to(log, "ingested " + std::to_string(res.report.kept) + " of " +
                  std::to_string(res.report.subjects) + " subjects (" +
                  std::to_string(res.report.rows) + " rows)");
  for (const auto& e : res.report.excluded) log_to(log, "excluded " + e.id + ": " + e.reason);
  if (res.records.empty()) throw DataError("no usable subjects in " + cfg.data.csv);
  return std::move(res.records);
}

/// Training and validation records: a random split of the CSV when one is
/// configured, otherwise two independent simulated samples.
std::pair<std::vector<SurvivalRecord>, std::vector<SurvivalRecord>> train_valid(
    const ExperimentConfig& cfg, const Logger& log) {
  if (cfg.data.csv.empty())
    return {simgen::observed(simgen::gen_dataset(sim_with_seed(cfg, cfg.seed))),
            simgen::observed(simgen::gen_dataset(sim_with_seed(cfg, substream_seed(cfg.seed, "valid"))))};
  auto all = load_data(cfg, log);
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = substream(cfg.seed, "validation");
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto nv = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                               cfg.validation_fraction * static_cast<double>(all.size()))));
  std::vector<std::size_t> v(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nv));
  std::vector<std::size_t> t(idx.begin() + static_cast<std::ptrdiff_t>(nv), idx.end());
  std::sort(v.begin(), v.end());
  std::sort(t.begin(), t.end());
  return {evalmetrics::select(all, t), evalmetrics::select(all, v)};
}

int cmd_simulate(const Common& c) {
  const auto cfg = resolve(c);
  const auto sims = simgen::gen_dataset(sim_with_seed(cfg, cfg.seed));
  const auto recs = simgen::observed(sims);
  DataSpec spec;
  export_csv((fs::path(cfg.output_dir) / "data.csv").string(), recs, spec);
  auto truth = open_out(cfg, "truth.csv");
  export_truth(truth, sims);
  write_json(cfg, "simulate.json",
             {{"n", recs.size()}, {"censoring_fraction", simgen::censoring_fraction(sims)}});
  log_to(logger(c), "wrote " + std::to_string(recs.size()) + " subjects, censoring fraction " +
                        std::to_string(simgen::censoring_fraction(sims)));
  return 0;
}

int cmd_train(const Common& c) {
  const auto cfg = resolve(c);
  const auto log = logger(c);
  const auto [tr, va] = train_valid(cfg, log);
  auto res = train(cfg.variant, cfg.hyper, tr, va, cfg.seed, train_options(cfg, log, "train"));
  deeponet::save_model((fs::path(cfg.output_dir) / "model.txt").string(), res.model);
  const auto fit = coxtv::fit_cox(coxtv::cox_expand(tr, res.model.grid));
  coxtv::save_fit((fs::path(cfg.output_dir) / "cox.txt").string(), fit);
  auto trace = open_out(cfg, "train_log.csv");
  trace << "epoch,train_loss,valid_loss,improved\n";
  for (const auto& e : res.trace)
    trace << e.epoch << ',' << format_csv_real(e.train_loss) << ',' << format_csv_real(e.valid_loss)
          << ',' << (e.improved ? 1 : 0) << '\n';
  write_json(cfg, "train.json",
             {{"variant", deeponet::to_string(cfg.variant)},
              {"parameters", res.model.net.parameter_count()},
              {"epochs", res.trace.size()},
              {"best_epoch", res.best_epoch},
              {"best_valid_loss", res.best_valid_loss},
              {"stop_reason", to_string(res.reason)},
              {"message", res.message},
              {"grid", {{"m", res.model.grid.m()}, {"tau", res.model.grid.tau()}}},
              {"cox", {{"beta", std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size())},
                       {"iterations", fit.iterations}}}});
  if (res.reason == StopReason::aborted) throw RuntimeFailure(res.message);
  return 0;
}

int cmd_predict(const Common& c, const std::string& model_path, const std::string& cox_path) {
  const auto cfg = resolve(c);
  if (cfg.data.csv.empty()) throw ConfigError("predict needs --data");
  auto model = deeponet::load_model(model_path);
  std::optional<coxtv::CoxFit> fit;
  if (!cox_path.empty()) fit = coxtv::load_fit(cox_path);
  const auto recs = load_data(cfg, logger(c));
  auto os = open_out(cfg, "predictions.csv");
  os << "method,id,t,S\n";
  for (const auto& r : recs) {
    const auto curve = predict_survival(model, r.tv, r.ti);
    for (std::size_t k = 0; k < curve.size(); ++k)
      os << "deeponet," << r.id << ',' << format_csv_real(curve.times[k]) << ','
         << format_csv_real(curve.values[k]) << '\n';
    if (fit) {
      const auto cc = coxtv::cox_predict_survival(*fit, r.tv, r.ti, model.grid);
      for (std::size_t k = 0; k < cc.size(); ++k)
        os << "cox," << r.id << ',' << format_csv_real(cc.times[k]) << ','
           << format_csv_real(cc.values[k]) << '\n';
    }
  }
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& model_path, const std::string& cox_path) {
  const auto cfg = resolve(c);
  if (cfg.data.csv.empty()) throw ConfigError("evaluate needs --data");
  auto model = deeponet::load_model(model_path);
  const auto recs = load_data(cfg, logger(c));
  const double upper = std::min(resolve_tau_star(cfg, recs), model.grid.tau());
  const auto g = evalmetrics::km_censoring(recs);
  std::vector<SurvivalCurve> curves;
  for (const auto& r : recs) curves.push_back(predict_survival(model, r.tv, r.ti));
  const auto ibs = evalmetrics::integrated_brier(curves, recs, upper, g);
  json out{{"n", recs.size()},
           {"tau_star", upper},
           {"deeponet", {{"ibs", ibs.ibs}, {"upper", ibs.upper}, {"warning", ibs.warning}}}};
  if (!cox_path.empty()) {
    const auto fit = coxtv::load_fit(cox_path);
    std::vector<SurvivalCurve> cc;
    for (const auto& r : recs) cc.push_back(coxtv::cox_predict_survival(fit, r.tv, r.ti, model.grid));
    const auto ci = evalmetrics::integrated_brier(cc, recs, upper, g);
    out["cox"] = {{"ibs", ci.ibs}, {"upper", ci.upper}, {"warning", ci.warning}};
  }
  write_json(cfg, "evaluate.json", out);
  return 0;
}

int cmd_cv(const Common& c) {
  const auto cfg = resolve(c);
  const auto log = logger(c);
  const auto recs = cfg.data.csv.empty()
                        ? simgen::observed(simgen::gen_dataset(sim_with_seed(cfg, cfg.seed)))
                        : load_data(cfg, log);
  const auto rep = run_cv(cfg, recs, log);
  write_json(cfg, "cv.json", to_json(rep));
  return 0;
}

int cmd_tune(const Common& c) {
  const auto cfg = resolve(c);
  const auto log = logger(c);
  std::vector<SurvivalRecord> a, b, t;
  if (cfg.data.csv.empty()) {
    a = simgen::observed(simgen::gen_dataset(sim_with_seed(cfg, substream_seed(cfg.seed, "tune-train"))));
    b = simgen::observed(simgen::gen_dataset(sim_with_seed(cfg, substream_seed(cfg.seed, "tune-valid"))));
    t = simgen::observed(simgen::gen_dataset(sim_with_seed(cfg, substream_seed(cfg.seed, "tune-test"))));
  } else {
    const auto all = load_data(cfg, log);
    Rng rng = substream(cfg.seed, "tune-split");
    const auto parts = evalmetrics::kfold_split(all.size(), 3, rng);
    a = evalmetrics::select(all, parts.members(0));
    b = evalmetrics::select(all, parts.members(1));
    t = evalmetrics::select(all, parts.members(2));
  }
  const auto res = run_tuning(cfg, a, b, t, log);
  auto os = open_out(cfg, "tuning.csv");
  write_tuning_table(os, res);
  const auto& h = res.best;
  write_json(cfg, "tuning.json",
             {{"variant", deeponet::to_string(cfg.variant)},
              {"combinations", res.table.size()},
              {"best", {{"m", h.m},
                        {"nodes", h.nodes},
                        {"conv_filters", h.conv_filters},
                        {"pool_size", h.pool_size},
                        {"learning_rate", h.learning_rate},
                        {"batch_size", h.batch_size},
                        {"test_loss", res.table[res.best_row].test_loss}}}});
  return 0;
}

int cmd_replicate(const Common& c) {
  const auto cfg = resolve(c);
  const auto res = run_replications(cfg, logger(c));
  {
    auto os = open_out(cfg, "curves.csv");
    write_curves_long(os, res.tables);
  }
  {
    std::vector<SurvivalCurve> truth;
    for (const auto& s : res.sets) truth.push_back(*s.truth);
    auto os = open_out(cfg, "curve_summary.csv");
    write_curve_summary(os, res.tables, truth);
  }
  write_json(cfg, "replicate.json", to_json(res));
  if (!res.failures.empty())
    throw RuntimeFailure(std::to_string(res.failures.size()) + " replication job(s) failed");
  return 0;
}

int cmd_contrast(const Common& c, const std::string& model_path) {
  const auto cfg = resolve(c);
  auto model = deeponet::load_model(model_path);
  const auto& cols = cfg.data.ti_columns;
  const auto it = std::find(cols.begin(), cols.end(), cfg.data.treatment_column);
  if (it == cols.end())
    throw ConfigError("data.treatment_column '" + cfg.data.treatment_column +
                      "' is not among data.ti_columns");
  const auto sets = fixed_covariate_sets(cfg);
  const auto pairs = treatment_contrast(model, sets, static_cast<std::size_t>(it - cols.begin()), &cfg.sim);
  auto os = open_out(cfg, "contrast.csv");
  write_contrast(os, pairs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survival curves from covariate histories: DeepONet and Cox baselines"};
  app.require_subcommand(1);
  Common common;
  std::string model_path, cox_path;

  auto* sim = app.add_subcommand("simulate", "generate a simulated cohort as CSV");
  auto* trn = app.add_subcommand("train", "fit a DeepONet (and a Cox baseline)");
  auto* prd = app.add_subcommand("predict", "survival curves for every subject of a CSV");
  auto* evl = app.add_subcommand("evaluate", "integrated Brier score of saved models on a CSV");
  auto* cv = app.add_subcommand("cv", "k-fold cross-validated IBS, DeepONet vs Cox");
  auto* tun = app.add_subcommand("tune", "hyperparameter grid search");
  auto* rep = app.add_subcommand("replicate", "repeated simulation, curve tables for plotting");
  auto* con = app.add_subcommand("contrast", "treated vs control curves for the fixed covariate sets");
  for (auto* s : {sim, trn, prd, evl, cv, tun, rep, con}) add_common(s, common);
  for (auto* s : {prd, evl, con}) s->add_option("-m,--model", model_path, "saved model")->required();
  for (auto* s : {prd, evl}) s->add_option("--cox", cox_path, "saved Cox fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(common);
    if (trn->parsed()) return cmd_train(common);
    if (prd->parsed()) return cmd_predict(common, model_path, cox_path);
    if (evl->parsed()) return cmd_evaluate(common, model_path, cox_path);
    if (cv->parsed()) return cmd_cv(common);
    if (tun->parsed()) return cmd_tune(common);
    if (rep->parsed()) return cmd_replicate(common);
    if (con->parsed()) return cmd_contrast(common, model_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const IngestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

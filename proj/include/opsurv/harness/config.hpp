#pragma once

#include "opsurv/deeponet/hyper.hpp"
#include "opsurv/errors.hpp"
#include "opsurv/simgen/simgen.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace opsurv::harness {

using json = nlohmann::json;
using Index = Eigen::Index;

inline constexpr int kConfigVersion = 1;

/// Lists searched by `tune`; every combination is trained once.
struct TuningGrid {
  std::vector<Index> nodes{32, 64, 128, 256};
  std::vector<Index> conv_filters{16, 32, 64};
  std::vector<Index> pool_size{4, 8};
  std::vector<double> learning_rate{0.01, 0.001, 0.0001};
  std::vector<Index> batch_size{100, 500, 1000};
  std::vector<Index> m{100, 200, 300, 400, 500};

  std::size_t combinations(deeponet::BranchVariant v) const {
    std::size_t n = nodes.size() * learning_rate.size() * batch_size.size() * m.size();
    if (v == deeponet::BranchVariant::cnn) n *= conv_filters.size() * pool_size.size();
    return n;
  }
};

struct DataSpec {
  std::string csv;
  std::vector<std::string> tv_columns{"x"};
  std::vector<std::string> ti_columns{"z", "w"};
  /// Visit times are snapped to multiples of this step; 0 keeps them as given.
  double grid_step = 0.0;
  /// Binary covariate flipped by `contrast`.
  std::string treatment_column = "z";
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  deeponet::BranchVariant variant = deeponet::BranchVariant::cnn;
  simgen::SimConfig sim;
  std::optional<double> tau = 100.0;
  deeponet::HyperParams hyper;
  TuningGrid tuning;
  std::size_t replications = 10;
  std::size_t covariate_sets = 9;
  std::vector<std::string> methods{"fnn", "cnn", "cox"};
  int folds = 5;
  /// "q90" (90th percentile of observed times) or a fixed number.
  std::string tau_star = "q90";
  double validation_fraction = 0.2;
  DataSpec data;

  void validate() const;
};

namespace detail {

inline json batch_to_json(Index b) {
  if (b == std::numeric_limits<Index>::max()) return "full";
  return b;
}

inline Index batch_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "full") return std::numeric_limits<Index>::max();
    throw ConfigError("batch_size must be a positive integer or \"full\"");
  }
  return j.get<Index>();
}

/// Every key of `given` must exist in `schema`; objects are checked recursively.
inline void reject_unknown(const json& given, const json& schema, const std::string& path) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string where = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key())) throw ConfigError("unknown config key '" + where + "'");
    const json& s = schema.at(it.key());
    if (s.is_object() && it->is_object()) reject_unknown(*it, s, where);
  }
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  const auto& s = c.sim;
  const auto& h = c.hyper;
  const auto& t = c.tuning;
  json tuning_batch = json::array();
  for (Index b : t.batch_size) tuning_batch.push_back(detail::batch_to_json(b));
  return json{
      {"version", kConfigVersion},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"variant", deeponet::to_string(c.variant)},
      {"simulation",
       {{"n", s.n},
        {"ds", s.ds},
        {"tau", s.tau},
        {"hazard_scale", s.hazard_scale},
        {"w_coef", s.w_coef},
        {"z_coef", s.z_coef},
        {"linear_coef", s.linear_coef},
        {"quad_coef", s.quad_coef},
        {"censor_mean", s.censor_mean},
        {"censor_cap", s.censor_cap}}},
      {"grid", {{"m", h.m}, {"tau", c.tau ? json(*c.tau) : json(nullptr)}}},
      {"hyper",
       {{"nodes", h.nodes},
        {"conv_filters", h.conv_filters},
        {"pool_size", h.pool_size},
        {"kernel_width", h.kernel_width},
        {"learning_rate", h.learning_rate},
        {"batch_size", detail::batch_to_json(h.batch_size)},
        {"p", h.p},
        {"patience", h.patience},
        {"max_epochs", h.max_epochs},
        {"fnn_hidden_layers", h.fnn_hidden_layers},
        {"cnn_hidden_layers", h.cnn_hidden_layers}}},
      {"tuning",
       {{"nodes", t.nodes},
        {"conv_filters", t.conv_filters},
        {"pool_size", t.pool_size},
        {"learning_rate", t.learning_rate},
        {"batch_size", tuning_batch},
        {"m", t.m}}},
      {"replication",
       {{"count", c.replications}, {"covariate_sets", c.covariate_sets}, {"methods", c.methods}}},
      {"evaluation",
       {{"folds", c.folds},
        {"tau_star", c.tau_star},
        {"validation_fraction", c.validation_fraction}}},
      {"data",
       {{"csv", c.data.csv},
        {"tv_columns", c.data.tv_columns},
        {"ti_columns", c.data.ti_columns},
        {"grid_step", c.data.grid_step},
        {"treatment_column", c.data.treatment_column}}},
  };
}

/// Strict conversion: the document must already be a complete config (see
/// merge_config). Type mismatches surface as ConfigError.
inline ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.at("version").get<int>() != kConfigVersion)
      throw ConfigError("unsupported config version " + j.at("version").dump());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.variant = deeponet::parse_variant(j.at("variant").get<std::string>());
    const auto& s = j.at("simulation");
    c.sim.n = s.at("n").get<std::size_t>();
    c.sim.ds = s.at("ds").get<double>();
    c.sim.tau = s.at("tau").get<double>();
    c.sim.hazard_scale = s.at("hazard_scale").get<double>();
    c.sim.w_coef = s.at("w_coef").get<double>();
    c.sim.z_coef = s.at("z_coef").get<double>();
    c.sim.linear_coef = s.at("linear_coef").get<double>();
    c.sim.quad_coef = s.at("quad_coef").get<double>();
    c.sim.censor_mean = s.at("censor_mean").get<double>();
    c.sim.censor_cap = s.at("censor_cap").get<double>();
    c.sim.seed = c.seed;
    const auto& g = j.at("grid");
    c.hyper.m = g.at("m").get<Index>();
    // A JSON merge patch deletes keys set to null, so absence also means "from the data".
    c.tau = !g.contains("tau") || g.at("tau").is_null() ? std::nullopt : std::optional<double>(g.at("tau").get<double>());
    const auto& h = j.at("hyper");
    c.hyper.nodes = h.at("nodes").get<Index>();
    c.hyper.conv_filters = h.at("conv_filters").get<Index>();
    c.hyper.pool_size = h.at("pool_size").get<Index>();
    c.hyper.kernel_width = h.at("kernel_width").get<Index>();
    c.hyper.learning_rate = h.at("learning_rate").get<double>();
    c.hyper.batch_size = detail::batch_from_json(h.at("batch_size"));
    c.hyper.p = h.at("p").get<Index>();
    c.hyper.patience = h.at("patience").get<Index>();
    c.hyper.max_epochs = h.at("max_epochs").get<Index>();
    c.hyper.fnn_hidden_layers = h.at("fnn_hidden_layers").get<Index>();
    c.hyper.cnn_hidden_layers = h.at("cnn_hidden_layers").get<Index>();
    const auto& t = j.at("tuning");
    c.tuning.nodes = t.at("nodes").get<std::vector<Index>>();
    c.tuning.conv_filters = t.at("conv_filters").get<std::vector<Index>>();
    c.tuning.pool_size = t.at("pool_size").get<std::vector<Index>>();
    c.tuning.learning_rate = t.at("learning_rate").get<std::vector<double>>();
    c.tuning.batch_size.clear();
    for (const auto& b : t.at("batch_size")) c.tuning.batch_size.push_back(detail::batch_from_json(b));
    c.tuning.m = t.at("m").get<std::vector<Index>>();
    const auto& r = j.at("replication");
    c.replications = r.at("count").get<std::size_t>();
    c.covariate_sets = r.at("covariate_sets").get<std::size_t>();
    c.methods = r.at("methods").get<std::vector<std::string>>();
    const auto& e = j.at("evaluation");
    c.folds = e.at("folds").get<int>();
    c.tau_star = e.at("tau_star").is_number() ? e.at("tau_star").dump() : e.at("tau_star").get<std::string>();
    c.validation_fraction = e.at("validation_fraction").get<double>();
    const auto& d = j.at("data");
    c.data.csv = d.at("csv").get<std::string>();
    c.data.tv_columns = d.at("tv_columns").get<std::vector<std::string>>();
    c.data.ti_columns = d.at("ti_columns").get<std::vector<std::string>>();
    c.data.grid_step = d.at("grid_step").get<double>();
    c.data.treatment_column = d.at("treatment_column").get<std::string>();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  return c;
}

inline void ExperimentConfig::validate() const {
  sim.validate();
  hyper.validate();
  if (sim.n < 2) throw ConfigError("simulation.n must be >= 2");
  if (tau && !(*tau > 0.0)) throw ConfigError("grid.tau must be positive");
  if (replications < 1) throw ConfigError("replication.count must be >= 1");
  if (covariate_sets < 1) throw ConfigError("replication.covariate_sets must be >= 1");
  for (const auto& m : methods)
    if (m != "fnn" && m != "cnn" && m != "cox")
      throw ConfigError("replication.methods: unknown method '" + m + "'");
  if (folds < 2) throw ConfigError("evaluation.folds must be >= 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("evaluation.validation_fraction must lie in (0, 1)");
  if (tau_star != "q90") {
    char* end = nullptr;
    const double v = std::strtod(tau_star.c_str(), &end);
    if (end == tau_star.c_str() || *end != '\0' || !(v > 0.0))
      throw ConfigError("evaluation.tau_star must be \"q90\" or a positive number");
  }
  auto nonempty = [](const auto& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string("tuning.") + name + " must not be empty");
    for (auto x : v)
      if (!(x > 0)) throw ConfigError(std::string("tuning.") + name + " entries must be positive");
  };
  nonempty(tuning.nodes, "nodes");
  nonempty(tuning.conv_filters, "conv_filters");
  nonempty(tuning.pool_size, "pool_size");
  nonempty(tuning.learning_rate, "learning_rate");
  nonempty(tuning.batch_size, "batch_size");
  nonempty(tuning.m, "m");
  if (data.grid_step < 0.0) throw ConfigError("data.grid_step must be >= 0");
  if (!data.csv.empty() && !std::filesystem::exists(data.csv))
    throw ConfigError("data.csv: file not found: " + data.csv);
}

/// Parses `value` as JSON, falling back to a plain string.
inline json parse_override_value(const std::string& value) {
  try {
    return json::parse(value);
  } catch (const json::parse_error&) {
    return value;
  }
}

/// defaults <- file document <- `key.path=value` overrides, then strict parse.
inline ExperimentConfig merge_config(const json& file_doc,
                                     const std::vector<std::string>& overrides = {}) {
  json doc = to_json(ExperimentConfig{});
  const json schema = doc;
  if (!file_doc.is_null()) {
    if (!file_doc.is_object()) throw ConfigError("config file must hold a JSON object");
    detail::reject_unknown(file_doc, schema, "");
    if (file_doc.contains("version") && file_doc.at("version") != json(kConfigVersion))
      throw ConfigError("unsupported config version " + file_doc.at("version").dump());
    doc.merge_patch(file_doc);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    std::string pointer = "/" + key;
    for (auto& ch : pointer)
      if (ch == '.') ch = '/';
    const json::json_pointer ptr(pointer);
    if (!schema.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
    doc[ptr] = parse_override_value(o.substr(eq + 1));
  }
  return from_json(doc);
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

}  // namespace opsurv::harness

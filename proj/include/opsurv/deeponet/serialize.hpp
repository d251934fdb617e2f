#pragma once

#include "opsurv/deeponet/model.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

// Flat text model file. Line-oriented, every real printed with 17 significant
// digits so that write -> read -> write reproduces the file byte for byte:
//
//   opsurv-model 1
//   variant cnn
//   inputs <d_tv> <d_ti>
//   grid <m> <tau>
//   hyper <name> <value>          (one line per hyperparameter)
//   scale <name> <count> <values...>
//   tensor <name> <rows> <cols>   followed by <rows> lines of <cols> values
//   end

namespace opsurv::deeponet {

inline constexpr int kModelFormatVersion = 1;

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IngestError("model file: bad number '" + s + "'");
  return v;
}

inline void write_model(std::ostream& os, const SurvivalModel& model) {
  const auto& a = model.net.arch();
  const auto& h = a.hyper;
  os << "opsurv-model " << kModelFormatVersion << '\n';
  os << "variant " << to_string(a.variant) << '\n';
  os << "inputs " << a.d_tv << ' ' << a.d_ti << '\n';
  os << "grid " << model.grid.m() << ' ' << format_real(model.grid.tau()) << '\n';
  os << "hyper nodes " << h.nodes << '\n';
  os << "hyper conv_filters " << h.conv_filters << '\n';
  os << "hyper pool_size " << h.pool_size << '\n';
  os << "hyper kernel_width " << h.kernel_width << '\n';
  os << "hyper learning_rate " << format_real(h.learning_rate) << '\n';
  os << "hyper batch_size " << h.batch_size << '\n';
  os << "hyper m " << h.m << '\n';
  os << "hyper p " << h.p << '\n';
  os << "hyper patience " << h.patience << '\n';
  os << "hyper max_epochs " << h.max_epochs << '\n';
  os << "hyper fnn_hidden_layers " << h.fnn_hidden_layers << '\n';
  os << "hyper cnn_hidden_layers " << h.cnn_hidden_layers << '\n';
  auto vec = [&os](const char* name, const Vector& v) {
    os << "scale " << name << ' ' << v.size();
    for (Index i = 0; i < v.size(); ++i) os << ' ' << format_real(v(i));
    os << '\n';
  };
  vec("tv_mean", model.scale.tv_mean);
  vec("tv_sd", model.scale.tv_sd);
  vec("ti_mean", model.scale.ti_mean);
  vec("ti_sd", model.scale.ti_sd);
  for (const auto& t : model.net.tensors()) {
    os << "tensor " << t.name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (Index r = 0; r < t.rows(); ++r) {
      for (Index c = 0; c < t.cols(); ++c) {
        if (c) os << ' ';
        os << format_real(t.value(r, c));
      }
      os << '\n';
    }
  }
  os << "end\n";
}

inline SurvivalModel read_model(std::istream& is) {
  auto fail = [](const std::string& what) -> void {
    throw IngestError("model file: " + what);
  };
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != "opsurv-model") fail("missing header");
  if (version != kModelFormatVersion) fail("unsupported version " + std::to_string(version));

  Architecture arch;
  Index m = 0;
  std::string tau_s, variant;
  Index d_tv = 0, d_ti = 0;
  if (!(is >> word >> variant) || word != "variant") fail("expected variant");
  if (!(is >> word >> d_tv >> d_ti) || word != "inputs") fail("expected inputs");
  if (!(is >> word >> m >> tau_s) || word != "grid") fail("expected grid");
  arch.variant = parse_variant(variant);
  arch.d_tv = d_tv;
  arch.d_ti = d_ti;

  Standardizer scale = Standardizer::identity(d_tv, d_ti);
  std::vector<std::tuple<std::string, Index, Index, std::vector<double>>> tensors;
  while (is >> word) {
    if (word == "end") break;
    if (word == "hyper") {
      std::string name, value;
      is >> name >> value;
      auto& h = arch.hyper;
      if (name == "learning_rate") {
        h.learning_rate = parse_real(value);
        continue;
      }
      const Index v = std::stol(value);
      if (name == "nodes") h.nodes = v;
      else if (name == "conv_filters") h.conv_filters = v;
      else if (name == "pool_size") h.pool_size = v;
      else if (name == "kernel_width") h.kernel_width = v;
      else if (name == "batch_size") h.batch_size = v;
      else if (name == "m") h.m = v;
      else if (name == "p") h.p = v;
      else if (name == "patience") h.patience = v;
      else if (name == "max_epochs") h.max_epochs = v;
      else if (name == "fnn_hidden_layers") h.fnn_hidden_layers = v;
      else if (name == "cnn_hidden_layers") h.cnn_hidden_layers = v;
      else fail("unknown hyperparameter " + name);
    } else if (word == "scale") {
      std::string name;
      Index n = 0;
      is >> name >> n;
      Vector v(n);
      for (Index i = 0; i < n; ++i) {
        std::string tok;
        is >> tok;
        v(i) = parse_real(tok);
      }
      if (name == "tv_mean") scale.tv_mean = v;
      else if (name == "tv_sd") scale.tv_sd = v;
      else if (name == "ti_mean") scale.ti_mean = v;
      else if (name == "ti_sd") scale.ti_sd = v;
      else fail("unknown scale vector " + name);
    } else if (word == "tensor") {
      std::string name;
      Index rows = 0, cols = 0;
      is >> name >> rows >> cols;
      std::vector<double> values(static_cast<std::size_t>(rows * cols));
      for (auto& v : values) {
        std::string tok;
        if (!(is >> tok)) fail("truncated tensor " + name);
        v = parse_real(tok);
      }
      tensors.emplace_back(name, rows, cols, std::move(values));
    } else {
      fail("unexpected token '" + word + "'");
    }
  }
  if (word != "end") fail("missing end marker");

  Rng dummy(0);
  SurvivalModel model{DeepONet(arch, dummy), scale, TimeGrid::even(parse_real(tau_s), m)};
  if (tensors.size() != model.net.tensors().size()) fail("tensor count does not match architecture");
  for (auto& [name, rows, cols, values] : tensors) {
    auto& t = model.net.tensor(name);
    if (t.rows() != rows || t.cols() != cols) fail("tensor " + name + " has wrong shape");
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) t.value(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  }
  return model;
}

inline void save_model(const std::string& path, const SurvivalModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IngestError("cannot write model file " + path);
  write_model(os, model);
}

inline SurvivalModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestError("cannot read model file " + path);
  return read_model(is);
}

}  // namespace opsurv::deeponet

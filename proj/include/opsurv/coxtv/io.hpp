#pragma once

#include "opsurv/coxtv/cox.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

// Flat text Cox fit:
//   opsurv-cox 1
//   beta <p> <values...>
//   iterations <k>
//   gradient_norm <value>
//   baseline <count>
//   <event time> <dLambda0> <Lambda0>     (count lines, ascending time)
//   end

namespace opsurv::coxtv {

namespace detail {
inline std::string real17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_fit(std::ostream& os, const CoxFit& fit) {
  os << "opsurv-cox 1\n";
  os << "beta " << fit.beta.size();
  for (Index i = 0; i < fit.beta.size(); ++i) os << ' ' << detail::real17(fit.beta(i));
  os << "\niterations " << fit.iterations << '\n';
  os << "gradient_norm " << detail::real17(fit.gradient_norm) << '\n';
  os << "baseline " << fit.event_times.size() << '\n';
  for (std::size_t e = 0; e < fit.event_times.size(); ++e)
    os << detail::real17(fit.event_times[e]) << ' ' << detail::real17(fit.hazard_jumps[e]) << ' '
       << detail::real17(fit.cumulative[e]) << '\n';
  os << "end\n";
}

inline CoxFit read_fit(std::istream& is) {
  auto fail = [](const std::string& what) { throw IngestError("cox fit file: " + what); };
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != "opsurv-cox" || version != 1) fail("bad header");
  CoxFit fit;
  Index p = 0;
  if (!(is >> word >> p) || word != "beta") fail("expected beta");
  fit.beta.resize(p);
  for (Index i = 0; i < p; ++i) {
    std::string t;
    is >> t;
    fit.beta(i) = std::strtod(t.c_str(), nullptr);
  }
  std::string g;
  if (!(is >> word >> fit.iterations) || word != "iterations") fail("expected iterations");
  if (!(is >> word >> g) || word != "gradient_norm") fail("expected gradient_norm");
  fit.gradient_norm = std::strtod(g.c_str(), nullptr);
  std::size_t count = 0;
  if (!(is >> word >> count) || word != "baseline") fail("expected baseline");
  for (std::size_t e = 0; e < count; ++e) {
    std::string a, b, c;
    if (!(is >> a >> b >> c)) fail("truncated baseline");
    fit.event_times.push_back(std::strtod(a.c_str(), nullptr));
    fit.hazard_jumps.push_back(std::strtod(b.c_str(), nullptr));
    fit.cumulative.push_back(std::strtod(c.c_str(), nullptr));
  }
  if (!(is >> word) || word != "end") fail("missing end marker");
  return fit;
}

inline void save_fit(const std::string& path, const CoxFit& fit) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IngestError("cannot write " + path);
  write_fit(os, fit);
}

inline CoxFit load_fit(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestError("cannot read " + path);
  return read_fit(is);
}

}  // namespace opsurv::coxtv

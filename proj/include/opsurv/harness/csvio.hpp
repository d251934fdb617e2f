#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/harness/config.hpp"
#include "opsurv/simgen/simgen.hpp"
#include "opsurv/survloss/record.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

// Longitudinal CSV, one row per (subject, visit):
//   id,visit_time,event_time,event_indicator,<tv columns...>,<ti columns...>
// Empty, NA or nan cells are missing values.

namespace opsurv::harness {

struct Exclusion {
  std::string id;
  std::string reason;
};

struct IngestReport {
  std::size_t rows = 0;
  std::size_t subjects = 0;
  std::size_t kept = 0;
  std::vector<Exclusion> excluded;
};

struct IngestResult {
  std::vector<SurvivalRecord> records;
  IngestReport report;
};

inline std::string format_csv_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_cell(const std::string& cell, std::size_t line,
                                        const std::string& column) {
  if (cell.empty() || cell == "NA" || cell == "na" || cell == "nan" || cell == "NaN")
    return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
    throw IngestError("line " + std::to_string(line) + ": column " + column + ": bad number '" +
                      cell + "'");
  return v;
}

struct Visit {
  double time = 0.0;
  std::vector<std::optional<double>> tv;
  std::vector<std::optional<double>> ti;
};

struct SubjectRows {
  std::string id;
  double y = 0.0;
  int delta = 0;
  std::size_t first_line = 0;
  std::vector<Visit> visits;
};

}  // namespace detail

/// Reads the CSV, snaps visits to `spec.grid_step` (when positive) and
/// forward-fills missing interim values. Subjects without a usable baseline
/// are excluded and listed in the report; malformed rows are errors.
inline IngestResult ingest_csv(std::istream& is, const DataSpec& spec) {
  std::string line;
  if (!std::getline(is, line)) throw IngestError("line 1: missing header row");
  const auto header = detail::split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw IngestError("line 1: header lacks column '" + name + "'");
    return it->second;
  };
  const std::size_t c_id = need("id"), c_visit = need("visit_time"), c_event = need("event_time"),
                    c_delta = need("event_indicator");
  std::vector<std::size_t> c_tv, c_ti;
  for (const auto& n : spec.tv_columns) c_tv.push_back(need(n));
  for (const auto& n : spec.ti_columns) c_ti.push_back(need(n));

  IngestResult res;
  std::vector<detail::SubjectRows> subjects;
  std::map<std::string, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw IngestError("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields, found " +
                        std::to_string(cells.size()));
    ++res.report.rows;
    const std::string& id = cells[c_id];
    if (id.empty()) throw IngestError("line " + std::to_string(lineno) + ": empty id");
    const auto visit = detail::parse_cell(cells[c_visit], lineno, "visit_time");
    const auto y = detail::parse_cell(cells[c_event], lineno, "event_time");
    const auto d = detail::parse_cell(cells[c_delta], lineno, "event_indicator");
    if (!visit || !y || !d)
      throw IngestError("line " + std::to_string(lineno) +
                        ": visit_time, event_time and event_indicator are required");
    if (*d != 0.0 && *d != 1.0)
      throw IngestError("line " + std::to_string(lineno) + ": event_indicator must be 0 or 1");
    if (*y < 0.0 || *visit < 0.0)
      throw IngestError("line " + std::to_string(lineno) + ": negative time");

    auto [it, fresh] = index.try_emplace(id, subjects.size());
    if (fresh) subjects.push_back({id, *y, static_cast<int>(*d), lineno, {}});
    auto& s = subjects[it->second];
    if (s.y != *y || s.delta != static_cast<int>(*d))
      throw IngestError("line " + std::to_string(lineno) + ": subject " + id +
                        " has event_time/event_indicator differing from line " +
                        std::to_string(s.first_line));
    detail::Visit v;
    v.time = *visit;
    for (std::size_t k = 0; k < c_tv.size(); ++k)
      v.tv.push_back(detail::parse_cell(cells[c_tv[k]], lineno, spec.tv_columns[k]));
    for (std::size_t k = 0; k < c_ti.size(); ++k)
      v.ti.push_back(detail::parse_cell(cells[c_ti[k]], lineno, spec.ti_columns[k]));
    s.visits.push_back(std::move(v));
  }
  res.report.subjects = subjects.size();

  for (auto& s : subjects) {
    auto& visits = s.visits;
    std::erase_if(visits, [&](const detail::Visit& v) { return v.time > s.y + time_tolerance(s.y); });
    if (visits.empty()) {
      res.report.excluded.push_back({s.id, "no visit at or before the observed time"});
      continue;
    }
    std::stable_sort(visits.begin(), visits.end(),
                     [](const auto& a, const auto& b) { return a.time < b.time; });
    if (spec.grid_step > 0.0)
      for (auto& v : visits) v.time = std::round(v.time / spec.grid_step) * spec.grid_step;

    const auto& base = visits.front();
    std::string missing;
    for (std::size_t k = 0; k < c_tv.size() && missing.empty(); ++k)
      if (!base.tv[k]) missing = spec.tv_columns[k];
    for (std::size_t k = 0; k < c_ti.size() && missing.empty(); ++k)
      if (!base.ti[k]) missing = spec.ti_columns[k];
    if (!missing.empty()) {
      res.report.excluded.push_back({s.id, "missing baseline value of " + missing});
      continue;
    }

    SurvivalRecord r;
    r.id = s.id;
    r.y = s.y;
    r.delta = s.delta;
    for (std::size_t k = 0; k < c_ti.size(); ++k) r.ti.push_back(*base.ti[k]);
    for (std::size_t k = 0; k < c_tv.size(); ++k) {
      // Observed (time, value) pairs; a later visit snapped onto the same time wins.
      std::vector<std::pair<double, double>> obs;
      for (const auto& v : visits) {
        if (!v.tv[k]) continue;
        if (!obs.empty() && std::abs(obs.back().first - v.time) <= time_tolerance(v.time))
          obs.back().second = *v.tv[k];
        else
          obs.emplace_back(v.time, *v.tv[k]);
      }
      // The baseline visit anchors the time origin.
      obs.front().first = std::min(obs.front().first, 0.0);
      StepPath p;
      if (spec.grid_step > 0.0) {
        const auto n = static_cast<std::size_t>(std::floor(s.y / spec.grid_step + 1e-9));
        std::size_t next = 0;
        double current = obs.front().second;
        for (std::size_t g = 0; g <= n; ++g) {
          const double t = static_cast<double>(g) * spec.grid_step;
          while (next < obs.size() && obs[next].first <= t + time_tolerance(t))
            current = obs[next++].second;
          p.times.push_back(t);
          p.values.push_back(current);
        }
      } else {
        for (const auto& [t, v] : obs) {
          p.times.push_back(t);
          p.values.push_back(v);
        }
      }
      r.tv.push_back(std::move(p));
    }
    res.records.push_back(std::move(r));
  }
  res.report.kept = res.records.size();
  return res;
}

inline IngestResult ingest_csv(const std::string& path, const DataSpec& spec) {
  std::ifstream is(path);
  if (!is) throw IngestError("cannot open data file " + path);
  return ingest_csv(is, spec);
}

/// Inverse of ingest_csv with grid_step = 0: one row per sensor time of the
/// union of the subject's paths.
inline void export_csv(std::ostream& os, const std::vector<SurvivalRecord>& records,
                       const DataSpec& spec) {
  os << "id,visit_time,event_time,event_indicator";
  for (const auto& c : spec.tv_columns) os << ',' << c;
  for (const auto& c : spec.ti_columns) os << ',' << c;
  os << '\n';
  for (const auto& r : records) {
    if (r.tv.size() != spec.tv_columns.size() || r.ti.size() != spec.ti_columns.size())
      throw DimensionError("export_csv: subject " + r.id + " does not match the column lists");
    std::vector<double> times;
    for (const auto& p : r.tv) times.insert(times.end(), p.times.begin(), p.times.end());
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    if (times.empty()) times.push_back(0.0);
    for (double t : times) {
      os << r.id << ',' << format_csv_real(t) << ',' << format_csv_real(r.y) << ',' << r.delta;
      for (const auto& p : r.tv) {
        const auto v = p.value_at(t);
        os << ',' << (v ? format_csv_real(*v) : std::string("NA"));
      }
      for (double v : r.ti) os << ',' << format_csv_real(v);
      os << '\n';
    }
  }
}

inline void export_csv(const std::string& path, const std::vector<SurvivalRecord>& records,
                       const DataSpec& spec) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IngestError("cannot write " + path);
  export_csv(os, records, spec);
}

/// Latent simulation draws per subject, enough to rebuild every true curve.
inline void export_truth(std::ostream& os, const std::vector<simgen::SimRecord>& sims) {
  os << "id,alpha1,alpha2,alpha3,alpha4,alpha5,z,w,u,failure_time,censoring_time\n";
  for (const auto& s : sims) {
    os << s.observed.id;
    for (double a : s.cov.alpha) os << ',' << format_csv_real(a);
    os << ',' << format_csv_real(s.cov.z) << ',' << format_csv_real(s.cov.w) << ','
       << format_csv_real(s.u) << ',' << format_csv_real(s.t) << ',' << format_csv_real(s.c)
       << '\n';
  }
}

}  // namespace opsurv::harness

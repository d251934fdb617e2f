#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/rng.hpp"
#include "opsurv/survloss/curve.hpp"
#include "opsurv/survloss/record.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace opsurv::simgen {

/// Simulation design: Fourier covariate path on a fine grid, hazard
/// scale * exp(w_coef*w + z_coef*z + linear_coef * sum x ds + quad_coef * z * sum x^2 ds),
/// Exponential(mean) censoring capped at `censor_cap`.
struct SimConfig {
  std::size_t n = 2000;
  double ds = 0.1;
  double tau = 100.0;
  double hazard_scale = 0.05;
  double w_coef = 1.0;
  double z_coef = 1.0;
  double linear_coef = 0.01;
  double quad_coef = 0.01;
  double censor_mean = 50.0;
  double censor_cap = 99.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(ds > 0.0)) throw ConfigError("simulation step ds must be positive");
    if (!(tau > 0.0)) throw ConfigError("simulation tau must be positive");
    if (!(hazard_scale > 0.0)) throw ConfigError("hazard scale must be positive");
    if (!(censor_mean > 0.0)) throw ConfigError("censoring mean must be positive");
    if (!(censor_cap > 0.0)) throw ConfigError("censoring cap must be positive");
  }

  std::size_t fine_points() const { return static_cast<std::size_t>(std::llround(tau / ds)) + 1; }
  double fine_time(std::size_t k) const { return static_cast<double>(k) * ds; }
};

/// Latent covariate draw for one subject.
struct Covariates {
  std::array<double, 5> alpha{};
  double z = 0.0;
  double w = 0.0;
};

struct SimRecord {
  SurvivalRecord observed;  // path truncated at y
  Covariates cov;
  double u = 0.0;
  double t = 0.0;
  double c = 0.0;
  StepPath full_path;       // on the whole fine grid
  SurvivalCurve truth;      // true S on the fine grid
};

/// X(t) = a1 + a2 sin(2 pi t/tau) + a3 cos(2 pi t/tau) + a4 sin(4 pi t/tau) + a5 cos(4 pi t/tau)
inline double fourier_value(const std::array<double, 5>& a, double t, double tau) {
  const double w = 2.0 * std::numbers::pi * t / tau;
  return a[0] + a[1] * std::sin(w) + a[2] * std::cos(w) + a[3] * std::sin(2.0 * w) +
         a[4] * std::cos(2.0 * w);
}

inline StepPath path_from_alpha(const std::array<double, 5>& alpha, const SimConfig& cfg) {
  StepPath p;
  const std::size_t n = cfg.fine_points();
  p.times.reserve(n);
  p.values.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = cfg.fine_time(k);
    p.times.push_back(t);
    p.values.push_back(fourier_value(alpha, t, cfg.tau));
  }
  return p;
}

inline Covariates draw_covariates(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Covariates c;
  for (auto& a : c.alpha) a = unif(rng);
  c.z = coin(rng) ? 1.0 : 0.0;
  c.w = normal(rng);
  return c;
}

/// Covariate path with alpha_k ~ U(0,1), sampled on {0, ds, ..., tau}.
inline StepPath gen_covariate_path(Rng& rng, const SimConfig& cfg = {}) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<double, 5> alpha{};
  for (auto& a : alpha) a = unif(rng);
  return path_from_alpha(alpha, cfg);
}

/// Hazard at every fine-grid point; the cumulative sums include s = t.
inline std::vector<double> true_hazard(const StepPath& path, double z, double w,
                                       const SimConfig& cfg = {}) {
  std::vector<double> lambda(path.values.size());
  double lin = 0.0, quad = 0.0;
  for (std::size_t k = 0; k < path.values.size(); ++k) {
    const double x = path.values[k];
    lin += x * cfg.ds;
    quad += x * x * z * cfg.ds;
    lambda[k] = cfg.hazard_scale *
                std::exp(cfg.w_coef * w + cfg.z_coef * z + cfg.linear_coef * lin + cfg.quad_coef * quad);
  }
  return lambda;
}

/// Hazard at a single fine-grid time t.
inline double true_hazard(const StepPath& path, double z, double w, double t,
                          const SimConfig& cfg = {}) {
  const auto lambda = true_hazard(path, z, w, cfg);
  const auto k = static_cast<std::size_t>(std::llround(t / cfg.ds));
  if (k >= lambda.size()) throw ParameterError("true_hazard: t outside the fine grid");
  return lambda[k];
}

/// Lambda(t) = ds * sum_{s<=t} lambda(s), S(t) = exp(-Lambda(t)) on the fine grid.
inline SurvivalCurve true_survival(const StepPath& path, double z, double w,
                                   const SimConfig& cfg = {}) {
  const auto lambda = true_hazard(path, z, w, cfg);
  std::vector<double> cum(lambda.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    acc += cfg.ds * lambda[k];
    cum[k] = acc;
  }
  return SurvivalCurve::from_cumulative_hazard(path.times, cum);
}

/// T = sup{t on the grid : S(t) >= u}, taking S(0-) = 1 so T = 0 when S(0) < u.
inline double failure_time_for(const SurvivalCurve& curve, double u) {
  double t = 0.0;
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    if (curve.values[k] >= u) t = curve.times[k];
    else break;
  }
  return t;
}

inline double sample_failure(Rng& rng, const SurvivalCurve& curve) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return failure_time_for(curve, unif(rng));
}

/// C = min(E, cap) with E exponential of the configured mean.
inline double sample_censoring(Rng& rng, const SimConfig& cfg = {}) {
  std::exponential_distribution<double> expo(1.0 / cfg.censor_mean);
  return std::min(expo(rng), cfg.censor_cap);
}

inline std::string subject_id(std::size_t i) { return "s" + std::to_string(i + 1); }

/// One subject from its own substream. The failure draw and the censoring draw
/// use separate streams, so C is independent of T given the covariates.
inline SimRecord gen_subject(const SimConfig& cfg, std::uint64_t stream_seed, std::size_t index) {
  Rng cov_rng = substream(stream_seed, "covariates", index);
  Rng fail_rng = substream(stream_seed, "failure", index);
  Rng cens_rng = substream(stream_seed, "censoring", index);

  SimRecord r;
  r.cov = draw_covariates(cov_rng);
  r.full_path = path_from_alpha(r.cov.alpha, cfg);
  r.truth = true_survival(r.full_path, r.cov.z, r.cov.w, cfg);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  r.u = unif(fail_rng);
  r.t = failure_time_for(r.truth, r.u);
  r.c = sample_censoring(cens_rng, cfg);

  auto& obs = r.observed;
  obs.id = subject_id(index);
  obs.delta = r.t <= r.c ? 1 : 0;
  obs.y = obs.delta ? r.t : r.c;
  obs.tv = {r.full_path.truncated(obs.y)};
  obs.ti = {r.cov.z, r.cov.w};
  return r;
}

/// n i.i.d. subjects, deterministic given cfg.seed.
inline std::vector<SimRecord> gen_dataset(const SimConfig& cfg) {
  cfg.validate();
  const std::uint64_t stream_seed = substream_seed(cfg.seed, "simdata");
  std::vector<SimRecord> out;
  out.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) out.push_back(gen_subject(cfg, stream_seed, i));
  return out;
}

inline std::vector<SurvivalRecord> observed(const std::vector<SimRecord>& sims) {
  std::vector<SurvivalRecord> out;
  out.reserve(sims.size());
  for (const auto& s : sims) out.push_back(s.observed);
  return out;
}

inline double censoring_fraction(const std::vector<SimRecord>& sims) {
  if (sims.empty()) return 0.0;
  double c = 0.0;
  for (const auto& s : sims) c += s.observed.delta == 0 ? 1.0 : 0.0;
  return c / static_cast<double>(sims.size());
}

}  // namespace opsurv::simgen

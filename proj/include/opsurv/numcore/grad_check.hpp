#pragma once

#include "opsurv/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>

namespace opsurv::numcore {

/// Loss value plus the activation-pattern fingerprint of the forward pass that
/// produced it (see Tape::pattern).
struct LossProbe {
  double loss = 0.0;
  std::uint64_t pattern = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  Index checked = 0;
  Index skipped = 0;
  std::string worst;
};

struct GradCheckOptions {
  double eps = 1e-6;
  /// Denominator floor: |g - fd| / max(|g|, |fd|, floor). Central differences
  /// at eps = 1e-6 carry ~1e-10 round-off, so partials below the floor are
  /// compared on an absolute scale.
  double floor = 1e-4;
  /// Times eps is shrunk tenfold when a perturbation crosses a ReLU or argmax
  /// kink before the coordinate is skipped.
  int max_nudges = 3;
};

namespace detail {

template <class F>
LossProbe probe(F& f) {
  if constexpr (std::is_convertible_v<std::invoke_result_t<F&>, double>) {
    return LossProbe{static_cast<double>(f()), 0};
  } else {
    return f();
  }
}

}  // namespace detail

/// Compares every analytic partial already stored in params[i]->grad against
/// the central difference (f(theta + eps) - f(theta - eps)) / 2 eps. `f` returns
/// either a double or a LossProbe; with a probe, coordinates whose perturbation
/// changes the activation pattern are retried with a smaller eps.
template <class F>
GradCheckReport grad_check(F&& f, const ParamList& params, GradCheckOptions opt = {}) {
  GradCheckReport report;
  const LossProbe base = detail::probe(f);
  for (auto* p : params) {
    for (Index i = 0; i < p->size(); ++i) {
      double& theta = p->value.data()[i];
      const double saved = theta;
      double eps = opt.eps;
      bool ok = false;
      double fd = 0.0;
      for (int attempt = 0; attempt <= opt.max_nudges; ++attempt, eps /= 10.0) {
        theta = saved + eps;
        const LossProbe up = detail::probe(f);
        theta = saved - eps;
        const LossProbe down = detail::probe(f);
        theta = saved;
        if (up.pattern == base.pattern && down.pattern == base.pattern) {
          fd = (up.loss - down.loss) / (2.0 * eps);
          ok = true;
          break;
        }
      }
      if (!ok) {
        ++report.skipped;
        continue;
      }
      const double g = p->grad.data()[i];
      const double denom = std::max({std::abs(g), std::abs(fd), opt.floor});
      const double rel = std::abs(g - fd) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace opsurv::numcore

#pragma once

// Estimation pipelines that turn observed counts into per-item predictive demand pmfs.

#include <optional>
#include <string_view>

#include "ebinv/newsvendor.hpp"
#include "ebinv/posterior_f.hpp"
#include "ebinv/posterior_g.hpp"

namespace ebinv {

enum class Method { naive, plugin, f_full, g };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::naive: return "naive";
    case Method::plugin: return "plugin";
    case Method::f_full: return "f-full";
    case Method::g: return "g";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::naive, Method::plugin, Method::f_full, Method::g})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected naive, plugin, f-full or g)");
}

struct MethodOptions {
  /// Marginal used by plugin and f-full; spline by default.
  MarginalKind marginal = MarginalKind::spline;
  SplineFitOptions spline;
  NpmleOptions npmle;
  GeneralizedRobbinsOptions robbins;
};

/// A fitted estimator, ready to produce predictive pmfs for any observed count.
struct FittedMethod {
  Method method = Method::naive;
  double horizon = 1.0;
  std::optional<MarginalEstimate> marginal;
  std::optional<NpmleFit> npmle;
  GeneralizedRobbinsOptions robbins;

  /// Predictive pmf of next-interval demand for an item with count x, truncated at k_max.
  DemandPmf predictive(std::int64_t x, std::int64_t k_max) const {
    switch (method) {
      case Method::naive: return DemandPmf::poisson(static_cast<double>(x) / horizon, k_max);
      case Method::plugin: return plugin_posterior_pmf(*marginal, x, k_max);
      case Method::f_full: return sanitized_robbins_pmf(*marginal, x, k_max, robbins);
      case Method::g: return mixture_posterior_pmf(npmle->mixture, x, horizon, k_max);
    }
    throw ConfigError("unknown method");
  }
};

inline FittedMethod fit_method(Method method, const CountHistogram& hist, const MethodOptions& opts = {}) {
  if (hist.empty()) throw DataError("no observations to fit");
  FittedMethod f;
  f.method = method;
  f.horizon = hist.horizon();
  f.robbins = opts.robbins;
  if (method == Method::plugin || method == Method::f_full) {
    if (opts.marginal == MarginalKind::empirical) f.marginal = MarginalEstimate::empirical(hist);
    else if (opts.marginal == MarginalKind::spline) f.marginal = fit_spline_marginal(hist, opts.spline);
    else throw ConfigError("the exact marginal is not estimable from data");
  } else if (method == Method::g) {
    f.npmle = fit_npmle(hist, opts.npmle);
  }
  return f;
}

}  // namespace ebinv

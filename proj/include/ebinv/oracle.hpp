#pragma once

// Reference values: gamma-Poisson conjugate formulas and direct finite-mixture evaluation.
//
// Negative-binomial convention: NB(a, p) has pmf Gamma(s+a)/(Gamma(a) s!) p^a (1-p)^s.
// Under lambda ~ Gamma(alpha, theta) and X ~ Poisson(lambda T), X ~ NB(alpha, 1/(1+theta T)).

#include "ebinv/priors.hpp"

namespace ebinv {

inline double nb_log_pmf(double size, double p, std::int64_t s) {
  if (s < 0) return kNegInf;
  const double sd = static_cast<double>(s);
  return std::lgamma(sd + size) - std::lgamma(size) - std::lgamma(sd + 1.0) + size * std::log(p) +
         sd * std::log1p(-p);
}

inline double nb_marginal(const GammaPrior& prior, std::int64_t s, double horizon = 1.0) {
  prior.validate();
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  return std::exp(nb_log_pmf(prior.shape, 1.0 / (1.0 + prior.scale * horizon), s));
}

/// nb_marginal for s = 0..s_max by the ratio recurrence f(s+1) = f(s) (s+alpha)/(s+1) (1-p).
inline std::vector<double> nb_marginal_table(const GammaPrior& prior, std::int64_t s_max, double horizon = 1.0) {
  prior.validate();
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  const double p = 1.0 / (1.0 + prior.scale * horizon);
  const double q = prior.scale * horizon / (1.0 + prior.scale * horizon);
  std::vector<double> f(static_cast<std::size_t>(s_max) + 1);
  f[0] = std::pow(p, prior.shape);
  for (std::int64_t s = 0; s < s_max; ++s)
    f[static_cast<std::size_t>(s + 1)] =
        f[static_cast<std::size_t>(s)] * (static_cast<double>(s) + prior.shape) / static_cast<double>(s + 1) * q;
  return f;
}

/// Posterior of lambda given X: Gamma(alpha + X, theta / (1 + theta T)).
inline GammaPrior gamma_posterior(const GammaPrior& prior, std::int64_t x, double horizon = 1.0) {
  prior.validate();
  if (x < 0) throw DataError("count must be non-negative");
  return {prior.shape + static_cast<double>(x), prior.scale / (1.0 + prior.scale * horizon)};
}

/// P(xi = k | X = x) for next-interval demand xi ~ Poisson(lambda).
inline double nb_posterior_pmf(const GammaPrior& prior, std::int64_t x, std::int64_t k, double horizon = 1.0) {
  return nb_marginal(gamma_posterior(prior, x, horizon), k, 1.0);
}

inline double nb_posterior_mean(const GammaPrior& prior, std::int64_t x, double horizon = 1.0) {
  return gamma_posterior(prior, x, horizon).mean();
}

namespace detail {

// log(lambda^e) with 0^0 = 1.
inline double log_power(double lambda, double e) {
  if (e == 0.0) return 0.0;
  return lambda == 0.0 ? kNegInf : e * std::log(lambda);
}

}  // namespace detail

/// Direct ratio of mixture sums for P(xi = k | X = x).
inline double brute_force_posterior(const DiscreteMixture& mix, std::int64_t x, double horizon, std::int64_t k) {
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  if (x < 0 || k < 0) throw DataError("counts must be non-negative");
  std::vector<double> num(mix.size()), den(mix.size());
  for (std::size_t j = 0; j < mix.size(); ++j) {
    const double lw = std::log(mix.weights()[j]);
    const double lam = mix.atoms()[j];
    num[j] = lw + detail::log_power(lam, static_cast<double>(k + x)) - lam * (horizon + 1.0);
    den[j] = lw + detail::log_power(lam, static_cast<double>(x)) - lam * horizon;
  }
  const double log_den = log_sum_exp(den);
  if (log_den == kNegInf) throw NumericError("posterior denominator is zero");
  const double log_num = log_sum_exp(num);
  if (log_num == kNegInf) return 0.0;
  return std::exp(log_num - log_factorial(k) - log_den);
}

/// Marginal P(X = s) under a continuous prior, by quadrature.
template <class Prior>
double quadrature_marginal(const Prior& prior, std::int64_t s, double horizon = 1.0, int panels = 256) {
  const double sd = static_cast<double>(s);
  QuadratureOptions opts;
  opts.panels = panels;
  opts.min_upper = (sd + 1.0 + 12.0 * std::sqrt(sd + 1.0)) / horizon;
  return discretize(prior, opts).marginal(s, horizon);
}

}  // namespace ebinv

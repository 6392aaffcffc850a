#pragma once

// Helpers shared by the test binaries.

#include <random>
#include <vector>

#include "ebinv/core.hpp"
#include "ebinv/mixture.hpp"
#include "ebinv/priors.hpp"

namespace ebinv::testing {

inline std::vector<std::int64_t> poisson_draws(std::mt19937_64& rng, double rate, std::size_t n) {
  std::poisson_distribution<std::int64_t> dist(rate);
  std::vector<std::int64_t> out(n);
  for (auto& x : out) x = dist(rng);
  return out;
}

/// n counts from the Poisson mixture, horizon T.
inline Dataset mixture_draws(std::mt19937_64& rng, const DiscreteMixture& mix, std::size_t n, double horizon = 1.0) {
  std::discrete_distribution<std::size_t> pick(mix.weights().begin(), mix.weights().end());
  Dataset d;
  d.horizon = horizon;
  d.counts.resize(n);
  for (auto& x : d.counts) {
    std::poisson_distribution<std::int64_t> dist(mix.atoms()[pick(rng)] * horizon);
    x = dist(rng);
  }
  return d;
}

/// n counts with Weibull-distributed rates, horizon 1.
inline CountHistogram weibull_histogram(std::mt19937_64& rng, const WeibullPrior& prior, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.counts.resize(n);
  for (auto& x : d.counts) {
    std::poisson_distribution<std::int64_t> dist(prior.from_uniform(1.0 - u(rng)));
    x = dist(rng);
  }
  return build_histogram(d);
}

/// Random mixture with `atoms` distinct atoms in (lo, hi).
inline DiscreteMixture random_mixture(std::mt19937_64& rng, std::size_t atoms, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi), w(0.05, 1.0);
  std::vector<double> a(atoms), p(atoms);
  for (std::size_t j = 0; j < atoms; ++j) {
    a[j] = u(rng);
    p[j] = w(rng);
  }
  return DiscreteMixture::normalized(a, p);
}

/// Random pmf on 0..k_max with a few zero entries.
inline DemandPmf random_pmf(std::mt19937_64& rng, std::int64_t k_max) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k_max) + 1);
  double sum = 0.0;
  for (auto& x : p) {
    x = u(rng) < 0.2 ? 0.0 : u(rng);
    sum += x;
  }
  if (sum == 0.0) {
    p[0] = 1.0;
    sum = 1.0;
  }
  for (auto& x : p) x /= sum;
  return DemandPmf(std::move(p), 0.0);
}

}  // namespace ebinv::testing

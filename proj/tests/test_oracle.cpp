#include <catch_amalgamated.hpp>

#include "ebinv/oracle.hpp"
#include "support.hpp"

using namespace ebinv;
using Catch::Approx;

TEST_CASE("nb_marginal", "[oracle]") {
  CHECK(nb_marginal({1.0, 1.0}, 0) == Approx(0.5).epsilon(1e-15));

  double sum = 0.0;
  for (std::int64_t s = 0; s <= 200; ++s) sum += nb_marginal({2.0, 2.0}, s);
  CHECK(std::abs(sum - 1.0) <= 1e-10);

  // 40-digit integral of Poisson(8; l) against Gamma(2, 2).
  CHECK(std::abs(nb_marginal({2.0, 2.0}, 8) - 0.03901844231062338058) <= 1e-12);
  CHECK(std::abs(nb_marginal({2.0, 2.0}, 8) - quadrature_marginal(GammaPrior{2.0, 2.0}, 8)) <= 1e-10);

  const auto table = nb_marginal_table({2.0, 2.0}, 40);
  for (std::int64_t s = 0; s <= 40; ++s)
    CHECK(table[static_cast<std::size_t>(s)] == Approx(nb_marginal({2.0, 2.0}, s)).epsilon(1e-12));

  CHECK_THROWS_AS(nb_marginal({0.0, 1.0}, 1), ConfigError);
  CHECK_THROWS_AS(nb_marginal({1.0, -1.0}, 1), ConfigError);
}

TEST_CASE("nb_marginal with a horizon scales theta", "[oracle]") {
  for (std::int64_t s : {0, 3, 11})
    CHECK(nb_marginal({1.5, 0.7}, s, 3.0) == Approx(nb_marginal({1.5, 2.1}, s, 1.0)).epsilon(1e-13));
  CHECK(nb_marginal({1.5, 0.7}, 5, 3.0) == Approx(quadrature_marginal(GammaPrior{1.5, 0.7}, 5, 3.0)).epsilon(1e-9));
}

TEST_CASE("nb_posterior_pmf", "[oracle]") {
  const GammaPrior g{2.0, 2.0};
  CHECK(nb_posterior_pmf(g, 8, 0) == Approx(0.006047).margin(5e-7));
  CHECK(nb_posterior_pmf(g, 8, 5) == Approx(0.123959).margin(5e-7));
  CHECK(nb_posterior_pmf(g, 8, 15) == Approx(0.008489).margin(5e-7));
  // closed form at k = 0: (3/5)^10
  CHECK(nb_posterior_pmf(g, 8, 0) == Approx(std::pow(0.6, 10.0)).epsilon(1e-14));
  CHECK(nb_posterior_mean(g, 8) == Approx(10.0 * 2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("Robbins identity on the exact marginal", "[oracle][property]") {
  for (const GammaPrior g : {GammaPrior{2.0, 2.0}, GammaPrior{0.7, 5.0}, GammaPrior{6.0, 0.4}}) {
    for (double T : {1.0, 2.5}) {
      for (std::int64_t x = 0; x <= 30; ++x) {
        const double robbins = static_cast<double>(x + 1) * nb_marginal(g, x + 1, T) / (T * nb_marginal(g, x, T));
        CHECK(std::abs(robbins - nb_posterior_mean(g, x, T)) <= 1e-10 * std::max(1.0, robbins));
      }
    }
  }
}

TEST_CASE("brute_force_posterior", "[oracle]") {
  SECTION("single atom is Poisson") {
    const auto mix = DiscreteMixture::single(3.5);
    for (std::int64_t x : {0, 2, 9})
      for (std::int64_t k = 0; k < 15; ++k)
        CHECK(brute_force_posterior(mix, x, 1.7, k) == Approx(poisson_pmf(3.5, k)).epsilon(1e-13));
  }
  SECTION("two atoms, direct values") {
    const DiscreteMixture mix({1.0, 4.0}, {0.5, 0.5});
    // (e^-2 + e^-8) / (e^-1 + e^-4), 40 digits
    CHECK(std::abs(brute_force_posterior(mix, 0, 1.0, 0) - 0.3513010726169145761) <= 1e-14);
    const DiscreteMixture mix2({2.0, 6.0}, {0.3, 0.7});
    CHECK(std::abs(brute_force_posterior(mix2, 10, 1.0, 7) - 0.1376238041888410055) <= 1e-14);
    double sum = 0.0;
    for (std::int64_t k = 0; k <= 200; ++k) sum += brute_force_posterior(mix2, 10, 1.0, k);
    CHECK(std::abs(sum - 1.0) <= 1e-10);
  }
  SECTION("zero atom") {
    const DiscreteMixture mix({0.0, 2.0}, {0.5, 0.5});
    CHECK(brute_force_posterior(mix, 0, 1.0, 0) > 0.5);
    CHECK(brute_force_posterior(mix, 3, 1.0, 0) == Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(brute_force_posterior(DiscreteMixture::single(0.0), 2, 1.0, 0), NumericError);
    CHECK(brute_force_posterior(DiscreteMixture::single(0.0), 0, 1.0, 0) == 1.0);
  }
}

TEST_CASE("P(xi = 0 | X = k) strictly decreases in k", "[oracle][property]") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 40; ++rep) {
    const auto mix = testing::random_mixture(rng, 2 + static_cast<std::size_t>(rep % 4), 0.1, 8.0);
    double prev = 2.0;
    for (std::int64_t k = 0; k <= 20; ++k) {
      const double p0 = brute_force_posterior(mix, k, 1.0, 0);
      CHECK(p0 < prev);
      prev = p0;
    }
  }
}

TEST_CASE("Weibull prior helpers", "[oracle]") {
  const WeibullPrior w{1.8, 3.0};
  CHECK(w.mode() == Approx(std::pow(1.0 - 1.0 / 1.8, 1.0 / 1.8) * 3.0));
  CHECK(w.mean() == Approx(3.0 * std::tgamma(1.0 + 1.0 / 1.8)));
  CHECK(w.from_uniform(std::exp(-1.0)) == Approx(3.0));
  const auto mix = discretize(w);
  CHECK(mix.size() >= 4096);
  CHECK(mix.mean() == Approx(w.mean()).epsilon(1e-10));
  CHECK_THROWS_AS(discretize(WeibullPrior{-1.0, 3.0}), ConfigError);
}

TEST_CASE("Half-normal quadrature marginal", "[oracle]") {
  const HalfNormalPrior h{1.0};
  const auto mix = discretize(h);
  CHECK(mix.mean() == Approx(h.mean()).epsilon(1e-10));
  double sum = 0.0;
  for (std::int64_t s = 0; s <= 60; ++s) sum += quadrature_marginal(h, s);
  CHECK(std::abs(sum - 1.0) <= 1e-10);
}

#include <catch_amalgamated.hpp>

#include "ebinv/newsvendor.hpp"
#include "ebinv/oracle.hpp"
#include "ebinv/posterior_g.hpp"
#include "support.hpp"

using namespace ebinv;
using Catch::Approx;

namespace {

// Dense grid plus local ternary refinement, independent of the library search.
double grid_oracle_max(const std::vector<std::int64_t>& s, const std::vector<double>& w, double s_max) {
  auto f = [&](double mu) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      acc += w[i] * std::exp(static_cast<double>(s[i]) * std::log(std::max(mu, 1e-300)) - mu -
                             (s[i] == 0 ? 0.0 : 0.0));
    return acc;
  };
  const int n = 10000;
  double best = -1.0, arg = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double mu = s_max * i / n;
    const double v = f(mu);
    if (v > best) {
      best = v;
      arg = mu;
    }
  }
  double lo = std::max(0.0, arg - s_max / n), hi = std::min(s_max, arg + s_max / n);
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) lo = a;
    else hi = b;
  }
  return std::max(best, f(0.5 * (lo + hi)));
}

double tv_marginals(const DiscreteMixture& a, const DiscreteMixture& b, double T, std::int64_t top) {
  double tv = 0.0;
  for (std::int64_t s = 0; s <= top; ++s) tv += std::abs(a.marginal(s, T) - b.marginal(s, T));
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("mixture_log_likelihood", "[posterior_g]") {
  SECTION("single atom, constant counts") {
    const auto h = build_histogram({std::vector<std::int64_t>(50, 4), 1.0});
    CHECK(mixture_log_likelihood(DiscreteMixture::single(3.0), h) ==
          Approx(50.0 * std::log(poisson_pmf(3.0, 4))).epsilon(1e-13));
  }
  SECTION("horizon enters as lambda T") {
    const auto h = build_histogram({{0, 3, 5}, 2.0});
    const double want = std::log(poisson_pmf(4.0, 0)) + std::log(poisson_pmf(4.0, 3)) + std::log(poisson_pmf(4.0, 5));
    CHECK(mixture_log_likelihood(DiscreteMixture::single(2.0), h) == Approx(want).epsilon(1e-13));
  }
  SECTION("zero mass gives -inf") {
    const auto h = build_histogram({{0, 2}, 1.0});
    CHECK(mixture_log_likelihood(DiscreteMixture::single(0.0), h) == kNegInf);
  }
  SECTION("permutation invariance") {
    std::mt19937_64 rng(3);
    auto d = testing::mixture_draws(rng, DiscreteMixture({1.0, 5.0}, {0.4, 0.6}), 500);
    const auto mix = DiscreteMixture({0.5, 2.0, 6.0}, {0.2, 0.3, 0.5});
    const double a = mixture_log_likelihood(mix, build_histogram(d));
    std::shuffle(d.counts.begin(), d.counts.end(), rng);
    CHECK(mixture_log_likelihood(mix, build_histogram(d)) == a);
  }
  SECTION("NPMLE stays below the saturated bound") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 10; ++rep) {
      const auto truth = testing::random_mixture(rng, 3, 0.2, 10.0);
      const auto h = build_histogram(testing::mixture_draws(rng, truth, 800));
      double bound = 0.0;
      for (const auto& b : h.bins()) {
        const double y = static_cast<double>(b.frequency);
        bound += y * std::log(y / static_cast<double>(h.total()));
      }
      const auto fit = fit_npmle(h, {1e-7, 400, {}, 1e-9});
      CHECK(fit.log_likelihood <= bound);
      CHECK(fit.log_likelihood >= mixture_log_likelihood(truth, h));
    }
  }
}

TEST_CASE("cg_subproblem", "[posterior_g]") {
  SECTION("single value peaks at the value") {
    std::vector<std::int64_t> s{7};
    std::vector<double> w{1.0};
    const auto r = cg_subproblem_weights(s, w);
    CHECK(r.lambda == Approx(7.0).margin(1e-7));
    CHECK(r.value == Approx(std::pow(7.0, 7.0) * std::exp(-7.0)).epsilon(1e-12));
  }
  SECTION("only zero observed") {
    std::vector<std::int64_t> s{0};
    std::vector<double> w{2.0};
    const auto r = cg_subproblem_weights(s, w);
    CHECK(r.lambda == 0.0);
    CHECK(r.value == Approx(2.0));
  }
  SECTION("horizon rescales the maximiser") {
    std::vector<std::int64_t> s{6};
    std::vector<double> w{1.0};
    CHECK(cg_subproblem_weights(s, w, 3.0).lambda == Approx(2.0).margin(1e-7));
  }
  SECTION("random weights agree with a dense grid") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::int64_t> s(21);
    std::iota(s.begin(), s.end(), 0);
    for (int rep = 0; rep < 25; ++rep) {
      std::vector<double> w(21);
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = (u(rng) < 0.5 ? 0.0 : u(rng)) / std::exp(log_factorial(s[i]) * u(rng));
      w[20] = 1e-12 + w[20];
      const auto r = cg_subproblem_weights(s, w);
      const double ref = grid_oracle_max(s, w, 20.0);
      CHECK(r.value >= ref - 1e-6 * std::max(1.0, ref));
      CHECK(r.lambda >= 0.0);
      CHECK(r.lambda <= 20.0);
    }
  }
}

TEST_CASE("reoptimize_weights", "[posterior_g]") {
  std::mt19937_64 rng(31);
  SECTION("true single atom gets weight one") {
    const auto h = build_histogram({testing::poisson_draws(rng, 4.0, 3000), 1.0});
    const auto fit = reoptimize_weights({4.0}, h);
    REQUIRE(fit.mixture.size() == 1);
    CHECK(fit.mixture.weights()[0] == 1.0);
  }
  SECTION("data from one of two atoms") {
    const auto h = build_histogram({testing::poisson_draws(rng, 2.0, 10000), 1.0});
    const auto fit = reoptimize_weights({2.0, 9.0}, h);
    CHECK(fit.mixture.atoms()[0] == 2.0);
    CHECK(fit.mixture.weights()[0] >= 0.95);
  }
  SECTION("KKT conditions") {
    const auto truth = DiscreteMixture({0.5, 3.0, 9.0}, {0.3, 0.4, 0.3});
    const auto h = build_histogram(testing::mixture_draws(rng, truth, 4000));
    std::vector<double> support;
    for (int i = 0; i <= 24; ++i) support.push_back(0.5 * i);
    const auto fit = reoptimize_weights(support, h);
    CHECK(fit.kkt_residual <= 1e-9);
    const double n = static_cast<double>(h.total());
    auto grad = [&](double lam) {
      double g = 0.0;
      for (const auto& b : h.bins())
        g += static_cast<double>(b.frequency) / n * poisson_pmf(lam, b.value) / fit.mixture.marginal(b.value, 1.0);
      return g;
    };
    double gmax = 0.0;
    for (double a : support) gmax = std::max(gmax, grad(a));
    CHECK(gmax <= 1.0 + 1e-6);
    for (double a : fit.mixture.atoms()) CHECK(grad(a) == Approx(gmax).margin(1e-6));
    double wsum = 0.0;
    for (double w : fit.mixture.weights()) wsum += w;
    CHECK(std::abs(wsum - 1.0) <= 1e-10);
  }
}

TEST_CASE("gamma_lower_bound", "[posterior_g]") {
  SECTION("one observed value") {
    const auto h = build_histogram({{3, 3, 3}, 1.0});
    std::vector<double> lv{std::log(0.2)};
    CHECK(gamma_lower_bound(lv, h) == Approx(0.2).epsilon(1e-14));
  }
  SECTION("random instance") {
    std::mt19937_64 rng(41);
    const auto h = build_histogram(testing::mixture_draws(rng, DiscreteMixture({1.0, 4.0}, {0.5, 0.5}), 200));
    const auto mix = DiscreteMixture({0.0, 1.5, 5.0}, {0.2, 0.5, 0.3});
    std::vector<double> lv;
    for (const auto& b : h.bins())
      lv.push_back(mix.log_marginal(b.value, 1.0) + log_factorial(b.value));
    const double lb = log_gamma_lower_bound(lv, h);
    CHECK(std::isfinite(lb));
    CHECK(lb <= *std::min_element(lv.begin(), lv.end()));
  }
}

TEST_CASE("fit_npmle recovers synthetic priors", "[posterior_g]") {
  std::mt19937_64 rng(53);
  SECTION("single atom") {
    const auto h = build_histogram({testing::poisson_draws(rng, 3.0, 20000), 1.0});
    const auto fit = fit_npmle(h, {1e-6, 300, {}, 1e-9});
    CHECK(fit.report.certified());
    CHECK(std::abs(fit.mixture.mean() - 3.0) < 0.1);
    CHECK(fit.log_likelihood >= mixture_log_likelihood(DiscreteMixture::single(3.0), h));
  }
  SECTION("two atoms") {
    const auto truth = DiscreteMixture({1.0, 8.0}, {0.5, 0.5});
    const auto h = build_histogram(testing::mixture_draws(rng, truth, 50000));
    const auto fit = fit_npmle(h);
    CHECK(fit.report.certified());
    CHECK(fit.mixture.size() >= 2);
    CHECK(tv_marginals(fit.mixture, truth, 1.0, 60) <= 0.01);
  }
}

TEST_CASE("fit_npmle report invariants", "[posterior_g][property]") {
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 6; ++rep) {
    const auto truth = testing::random_mixture(rng, 2 + static_cast<std::size_t>(rep % 3), 0.3, 12.0);
    const double T = rep % 2 == 0 ? 1.0 : 2.5;
    const auto h = build_histogram(testing::mixture_draws(rng, truth, 3000, T));
    const auto fit = fit_npmle(h, {1e-8, 500, {}, 1e-9});
    const auto& its = fit.report.iterations;
    REQUIRE(!its.empty());
    for (std::size_t t = 1; t < its.size(); ++t) CHECK(its[t].h >= its[t - 1].h - 1e-12);
    for (const auto& it : its) CHECK(it.min_log_v >= fit.report.log_gamma_bound - 1e-9);
    CHECK(std::isfinite(fit.report.log_gamma_bound));
    if (fit.report.certified()) {
      CHECK(fit.report.final_certificate() <= 1e-8);
      if (fit.mixture.size() > npmle_support_bound(h))
        WARN("support " << fit.mixture.size() << " exceeds bound " << npmle_support_bound(h));
    }
    for (double a : fit.mixture.atoms()) CHECK(a <= static_cast<double>(h.max_value()) / T + 1e-9);
  }
}

TEST_CASE("certificate bounds the optimality gap", "[posterior_g][property]") {
  std::mt19937_64 rng(71);
  for (int rep = 0; rep < 4; ++rep) {
    const auto truth = testing::random_mixture(rng, 3, 0.5, 15.0);
    const auto h = build_histogram(testing::mixture_draws(rng, truth, 2000));
    const auto reference = fit_npmle(h, {1e-9, 1000, {}, 1e-11});
    const double h_star = reference.report.iterations.back().h;
    // Start from a coarse support so that several iterations happen.
    const auto fit = fit_npmle(h, {1e-3, 200, {0.0, static_cast<double>(h.max_value())}, 1e-9});
    for (const auto& it : fit.report.iterations) {
      CHECK(h_star - it.h <= it.certificate + 1e-9);
      CHECK(h_star - it.h >= -1e-9);
    }
    // gap * t stays bounded.
    double worst = 0.0;
    for (std::size_t t = 0; t < fit.report.iterations.size(); ++t)
      worst = std::max(worst, (h_star - fit.report.iterations[t].h) * static_cast<double>(t + 1));
    CHECK(worst < 50.0);
  }
}

TEST_CASE("mixture posterior", "[posterior_g]") {
  SECTION("single atom is Poisson") {
    const auto pmf = mixture_posterior_pmf(DiscreteMixture::single(2.5), 7, 1.0, 30);
    for (std::int64_t k = 0; k <= 30; ++k) CHECK(pmf[k] == Approx(poisson_pmf(2.5, k)).epsilon(1e-13));
    CHECK(mixture_posterior_mean(DiscreteMixture::single(2.5), 7, 3.0) == 2.5);
  }
  SECTION("agrees with the brute-force oracle") {
    std::mt19937_64 rng(83);
    std::uniform_int_distribution<std::int64_t> xs(0, 25);
    for (int rep = 0; rep < 50; ++rep) {
      const auto mix = testing::random_mixture(rng, 1 + static_cast<std::size_t>(rep % 6), 0.0, 15.0);
      const auto x = xs(rng);
      const double T = rep % 3 == 0 ? 2.0 : 1.0;
      const auto pmf = mixture_posterior_pmf(mix, x, T, 60);
      double total = pmf.tail();
      for (std::int64_t k = 0; k <= 60; ++k) {
        CHECK(std::abs(pmf[k] - brute_force_posterior(mix, x, T, k)) <= 1e-12);
        total += pmf[k];
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }
  SECTION("mean equals Robbins on the exact marginal") {
    std::mt19937_64 rng(89);
    for (int rep = 0; rep < 20; ++rep) {
      const auto mix = testing::random_mixture(rng, 4, 0.1, 10.0);
      double prev = -1.0;
      for (std::int64_t x = 0; x <= 25; ++x) {
        const double robbins = static_cast<double>(x + 1) * mix.marginal(x + 1, 1.0) / mix.marginal(x, 1.0);
        const double m = mixture_posterior_mean(mix, x, 1.0);
        CHECK(m == Approx(robbins).epsilon(1e-10));
        CHECK(m >= prev * (1.0 - 1e-13));
        prev = m;
      }
    }
  }
  SECTION("zero denominator") {
    CHECK_THROWS_AS(mixture_posterior_pmf(DiscreteMixture::single(0.0), 1, 1.0, 10), NumericError);
    CHECK_THROWS_AS(mixture_posterior_mean(DiscreteMixture::single(0.0), 1, 1.0), NumericError);
  }
  SECTION("decisions match the oracle pipeline") {
    std::mt19937_64 rng(97);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 40; ++rep) {
      const auto mix = testing::random_mixture(rng, 3, 0.2, 8.0);
      const ItemEconomics e{1.0, 0.5 + 0.4 * u(rng), 0.2};
      for (std::int64_t x = 0; x <= 15; ++x) {
        const auto pmf = mixture_posterior_pmf(mix, x, 1.0, 50);
        std::vector<double> ref(51);
        for (std::int64_t k = 0; k <= 50; ++k) ref[static_cast<std::size_t>(k)] = brute_force_posterior(mix, x, 1.0, k);
        CHECK(optimal_stock(pmf, e).quantity == optimal_stock(DemandPmf(ref), e).quantity);
      }
    }
  }
}

TEST_CASE("mixture_posterior_pmf tail mass", "[posterior_g]") {
  // atoms on both sides of k_max / 2, where the tail is summed directly or by the incomplete gamma
  const DiscreteMixture mix({0.3, 2.0, 7.5, 14.0, 30.0}, {0.2, 0.3, 0.2, 0.2, 0.1});
  for (std::int64_t x : {0, 3, 12, 25})
    for (std::int64_t k_max : {4, 10, 20, 40}) {
      const auto pmf = mixture_posterior_pmf(mix, x, 1.5, k_max);
      std::vector<double> lw(mix.size());
      for (std::size_t j = 0; j < mix.size(); ++j)
        lw[j] = std::log(mix.weights()[j]) + log_poisson_pmf(1.5 * mix.atoms()[j], x);
      const double norm = log_sum_exp(lw);
      double want = 0.0;
      for (std::size_t j = 0; j < mix.size(); ++j)
        want += std::exp(lw[j] - norm) * boost::math::gamma_p(static_cast<double>(k_max) + 1.0, mix.atoms()[j]);
      CHECK(pmf.tail() == Approx(want).epsilon(1e-12).margin(1e-300));
    }
}

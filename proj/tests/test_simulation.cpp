#include <catch_amalgamated.hpp>

#include "ebinv/oracle.hpp"
#include "ebinv/simulation.hpp"
#include "support.hpp"

using namespace ebinv;
using Catch::Approx;

namespace {

DemandPmf brute_force_pmf(const DiscreteMixture& mix, std::int64_t x, double T, std::int64_t k_max) {
  std::vector<double> p(static_cast<std::size_t>(k_max) + 1);
  for (std::int64_t k = 0; k <= k_max; ++k) p[static_cast<std::size_t>(k)] = brute_force_posterior(mix, x, T, k);
  return DemandPmf(std::move(p));
}

}  // namespace

TEST_CASE("generate_instance", "[simulation]") {
  const WeibullPrior prior{1.8, 3.0};
  const auto inst = generate_instance(10000, prior, {}, 77);
  REQUIRE(inst.size() == 10000);
  double mean = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    CHECK(inst.rates[i] > 0.0);
    CHECK(inst.data.counts[i] >= 0);
    CHECK(inst.economics[i].unit_cost >= 0.5);
    CHECK(inst.economics[i].unit_cost <= 0.9);
    CHECK(inst.economics[i].revenue == 1.0);
    CHECK(inst.economics[i].fixed_cost == 0.2);
    mean += inst.rates[i] / 10000.0;
  }
  CHECK(std::abs(mean - prior.mean()) <= 3.0 * std::sqrt(prior.variance() / 10000.0));
  double count_mean = 0.0;
  for (auto c : inst.data.counts) count_mean += static_cast<double>(c) / 10000.0;
  CHECK(std::abs(count_mean - prior.mean()) <= 3.0 * std::sqrt((prior.variance() + prior.mean()) / 10000.0));

  const auto again = generate_instance(10000, prior, {}, 77);
  CHECK(again.rates == inst.rates);
  CHECK(again.data.counts == inst.data.counts);
  CHECK(again.future == inst.future);
  const auto other = generate_instance(100, prior, {}, 78);
  CHECK(other.rates != inst.prefix(100).rates);

  // nested subsets: a smaller instance is the prefix of a larger one
  const auto small = generate_instance(250, prior, {}, 77);
  const auto pre = inst.prefix(250);
  CHECK(small.rates == pre.rates);
  CHECK(small.data.counts == pre.data.counts);
  for (std::size_t i = 0; i < 250; ++i) CHECK(small.economics[i].unit_cost == pre.economics[i].unit_cost);

  CHECK_THROWS_AS(generate_instance(0, prior, {}, 1), ConfigError);
  CHECK_THROWS_AS(generate_instance(10, {-1.0, 3.0}, {}, 1), ConfigError);
  CHECK_THROWS_AS(generate_instance(10, prior, {1.0, 0.9, 0.5, 0.2}, 1), ConfigError);
  CHECK_THROWS_AS(inst.prefix(10001), ConfigError);
}

TEST_CASE("Weibull prior shape", "[simulation]") {
  const WeibullPrior w{1.8, 3.0};
  CHECK(w.mode() == Approx(std::pow(1.0 - 1.0 / 1.8, 1.0 / 1.8) * 3.0).epsilon(1e-14));
  CHECK(w.mode() == Approx(0.6373 * 3.0).epsilon(1e-4));
  CHECK(w.log_pdf(w.mode()) > w.log_pdf(w.mode() * 0.99));
  CHECK(w.log_pdf(w.mode()) > w.log_pdf(w.mode() * 1.01));
  CHECK(WeibullPrior{0.8, 2.0}.mode() == 0.0);
  CHECK(w.from_uniform(std::exp(-1.0)) == Approx(3.0).epsilon(1e-14));
}

TEST_CASE("true_posterior_policy", "[simulation]") {
  SECTION("point-mass prior") {
    const auto inst = generate_mixture_instance(300, DiscreteMixture::single(2.5), {}, 4);
    const auto ev = true_posterior_policy(inst);
    for (std::size_t i = 0; i < inst.size(); ++i)
      CHECK(ev.decisions[i] == optimal_stock(DemandPmf::poisson(2.5, 60), inst.economics[i]).quantity);
    REQUIRE(ev.gap_pct.has_value());
    CHECK(*ev.gap_pct == 0.0);
  }
  SECTION("finite prior matches the brute-force pipeline") {
    const DiscreteMixture prior({0.7, 3.0, 6.5}, {0.3, 0.5, 0.2});
    const auto inst = generate_mixture_instance(500, prior, {1.0, 0.5, 0.9, 0.1}, 11, 2.0);
    const auto ev = true_posterior_policy(inst);
    const auto k_max = default_k_max(inst.histogram());
    for (std::size_t i = 0; i < inst.size(); ++i) {
      const auto ref = optimal_stock(brute_force_pmf(prior, inst.data.counts[i], 2.0, k_max), inst.economics[i]);
      CHECK(ev.decisions[i] == ref.quantity);
    }
    CHECK(ev.average_profit == ev.optimal_average_profit);
  }
}

TEST_CASE("evaluate_policy", "[simulation]") {
  const auto inst = generate_instance(800, {1.8, 3.0}, {}, 9);
  const auto opt = true_posterior_policy(inst);
  const auto same = evaluate_policy(inst, opt.decisions);
  REQUIRE(same.gap_pct.has_value());
  CHECK(*same.gap_pct == Approx(0.0).margin(1e-12));
  CHECK(same.average_profit == Approx(opt.average_profit).epsilon(1e-14));

  const auto zero = evaluate_policy(inst, std::vector<std::int64_t>(inst.size(), 0));
  CHECK(zero.average_profit == 0.0);
  CHECK(zero.pct_stocked == 0.0);
  CHECK(zero.avg_stock_given_positive == 0.0);
  CHECK(*zero.gap_pct == Approx(100.0));

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> pick(0, 12);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::int64_t> x(inst.size());
    for (auto& v : x) v = pick(rng);
    const auto ev = evaluate_policy(inst, x, opt.average_profit);
    CHECK(ev.average_profit <= opt.average_profit + 1e-12);
    for (std::size_t i = 0; i < inst.size(); ++i) CHECK(ev.profits[i] <= opt.profits[i] + 1e-12);
    CHECK(*ev.gap_pct >= -1e-10);
  }

  // non-positive optimum: gap undefined, raw profits kept
  const auto dear = generate_instance(200, {1.8, 0.3}, {1.0, 0.9, 0.9, 0.6}, 2);
  const auto ev = evaluate_policy(dear, std::vector<std::int64_t>(dear.size(), 1));
  CHECK_FALSE(ev.gap_pct.has_value());
  CHECK(ev.average_profit < 0.0);

  CHECK_THROWS_AS(evaluate_policy(inst, {1, 2}), ConfigError);
}

TEST_CASE("naive decisions", "[simulation]") {
  const auto inst = generate_instance(400, {1.8, 3.0}, {}, 21);
  const auto hist = inst.histogram();
  const auto fit = fit_method(Method::naive, hist);
  const auto k_max = default_k_max(hist);
  const auto d = decide(fit, inst.data, inst.economics, k_max);
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto want = optimal_stock(DemandPmf::poisson(static_cast<double>(inst.data.counts[i]), k_max), inst.economics[i]);
    CHECK(d[i].quantity == want.quantity);
    if (inst.data.counts[i] == 0) CHECK(d[i].quantity == 0);
    CHECK(d[i].failure.empty());
  }
  // off-support counts under the empirical marginal are reported, not thrown
  MethodOptions opts;
  opts.marginal = MarginalKind::empirical;
  const auto plug = fit_method(Method::plugin, build_histogram({{0, 1, 1, 2}, 1.0}), opts);
  const auto out = decide(plug, {{0, 2, 5}, 1.0}, std::vector<ItemEconomics>(3, {1.0, 0.5, 0.0}), 20);
  CHECK(out[0].failure.empty());
  CHECK(out[2].failure.find("outside marginal support") != std::string::npos);
  CHECK(out[2].quantity == 0);
}

TEST_CASE("g-modelling decisions follow the oracle on finite priors", "[simulation]") {
  const DiscreteMixture prior({1.0, 4.0}, {0.6, 0.4});
  const auto inst = generate_mixture_instance(4000, prior, {}, 8);
  const auto hist = inst.histogram();
  const auto fit = fit_method(Method::g, hist);
  const auto k_max = default_k_max(hist);
  const auto d = decide(fit, inst.data, inst.economics, k_max);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto want = optimal_stock(brute_force_pmf(fit.npmle->mixture, inst.data.counts[i], 1.0, k_max), inst.economics[i]);
    CHECK(d[i].quantity == want.quantity);
  }
}

TEST_CASE("realized_profit", "[simulation]") {
  const std::vector<ItemEconomics> econ{{1.0, 0.5, 0.2}, {2.0, 0.3, 0.0}, {1.0, 0.9, 1.0}};
  CHECK(realized_profit(std::vector<std::int64_t>{0, 0, 0}, std::vector<std::int64_t>{3, 1, 9}, econ) == 0.0);
  // every sale covers the stock
  CHECK(realized_profit(std::vector<std::int64_t>{2, 1, 3}, std::vector<std::int64_t>{5, 1, 3}, econ) ==
        Approx((1.0 - 0.5) * 2 - 0.2 + (2.0 - 0.3) * 1 + (1.0 - 0.9) * 3 - 1.0));
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> u(0, 8);
  std::vector<std::int64_t> x(50), s(50);
  std::vector<ItemEconomics> e(50, {1.0, 0.6, 0.25});
  double want = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    x[i] = u(rng);
    s[i] = u(rng);
    if (x[i] > 0) want += static_cast<double>(std::min(x[i], s[i])) - 0.6 * static_cast<double>(x[i]) - 0.25;
  }
  CHECK(realized_profit(x, s, e) == Approx(want).epsilon(1e-14));
  CHECK_THROWS_AS(realized_profit(x, std::vector<std::int64_t>{1}, e), ConfigError);
}

TEST_CASE("run_benchmark", "[simulation]") {
  BenchmarkConfig cfg;
  cfg.sizes = {60, 150};
  cfg.scales = {2.0, 3.0};
  cfg.fixed_costs = {0.0, 0.2};
  cfg.replications = 2;
  cfg.seed = 5;
  const auto one = run_benchmark(cfg);
  REQUIRE(one.size() == 4 * 2 * 2 * 2 * 2);
  cfg.threads = 3;
  const auto three = run_benchmark(cfg);
  REQUIRE(three.size() == one.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].method == three[i].method);
    CHECK(one[i].avg_profit == three[i].avg_profit);
    CHECK(one[i].gap_pct == three[i].gap_pct);
  }
  for (const auto& r : one) {
    CHECK(r.status == "ok");
    CHECK(r.avg_profit <= r.opt_avg_profit + 1e-12);
  }

  // the naive row is the Poisson-at-X pipeline on the nested prefix
  const auto& row = one.front();
  REQUIRE(row.method == Method::naive);
  std::uint64_t st = cfg.seed ^ 0x1000003ULL ^ 0x9E37ULL;
  const auto inst = generate_instance(150, {1.8, 2.0}, {}, splitmix64(st)).prefix(row.n).with_fixed_cost(row.fixed_cost);
  const auto k_max = default_k_max(inst.histogram());
  std::vector<std::int64_t> x;
  for (std::size_t i = 0; i < inst.size(); ++i)
    x.push_back(optimal_stock(DemandPmf::poisson(static_cast<double>(inst.data.counts[i]), k_max), inst.economics[i]).quantity);
  CHECK(evaluate_policy(inst, x).average_profit == Approx(row.avg_profit).epsilon(1e-12));

  // method failures are recorded per cell
  cfg.methods = {Method::naive, Method::plugin};
  cfg.method_options.spline.knots = {1.0, 500.0};
  const auto bad = run_benchmark(cfg);
  for (const auto& r : bad) CHECK((r.method == Method::naive) == (r.status == "ok"));
  const auto sum = summarize(bad);
  for (const auto& s : sum) CHECK(s.failures == (s.method == Method::plugin ? 2 : 0));

  cfg.replications = 0;
  CHECK_THROWS_AS(run_benchmark(cfg), ConfigError);
}

TEST_CASE("summarize", "[simulation]") {
  std::vector<BenchmarkRow> rows(3);
  const double profits[] = {0.1, 0.2, 0.6};
  for (int i = 0; i < 3; ++i) {
    rows[static_cast<std::size_t>(i)].avg_profit = profits[i];
    rows[static_cast<std::size_t>(i)].opt_avg_profit = 1.0;
    rows[static_cast<std::size_t>(i)].gap_pct = 100.0 * (1.0 - profits[i]);
    rows[static_cast<std::size_t>(i)].replication = i;
  }
  const auto s = summarize(rows);
  REQUIRE(s.size() == 1);
  CHECK(s[0].replications == 3);
  CHECK(s[0].mean_profit == Approx(0.3));
  // sample sd 0.264575..., se = sd / sqrt(3)
  CHECK(s[0].se_profit == Approx(std::sqrt(0.07 / 3.0)));
  CHECK(s[0].mean_gap == Approx(70.0));
}

TEST_CASE("parallel_for", "[simulation]") {
  std::vector<int> out(100, 0);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK_THROWS_WITH(parallel_for(10, 3,
                                 [](std::size_t i) {
                                   if (i == 4 || i == 7) throw DataError("bad " + std::to_string(i));
                                 }),
                    "bad 4");
}

TEST_CASE("grouping_experiment", "[simulation]") {
  GroupingConfig cfg;
  cfg.n0 = 1000;
  cfg.n1 = 200;
  cfg.beta0 = 3.0;
  cfg.multipliers = {1.0};
  cfg.fixed_costs = {0.2};
  cfg.cutoffs = {1.0, 0.05, 0.0};
  cfg.replications = 30;
  cfg.seed = 12;
  const auto runs = grouping_runs(cfg);
  REQUIRE(runs.size() == 30);
  for (const auto& r : runs) {
    CHECK(r.status == "ok");
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }
  const auto rows = summarize_grouping(runs, cfg.cutoffs);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].split_proportion == 1.0);
  CHECK(rows[2].split_proportion == 0.0);
  CHECK(rows[1].split_proportion < 0.25);
  CHECK(rows[0].runs == 30);
  double split_mean = 0.0, pooled_mean = 0.0;
  for (const auto& r : runs) {
    split_mean += r.profit_split / 30.0;
    pooled_mean += r.profit_pooled / 30.0;
  }
  CHECK(rows[0].avg_profit == Approx(split_mean));
  CHECK(rows[2].avg_profit == Approx(pooled_mean));
  // under the null, pooling the larger sample should not lose
  CHECK(pooled_mean >= split_mean - 1e-3);

  CHECK(split_at(1.0, 1.0));
  CHECK_FALSE(split_at(0.0, 0.0));
  CHECK(split_at(0.01, 0.05));
  CHECK_FALSE(split_at(0.05, 0.05));
}

TEST_CASE("paired_ordering", "[simulation]") {
  auto row = [](Method m, int rep, double gap, std::size_t n = 100) {
    BenchmarkRow r;
    r.method = m;
    r.n = n;
    r.scale = 2.0;
    r.fixed_cost = 0.2;
    r.replication = rep;
    r.gap_pct = gap;
    return r;
  };
  std::vector<BenchmarkRow> rows{row(Method::g, 0, 10.0), row(Method::plugin, 0, 13.0),
                                 row(Method::g, 1, 12.0), row(Method::plugin, 1, 14.0),
                                 row(Method::g, 2, 11.0), row(Method::plugin, 2, 15.0),
                                 row(Method::g, 3, 20.0)};  // unpaired
  auto failed = row(Method::plugin, 3, 0.0);
  failed.status = "fit failed";
  rows.push_back(failed);
  rows.push_back(row(Method::g, 0, 50.0, 200));
  rows.push_back(row(Method::plugin, 0, 40.0, 200));

  const auto o = paired_ordering(rows, Method::g, Method::plugin);
  REQUIRE(o.size() == 2);
  CHECK(o[0].n == 100);
  CHECK(o[0].pairs == 3);
  CHECK(o[0].mean_diff == Approx(3.0));
  // differences 3, 2, 4: sd 1, se 1/sqrt(3)
  CHECK(o[0].se_diff == Approx(1.0 / std::sqrt(3.0)));
  CHECK(o[0].holds);
  CHECK(o[1].pairs == 1);
  CHECK(o[1].mean_diff == Approx(-10.0));
  CHECK_FALSE(o[1].holds);
}

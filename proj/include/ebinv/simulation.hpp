#pragma once

// Synthetic instances, policy evaluation against the true-prior benchmark, and the
// method-comparison and grouping experiments.

#include <atomic>
#include <exception>
#include <map>
#include <optional>
#include <random>
#include <thread>
#include <tuple>

#include "ebinv/grouping.hpp"
#include "ebinv/methods.hpp"
#include "ebinv/priors.hpp"

namespace ebinv {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Independent stream for (seed, stream, index), stable under subsetting and thread layout.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t s = seed;
  s = splitmix64(s) ^ stream;
  s = splitmix64(s) ^ index;
  return std::mt19937_64(splitmix64(s));
}

/// Uniform on the open interval (0, 1).
inline double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must go to per-index
/// slots, which makes the outcome independent of the thread count. The first exception
/// (by index) is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t count, int threads, F&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto width = static_cast<std::size_t>(std::max(1, threads));
  if (width == 1 || count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(width, count); ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct EconomicsConfig {
  double revenue = 1.0;
  double cost_lo = 0.5;
  double cost_hi = 0.9;
  double fixed_cost = 0.2;

  void validate() const {
    if (!(revenue > 0.0)) throw ConfigError("revenue must be positive");
    if (!(cost_lo >= 0.0) || !(cost_hi >= cost_lo)) throw ConfigError("unit cost range must satisfy 0 <= lo <= hi");
    if (!(fixed_cost >= 0.0)) throw ConfigError("fixed cost must be non-negative");
  }
};

struct Instance {
  std::vector<double> rates;
  std::vector<ItemEconomics> economics;
  Dataset data;
  /// One draw of next-interval demand per item.
  std::vector<std::int64_t> future;
  /// The generating prior; continuous priors are stored discretised.
  DiscreteMixture prior;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return rates.size(); }
  CountHistogram histogram() const { return build_histogram(data); }

  /// The first m items; generation is per item, so this is the instance of size m.
  Instance prefix(std::size_t m) const {
    if (m > size()) throw ConfigError("prefix longer than the instance");
    Instance out;
    out.rates.assign(rates.begin(), rates.begin() + static_cast<std::ptrdiff_t>(m));
    out.economics.assign(economics.begin(), economics.begin() + static_cast<std::ptrdiff_t>(m));
    out.data.horizon = data.horizon;
    out.data.counts.assign(data.counts.begin(), data.counts.begin() + static_cast<std::ptrdiff_t>(m));
    out.future.assign(future.begin(), future.begin() + static_cast<std::ptrdiff_t>(m));
    out.prior = prior;
    out.seed = seed;
    return out;
  }

  Instance with_fixed_cost(double b) const {
    if (!(b >= 0.0)) throw ConfigError("fixed cost must be non-negative");
    Instance out = *this;
    for (auto& e : out.economics) e.fixed_cost = b;
    return out;
  }
};

namespace detail {

template <class RateDraw>
Instance generate(std::size_t n, RateDraw&& draw, DiscreteMixture prior, const EconomicsConfig& econ,
                  std::uint64_t seed, double horizon) {
  if (n < 1) throw ConfigError("instance needs at least one item");
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  econ.validate();
  Instance inst;
  inst.prior = std::move(prior);
  inst.seed = seed;
  inst.data.horizon = horizon;
  inst.rates.resize(n);
  inst.economics.resize(n);
  inst.data.counts.resize(n);
  inst.future.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = stream_rng(seed, 0, i);
    const double lambda = draw(rng);
    const double cost = econ.cost_lo + (econ.cost_hi - econ.cost_lo) * open_uniform(rng);
    auto poisson = [&](double mean) -> std::int64_t {
      if (!(mean > 0.0)) return 0;
      std::poisson_distribution<std::int64_t> d(mean);
      return d(rng);
    };
    inst.rates[i] = lambda;
    inst.economics[i] = {econ.revenue, cost, econ.fixed_cost};
    inst.data.counts[i] = poisson(lambda * horizon);
    inst.future[i] = poisson(lambda);
  }
  return inst;
}

}  // namespace detail

/// Items with Weibull rates, uniform unit costs, Poisson counts over horizon T.
inline Instance generate_instance(std::size_t n, const WeibullPrior& prior, const EconomicsConfig& econ,
                                  std::uint64_t seed, double horizon = 1.0) {
  prior.validate();
  return detail::generate(
      n, [&](std::mt19937_64& rng) { return prior.from_uniform(open_uniform(rng)); }, discretize(prior), econ, seed,
      horizon);
}

/// Items whose rates are drawn from a finite mixture.
inline Instance generate_mixture_instance(std::size_t n, const DiscreteMixture& prior, const EconomicsConfig& econ,
                                          std::uint64_t seed, double horizon = 1.0) {
  std::vector<double> cdf(prior.size());
  std::partial_sum(prior.weights().begin(), prior.weights().end(), cdf.begin());
  return detail::generate(
      n,
      [&](std::mt19937_64& rng) {
        const double u = open_uniform(rng) * cdf.back();
        const auto j = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        return prior.atoms()[std::min(j, prior.size() - 1)];
      },
      prior, econ, seed, horizon);
}

/// Predictive pmfs under a fixed prior, cached per observed count.
class PredictiveCache {
public:
  PredictiveCache(const FittedMethod& method, std::int64_t k_max) : method_(&method), k_max_(k_max) {}
  PredictiveCache(const DiscreteMixture& prior, double horizon, std::int64_t k_max)
      : prior_(&prior), horizon_(horizon), k_max_(k_max) {}

  const DemandPmf& operator()(std::int64_t x) {
    auto it = cache_.find(x);
    if (it == cache_.end())
      it = cache_.emplace(x, prior_ ? mixture_posterior_pmf(*prior_, x, horizon_, k_max_) : method_->predictive(x, k_max_))
               .first;
    return it->second;
  }

private:
  const FittedMethod* method_ = nullptr;
  const DiscreteMixture* prior_ = nullptr;
  double horizon_ = 1.0;
  std::int64_t k_max_;
  std::map<std::int64_t, DemandPmf> cache_;
};

struct ItemDecision {
  std::int64_t quantity = 0;
  /// Expected profit under the estimated predictive pmf.
  double estimated_profit = 0.0;
  /// Non-empty when no predictive pmf was available; the item is then not stocked.
  std::string failure;
};

/// Per-item newsvendor decisions from a fitted method.
inline std::vector<ItemDecision> decide(const FittedMethod& method, const Dataset& data,
                                        const std::vector<ItemEconomics>& econ, std::int64_t k_max) {
  if (econ.size() != data.counts.size()) throw ConfigError("one economics record per item is required");
  PredictiveCache cache(method, k_max);
  std::vector<ItemDecision> out(data.counts.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    try {
      const auto d = optimal_stock(cache(data.counts[i]), econ[i]);
      out[i].quantity = d.quantity;
      out[i].estimated_profit = d.expected_profit;
    } catch (const DataError& e) {
      out[i].failure = e.what();
    } catch (const NumericError& e) {
      out[i].failure = e.what();
    }
  }
  return out;
}

inline std::vector<std::int64_t> quantities(const std::vector<ItemDecision>& d) {
  std::vector<std::int64_t> q(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) q[i] = d[i].quantity;
  return q;
}

struct PolicyEvaluation {
  std::vector<std::int64_t> decisions;
  /// Expected profit of each item under its true posterior predictive.
  std::vector<double> profits;
  double average_profit = 0.0;
  double optimal_average_profit = 0.0;
  /// (optimal - average) / optimal * 100; undefined when the optimal average is not positive.
  std::optional<double> gap_pct;
  double pct_stocked = 0.0;
  double avg_stock_given_positive = 0.0;
};

namespace detail {

inline std::int64_t evaluation_k_max(const Instance& inst, std::span<const std::int64_t> decisions) {
  std::int64_t k = default_k_max(inst.histogram());
  for (auto x : decisions) k = std::max(k, x + 1);
  return k;
}

inline PolicyEvaluation score(const Instance& inst, std::vector<std::int64_t> decisions, PredictiveCache& truth,
                              double optimal_average) {
  PolicyEvaluation ev;
  const auto n = static_cast<double>(inst.size());
  ev.profits.resize(inst.size());
  double stocked = 0.0, units = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    ev.profits[i] = expected_profit(truth(inst.data.counts[i]), decisions[i], inst.economics[i]);
    ev.average_profit += ev.profits[i] / n;
    if (decisions[i] > 0) {
      stocked += 1.0;
      units += static_cast<double>(decisions[i]);
    }
  }
  ev.pct_stocked = 100.0 * stocked / n;
  ev.avg_stock_given_positive = stocked > 0.0 ? units / stocked : 0.0;
  ev.optimal_average_profit = optimal_average;
  if (optimal_average > 0.0) ev.gap_pct = (optimal_average - ev.average_profit) / optimal_average * 100.0;
  ev.decisions = std::move(decisions);
  return ev;
}

}  // namespace detail

/// The gap-zero benchmark: newsvendor decisions under the true posterior predictive.
inline PolicyEvaluation true_posterior_policy(const Instance& inst) {
  const auto k_max = default_k_max(inst.histogram());
  PredictiveCache truth(inst.prior, inst.data.horizon, k_max);
  std::vector<std::int64_t> x(inst.size());
  double avg = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto d = optimal_stock(truth(inst.data.counts[i]), inst.economics[i]);
    x[i] = d.quantity;
    avg += d.expected_profit / static_cast<double>(inst.size());
  }
  // Re-score with a truncation wide enough for every decision.
  PredictiveCache wide(inst.prior, inst.data.horizon, detail::evaluation_k_max(inst, x));
  auto ev = detail::score(inst, std::move(x), wide, 0.0);
  ev.optimal_average_profit = ev.average_profit;
  if (ev.average_profit > 0.0) ev.gap_pct = 0.0;
  return ev;
}

/// Scores decisions by their expected profit under the true posterior predictive.
inline PolicyEvaluation evaluate_policy(const Instance& inst, std::vector<std::int64_t> decisions,
                                        std::optional<double> optimal_average = std::nullopt) {
  if (decisions.size() != inst.size()) throw ConfigError("one decision per item is required");
  for (auto x : decisions)
    if (x < 0) throw ConfigError("stock quantities must be non-negative");
  const double opt = optimal_average ? *optimal_average : true_posterior_policy(inst).average_profit;
  PredictiveCache truth(inst.prior, inst.data.horizon, detail::evaluation_k_max(inst, decisions));
  return detail::score(inst, std::move(decisions), truth, opt);
}

/// Sum of r min(s, x) - c x - b 1(x > 0) over items.
inline double realized_profit(std::span<const std::int64_t> decisions, std::span<const std::int64_t> sales,
                              std::span<const ItemEconomics> econ) {
  if (decisions.size() != sales.size() || decisions.size() != econ.size())
    throw ConfigError("decisions, sales and economics must have equal lengths");
  double total = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i] <= 0) continue;
    const auto x = static_cast<double>(decisions[i]);
    total += econ[i].revenue * std::min(static_cast<double>(sales[i]), x) - econ[i].unit_cost * x - econ[i].fixed_cost;
  }
  return total;
}

struct BenchmarkConfig {
  std::vector<std::size_t> sizes{50, 200, 1000, 5000};
  std::vector<double> scales{2.0, 3.0, 4.0, 5.0};
  std::vector<double> fixed_costs{0.2};
  std::vector<Method> methods{Method::naive, Method::plugin, Method::f_full, Method::g};
  int replications = 20;
  std::uint64_t seed = 1;
  double shape = 1.8;
  double horizon = 1.0;
  EconomicsConfig economics;
  MethodOptions method_options;
  int threads = 1;

  void validate() const {
    if (sizes.empty() || scales.empty() || fixed_costs.empty() || methods.empty())
      throw ConfigError("benchmark grid must not be empty");
    if (replications < 1) throw ConfigError("benchmark needs at least one replication");
    for (auto n : sizes)
      if (n < 1) throw ConfigError("instance sizes must be positive");
    for (double b : fixed_costs)
      if (!(b >= 0.0)) throw ConfigError("fixed costs must be non-negative");
    WeibullPrior{shape, 1.0}.validate();
    for (double s : scales) WeibullPrior{shape, s}.validate();
    economics.validate();
  }
};

struct BenchmarkRow {
  Method method = Method::naive;
  std::size_t n = 0;
  double scale = 0.0;
  double fixed_cost = 0.0;
  int replication = 0;
  double avg_profit = 0.0;
  double opt_avg_profit = 0.0;
  std::optional<double> gap_pct;
  double pct_stocked = 0.0;
  double avg_stock_given_positive = 0.0;
  /// "ok", or the failure message when the method could not be fitted or applied.
  std::string status = "ok";
};

/// Every (scale, replication) pair draws one master instance; sizes are its nested prefixes
/// and fixed costs reuse the same draws. Methods see only the counts.
inline std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  const std::size_t n_max = *std::max_element(cfg.sizes.begin(), cfg.sizes.end());
  const std::size_t cells = cfg.scales.size() * static_cast<std::size_t>(cfg.replications);
  std::vector<std::vector<BenchmarkRow>> out(cells);
  parallel_for(cells, cfg.threads, [&](std::size_t cell) {
    const std::size_t si = cell / static_cast<std::size_t>(cfg.replications);
    const int rep = static_cast<int>(cell % static_cast<std::size_t>(cfg.replications));
    const double beta = cfg.scales[si];
    std::uint64_t seed_state = cfg.seed ^ (0x1000003ULL * (si + 1)) ^ (0x9E37ULL * static_cast<std::uint64_t>(rep + 1));
    const auto master =
        generate_instance(n_max, {cfg.shape, beta}, cfg.economics, splitmix64(seed_state), cfg.horizon);
    for (auto n : cfg.sizes) {
      const auto base = master.prefix(n);
      const auto hist = base.histogram();
      const auto k_max = default_k_max(hist);
      std::vector<std::optional<FittedMethod>> fits(cfg.methods.size());
      std::vector<std::string> errors(cfg.methods.size());
      for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        try {
          fits[m] = fit_method(cfg.methods[m], hist, cfg.method_options);
        } catch (const std::exception& e) {
          errors[m] = e.what();
        }
      }
      for (double b : cfg.fixed_costs) {
        const auto inst = base.with_fixed_cost(b);
        const double opt = true_posterior_policy(inst).average_profit;
        for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
          BenchmarkRow row;
          row.method = cfg.methods[m];
          row.n = n;
          row.scale = beta;
          row.fixed_cost = b;
          row.replication = rep;
          row.opt_avg_profit = opt;
          try {
            if (!fits[m]) throw NumericError(errors[m]);
            const auto ev = evaluate_policy(inst, quantities(decide(*fits[m], inst.data, inst.economics, k_max)), opt);
            row.avg_profit = ev.average_profit;
            row.gap_pct = ev.gap_pct;
            row.pct_stocked = ev.pct_stocked;
            row.avg_stock_given_positive = ev.avg_stock_given_positive;
          } catch (const std::exception& e) {
            row.status = e.what();
          }
          out[cell].push_back(std::move(row));
        }
      }
    }
  });
  std::vector<BenchmarkRow> rows;
  for (auto& c : out) rows.insert(rows.end(), c.begin(), c.end());
  return rows;
}

struct BenchmarkSummaryRow {
  Method method = Method::naive;
  std::size_t n = 0;
  double scale = 0.0;
  double fixed_cost = 0.0;
  int replications = 0;  // successful runs
  int failures = 0;
  double mean_profit = 0.0, se_profit = 0.0;
  double mean_opt_profit = 0.0;
  /// Over runs with a defined gap.
  int gap_count = 0;
  double mean_gap = 0.0, se_gap = 0.0;
  double mean_pct_stocked = 0.0, mean_stock_given_positive = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_se(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

/// Means and standard errors over replications, one row per (method, n, scale, fixed cost).
inline std::vector<BenchmarkSummaryRow> summarize(const std::vector<BenchmarkRow>& rows) {
  using Key = std::tuple<int, std::size_t, double, double>;
  std::map<Key, std::vector<const BenchmarkRow*>> groups;
  for (const auto& r : rows) groups[{static_cast<int>(r.method), r.n, r.scale, r.fixed_cost}].push_back(&r);
  std::vector<BenchmarkSummaryRow> out;
  for (const auto& [key, members] : groups) {
    BenchmarkSummaryRow s;
    s.method = static_cast<Method>(std::get<0>(key));
    s.n = std::get<1>(key);
    s.scale = std::get<2>(key);
    s.fixed_cost = std::get<3>(key);
    std::vector<double> profit, opt, gap, stocked, level;
    for (const auto* r : members) {
      if (r->status != "ok") {
        ++s.failures;
        continue;
      }
      profit.push_back(r->avg_profit);
      opt.push_back(r->opt_avg_profit);
      stocked.push_back(r->pct_stocked);
      level.push_back(r->avg_stock_given_positive);
      if (r->gap_pct) gap.push_back(*r->gap_pct);
    }
    s.replications = static_cast<int>(profit.size());
    std::tie(s.mean_profit, s.se_profit) = detail::mean_se(profit);
    s.mean_opt_profit = detail::mean_se(opt).first;
    s.gap_count = static_cast<int>(gap.size());
    std::tie(s.mean_gap, s.se_gap) = detail::mean_se(gap);
    s.mean_pct_stocked = detail::mean_se(stocked).first;
    s.mean_stock_given_positive = detail::mean_se(level).first;
    out.push_back(s);
  }
  return out;
}

/// Paired comparison of two methods within each (n, scale, fixed cost) cell:
/// diff = gap(worse) - gap(better) per replication, in percentage points.
struct OrderingRow {
  std::size_t n = 0;
  double scale = 0.0;
  double fixed_cost = 0.0;
  Method better = Method::g;
  Method worse = Method::plugin;
  int pairs = 0;
  double mean_diff = 0.0, se_diff = 0.0;
  /// mean_diff - 1.96 se_diff > 0.
  bool holds = false;
};

inline std::vector<OrderingRow> paired_ordering(const std::vector<BenchmarkRow>& rows, Method better, Method worse) {
  using Cell = std::tuple<std::size_t, double, double>;
  std::map<Cell, std::map<int, std::pair<std::optional<double>, std::optional<double>>>> cells;
  for (const auto& r : rows) {
    if (r.status != "ok" || !r.gap_pct || (r.method != better && r.method != worse)) continue;
    auto& slot = cells[{r.n, r.scale, r.fixed_cost}][r.replication];
    (r.method == better ? slot.first : slot.second) = *r.gap_pct;
  }
  std::vector<OrderingRow> out;
  for (const auto& [cell, reps] : cells) {
    OrderingRow o;
    std::tie(o.n, o.scale, o.fixed_cost) = cell;
    o.better = better;
    o.worse = worse;
    std::vector<double> diff;
    for (const auto& [rep, pair] : reps)
      if (pair.first && pair.second) diff.push_back(*pair.second - *pair.first);
    o.pairs = static_cast<int>(diff.size());
    std::tie(o.mean_diff, o.se_diff) = detail::mean_se(diff);
    o.holds = o.pairs >= 2 && o.mean_diff - 1.96 * o.se_diff > 0.0;
    out.push_back(o);
  }
  return out;
}

struct GroupingConfig {
  std::size_t n0 = 1000;  // larger group
  std::size_t n1 = 200;   // designated smaller group
  double beta0 = 2.0;
  std::vector<double> multipliers{0.6, 0.8, 1.0, 1.2, 1.4, 1.6};
  std::vector<double> fixed_costs{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::vector<double> cutoffs{1.0, 0.5, 0.05, 0.005, 0.0005, 0.00005, 0.000005, 0.0};
  int replications = 30;
  std::uint64_t seed = 1;
  double shape = 1.8;
  std::size_t K = 5;
  std::size_t K0 = 3;
  EconomicsConfig economics;
  NpmleOptions npmle;
  int threads = 1;

  void validate() const {
    if (n0 < 1 || n1 < 1) throw ConfigError("group sizes must be positive");
    if (multipliers.empty() || fixed_costs.empty() || cutoffs.empty()) throw ConfigError("grouping grid must not be empty");
    if (replications < 1) throw ConfigError("grouping needs at least one replication");
    if (K0 < 1 || K0 > K) throw ConfigError("grouping needs 1 <= K0 <= K");
    WeibullPrior{shape, beta0}.validate();
    for (double m : multipliers) WeibullPrior{shape, beta0 * m}.validate();
    for (double c : cutoffs)
      if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("cutoffs must lie in [0, 1]");
    economics.validate();
  }
};

/// One (multiplier, replication, fixed cost) run: the test outcome and the designated group's
/// average true expected profit when estimated from the pooled or its own data.
struct GroupingRun {
  double multiplier = 1.0;
  int replication = 0;
  double fixed_cost = 0.0;
  double p_value = 1.0;
  double statistic = 0.0;
  double profit_pooled = 0.0;
  double profit_split = 0.0;
  std::string status = "ok";
};

struct GroupingRow {
  double cutoff = 0.0;
  int runs = 0;
  double avg_profit = 0.0;
  double split_proportion = 0.0;
  /// Mean profit loss versus the best cutoff over runs where the two policies differ.
  int changed = 0;
  double reduction_vs_best = 0.0, se_reduction = 0.0;
};

/// A cutoff of 1 always splits and 0 never does; otherwise split iff p < cutoff.
inline bool split_at(double p_value, double cutoff) { return cutoff >= 1.0 || p_value < cutoff; }

inline std::vector<GroupingRun> grouping_runs(const GroupingConfig& cfg) {
  cfg.validate();
  const std::size_t cells = cfg.multipliers.size() * static_cast<std::size_t>(cfg.replications);
  std::vector<std::vector<GroupingRun>> out(cells);
  parallel_for(cells, cfg.threads, [&](std::size_t cell) {
    const std::size_t mi = cell / static_cast<std::size_t>(cfg.replications);
    const int rep = static_cast<int>(cell % static_cast<std::size_t>(cfg.replications));
    const double mult = cfg.multipliers[mi];
    std::uint64_t seed_state = cfg.seed ^ (0x2000011ULL * (mi + 1)) ^ (0x7F4AULL * static_cast<std::uint64_t>(rep + 1));
    const auto seed0 = splitmix64(seed_state), seed1 = splitmix64(seed_state);
    const auto g0 = generate_instance(cfg.n0, {cfg.shape, cfg.beta0}, cfg.economics, seed0);
    const auto g1 = generate_instance(cfg.n1, {cfg.shape, cfg.beta0 * mult}, cfg.economics, seed1);
    const auto h0 = g0.histogram(), h1 = g1.histogram();
    GroupingRun base;
    base.multiplier = mult;
    base.replication = rep;
    try {
      KAtomOptions kopts;
      kopts.seed = seed0 ^ seed1;
      const auto test = lr_test(h0, h1, cfg.K, 0.05, cfg.K0, kopts);
      base.p_value = test.p_value;
      base.statistic = test.statistic;
      FittedMethod pooled, own;
      pooled.method = own.method = Method::g;
      pooled.npmle = fit_npmle(pool(h0, h1), cfg.npmle);
      own.npmle = fit_npmle(h1, cfg.npmle);
      const auto k_max = default_k_max(pool(h0, h1));
      for (double b : cfg.fixed_costs) {
        const auto inst = g1.with_fixed_cost(b);
        const double opt = true_posterior_policy(inst).average_profit;
        GroupingRun run = base;
        run.fixed_cost = b;
        run.profit_pooled =
            evaluate_policy(inst, quantities(decide(pooled, inst.data, inst.economics, k_max)), opt).average_profit;
        run.profit_split =
            evaluate_policy(inst, quantities(decide(own, inst.data, inst.economics, k_max)), opt).average_profit;
        out[cell].push_back(run);
      }
    } catch (const std::exception& e) {
      for (double b : cfg.fixed_costs) {
        GroupingRun run = base;
        run.fixed_cost = b;
        run.status = e.what();
        out[cell].push_back(run);
      }
    }
  });
  std::vector<GroupingRun> runs;
  for (auto& c : out) runs.insert(runs.end(), c.begin(), c.end());
  return runs;
}

/// Per-cutoff average profit of the designated group and the share of runs that split.
inline std::vector<GroupingRow> summarize_grouping(const std::vector<GroupingRun>& runs,
                                                   const std::vector<double>& cutoffs) {
  std::vector<const GroupingRun*> ok;
  for (const auto& r : runs)
    if (r.status == "ok") ok.push_back(&r);
  std::vector<GroupingRow> rows;
  for (double c : cutoffs) {
    GroupingRow row;
    row.cutoff = c;
    row.runs = static_cast<int>(ok.size());
    if (ok.empty()) {
      rows.push_back(row);
      continue;
    }
    std::size_t splits = 0;
    for (const auto* r : ok) {
      const bool s = split_at(r->p_value, c);
      row.avg_profit += s ? r->profit_split : r->profit_pooled;
      splits += s ? 1 : 0;
    }
    row.avg_profit /= static_cast<double>(ok.size());
    row.split_proportion = static_cast<double>(splits) / static_cast<double>(ok.size());
    rows.push_back(row);
  }
  if (rows.empty() || ok.empty()) return rows;
  const auto best = std::max_element(rows.begin(), rows.end(),
                                     [](const GroupingRow& a, const GroupingRow& b) { return a.avg_profit < b.avg_profit; });
  const double best_cut = best->cutoff;
  for (auto& row : rows) {
    std::vector<double> diff;
    for (const auto* r : ok) {
      const bool sb = split_at(r->p_value, best_cut), sc = split_at(r->p_value, row.cutoff);
      if (sb == sc) continue;
      diff.push_back((sb ? r->profit_split : r->profit_pooled) - (sc ? r->profit_split : r->profit_pooled));
    }
    row.changed = static_cast<int>(diff.size());
    std::tie(row.reduction_vs_best, row.se_reduction) = detail::mean_se(diff);
  }
  return rows;
}

inline std::vector<GroupingRow> grouping_experiment(const GroupingConfig& cfg) {
  return summarize_grouping(grouping_runs(cfg), cfg.cutoffs);
}

}  // namespace ebinv

// Command-line front end: fit, decide, simulate, group-test, instability-demo, ingest.
//
// Exit codes: 0 success, 2 configuration error, 3 data or I/O error, 4 numeric failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ebinv/ebinv.hpp"

using namespace ebinv;

namespace {

/// Writes to a file when a path is given, otherwise to standard output.
class Sink {
public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw DataError("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void close() {
    stream().flush();
    if (!stream()) throw DataError("write failed");
  }

private:
  std::unique_ptr<std::ofstream> file_;
};

/// Every output records the resolved configuration; the thread count is left out because it
/// never changes results.
void write_config_line(std::ostream& out, const Json& config) { out << "# config: " << config.dump() << '\n'; }

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

Json histogram_json(const CountHistogram& h) {
  return Json{{"items", h.total()}, {"distinct", h.distinct()}, {"mean", h.mean()}, {"max", h.max_value()}};
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

MarginalKind parse_marginal(const std::string& s) {
  if (s == "spline") return MarginalKind::spline;
  if (s == "empirical") return MarginalKind::empirical;
  throw ConfigError("unknown marginal '" + s + "' (expected spline or empirical)");
}

template <class T>
Json list_json(const std::vector<T>& v) {
  Json j = Json::array();
  for (const auto& x : v) j.push_back(x);
  return j;
}

// fit

struct FitArgs {
  std::string data, out, method = "g";
  double horizon = 1.0, eps = 1e-6;
  int max_iter = 300;
  std::vector<double> knots;
};

void cmd_fit(const FitArgs& a) {
  const auto ds = load_dataset(a.data, a.horizon);
  const auto hist = build_histogram(ds.data);
  Json config{{"command", "fit"}, {"data", a.data}, {"horizon", a.horizon}, {"method", a.method}};
  Json estimate;
  if (a.method == "g") {
    NpmleOptions o;
    o.eps = a.eps;
    o.max_iter = a.max_iter;
    config["eps"] = a.eps;
    config["max_iter"] = a.max_iter;
    estimate = to_json(fit_npmle(hist, o));
  } else if (a.method == "f-spline") {
    SplineFitOptions o;
    o.knots = a.knots;
    config["knots"] = a.knots.empty() ? list_json(default_knots(hist)) : list_json(a.knots);
    estimate = to_json(fit_spline_marginal(hist, o));
  } else if (a.method == "f-empirical") {
    estimate = to_json(MarginalEstimate::empirical(hist));
  } else {
    throw ConfigError("unknown fit method '" + a.method + "' (expected g, f-spline or f-empirical)");
  }
  Json doc{{"config", config}, {"data", histogram_json(hist)}, {"estimate", estimate}};
  Sink sink(a.out);
  sink.stream() << doc.dump(2) << '\n';
  sink.close();
}

// decide

struct DecideArgs {
  std::string data, out, method = "g", marginal = "spline", estimate;
  double horizon = 1.0;
  std::optional<double> price, unit_cost, fixed_cost;
  std::optional<std::int64_t> k_max;
  double eps = 1e-6;
};

FittedMethod load_fitted(Method method, const std::string& path, double horizon) {
  auto j = read_json_file(path);
  if (j.contains("estimate")) j = j["estimate"];
  FittedMethod f;
  f.method = method;
  f.horizon = horizon;
  if (method == Method::g) {
    NpmleFit fit;
    fit.mixture = mixture_from_json(j);
    f.npmle = fit;
  } else if (method == Method::plugin || method == Method::f_full) {
    f.marginal = marginal_from_json(j);
    if (f.marginal->horizon() != horizon) throw ConfigError("estimate horizon differs from --horizon");
  } else {
    throw ConfigError("the naive method takes no estimate");
  }
  return f;
}

void cmd_decide(const DecideArgs& a) {
  const auto ds = load_dataset(a.data, a.horizon);
  const auto hist = build_histogram(ds.data);
  const auto method = parse_method(a.method);
  const auto econ = item_economics(ds, a.price.value_or(1.0), a.unit_cost, a.fixed_cost.value_or(0.0));
  const auto k_max = a.k_max.value_or(default_k_max(hist));
  if (k_max < 0) throw ConfigError("k_max must be non-negative");

  Json config{{"command", "decide"}, {"data", a.data},       {"horizon", a.horizon},
              {"method", a.method},  {"k_max", k_max}};
  FittedMethod fitted;
  if (!a.estimate.empty()) {
    config["estimate"] = a.estimate;
    fitted = load_fitted(method, a.estimate, a.horizon);
  } else {
    MethodOptions opts;
    opts.marginal = parse_marginal(a.marginal);
    opts.npmle.eps = a.eps;
    if (method == Method::plugin || method == Method::f_full) config["marginal"] = a.marginal;
    if (method == Method::g) config["eps"] = a.eps;
    fitted = fit_method(method, hist, opts);
  }
  if (!ds.price) config["price"] = a.price.value_or(1.0);
  if (!ds.unit_cost) config["unit_cost"] = *a.unit_cost;
  if (!ds.fixed_cost) config["fixed_cost"] = a.fixed_cost.value_or(0.0);

  const auto decisions = decide(fitted, ds.data, econ, k_max);
  const bool realized = ds.future_demand.has_value();
  Sink sink(a.out);
  auto& out = sink.stream();
  write_config_line(out, config);
  out << "item_id,demand,quantity,expected_profit,status";
  if (realized) out << ",realized_profit";
  out << '\n';
  double est_total = 0.0, real_total = 0.0;
  std::size_t stocked = 0, failed = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const auto& d = decisions[i];
    est_total += d.estimated_profit;
    stocked += d.quantity > 0 ? 1 : 0;
    failed += d.failure.empty() ? 0 : 1;
    std::string status = d.failure.empty() ? "ok" : d.failure;
    std::replace(status.begin(), status.end(), ',', ';');
    out << ds.ids[i] << ',' << ds.data.counts[i] << ',' << d.quantity << ',' << format_double(d.estimated_profit)
        << ',' << status;
    if (realized) {
      const std::int64_t q = d.quantity, xi = (*ds.future_demand)[i];
      const double p = q > 0 ? econ[i].revenue * static_cast<double>(std::min(q, xi)) -
                                   econ[i].unit_cost * static_cast<double>(q) - econ[i].fixed_cost
                             : 0.0;
      real_total += p;
      out << ',' << format_double(p);
    }
    out << '\n';
  }
  sink.close();
  std::cerr << "items " << decisions.size() << ", stocked " << stocked << ", unavailable " << failed
            << ", estimated total profit " << format_fixed(est_total, 6);
  if (realized) std::cerr << ", realized total profit " << format_fixed(real_total, 6);
  std::cerr << '\n';
}

// simulate

struct SimulateArgs {
  std::string preset = "desk", out, summary, ordering, marginal = "spline";
  std::vector<std::size_t> sizes;
  std::vector<double> scales, fixed_costs;
  std::vector<std::string> methods;
  std::optional<int> reps;
  std::uint64_t seed = 1;
  double shape = 1.8, horizon = 1.0;
  int threads = 1;
};

BenchmarkConfig benchmark_preset(const std::string& name) {
  BenchmarkConfig c;
  if (name == "desk") return c;
  if (name == "full") {
    c.sizes = {50, 100, 250, 500, 1000, 5000, 10000, 25000, 50000};
    c.fixed_costs = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    c.replications = 50;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk or full)");
}

void cmd_simulate(const SimulateArgs& a) {
  auto cfg = benchmark_preset(a.preset);
  if (!a.sizes.empty()) cfg.sizes = a.sizes;
  if (!a.scales.empty()) cfg.scales = a.scales;
  if (!a.fixed_costs.empty()) cfg.fixed_costs = a.fixed_costs;
  if (!a.methods.empty()) cfg.methods = parse_methods(a.methods);
  if (a.reps) cfg.replications = *a.reps;
  cfg.seed = a.seed;
  cfg.shape = a.shape;
  cfg.horizon = a.horizon;
  cfg.method_options.marginal = parse_marginal(a.marginal);
  if (a.threads < 1) throw ConfigError("--threads must be at least 1");
  cfg.threads = a.threads;
  cfg.validate();

  std::vector<std::string> method_names;
  for (auto m : cfg.methods) method_names.emplace_back(to_string(m));
  const Json config{{"command", "simulate"},
                    {"preset", a.preset},
                    {"sizes", list_json(cfg.sizes)},
                    {"scales", list_json(cfg.scales)},
                    {"fixed_costs", list_json(cfg.fixed_costs)},
                    {"methods", list_json(method_names)},
                    {"replications", cfg.replications},
                    {"seed", cfg.seed},
                    {"shape", cfg.shape},
                    {"horizon", cfg.horizon},
                    {"marginal", a.marginal},
                    {"revenue", cfg.economics.revenue},
                    {"unit_cost_range", {cfg.economics.cost_lo, cfg.economics.cost_hi}}};
  // open every sink before the long run so bad paths fail fast
  Sink rows_sink(a.out);
  std::optional<Sink> summary_sink, ordering_sink;
  if (!a.summary.empty()) summary_sink.emplace(a.summary);
  if (!a.ordering.empty()) ordering_sink.emplace(a.ordering);

  const auto rows = run_benchmark(cfg);

  auto& out = rows_sink.stream();
  write_config_line(out, config);
  out << "method,n,beta,b,replication,avg_profit,opt_avg_profit,gap_pct,pct_items_stocked,avg_stock_given_positive,"
         "status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    out << to_string(r.method) << ',' << r.n << ',' << format_double(r.scale) << ',' << format_double(r.fixed_cost)
        << ',' << r.replication << ',' << format_double(r.avg_profit) << ',' << format_double(r.opt_avg_profit) << ','
        << opt_text(r.gap_pct) << ',' << format_double(r.pct_stocked) << ','
        << format_double(r.avg_stock_given_positive) << ',' << status << '\n';
  }
  rows_sink.close();

  if (summary_sink) {
    auto& s = summary_sink->stream();
    write_config_line(s, config);
    s << "method,n,beta,b,runs,failures,mean_profit,se_profit,mean_opt_profit,gap_runs,mean_gap_pct,se_gap_pct,"
         "mean_pct_items_stocked,mean_stock_given_positive\n";
    for (const auto& r : summarize(rows))
      s << to_string(r.method) << ',' << r.n << ',' << format_double(r.scale) << ',' << format_double(r.fixed_cost)
        << ',' << r.replications << ',' << r.failures << ',' << format_double(r.mean_profit) << ','
        << format_double(r.se_profit) << ',' << format_double(r.mean_opt_profit) << ',' << r.gap_count << ','
        << format_double(r.mean_gap) << ',' << format_double(r.se_gap) << ',' << format_double(r.mean_pct_stocked)
        << ',' << format_double(r.mean_stock_given_positive) << '\n';
    summary_sink->close();
  }
  if (ordering_sink) {
    auto& s = ordering_sink->stream();
    write_config_line(s, config);
    s << "n,beta,b,better,worse,pairs,mean_gap_diff,se_gap_diff,holds\n";
    const std::pair<Method, Method> comparisons[] = {
        {Method::g, Method::plugin}, {Method::plugin, Method::naive}, {Method::g, Method::naive}};
    for (auto [better, worse] : comparisons)
      for (const auto& o : paired_ordering(rows, better, worse)) {
        if (o.pairs == 0) continue;
        s << o.n << ',' << format_double(o.scale) << ',' << format_double(o.fixed_cost) << ',' << to_string(o.better)
          << ',' << to_string(o.worse) << ',' << o.pairs << ',' << format_double(o.mean_diff) << ','
          << format_double(o.se_diff) << ',' << (o.holds ? "yes" : "no") << '\n';
      }
    ordering_sink->close();
  }
}

// group-test

struct GroupTestArgs {
  std::string group0, group1, out, preset = "desk";
  double horizon = 1.0, cutoff = 0.05;
  std::size_t K = 5, K0 = 3;
  std::uint64_t seed = 0x5eed;
  bool experiment = false;
  std::vector<std::size_t> n0;
  std::vector<double> fractions, beta0, multipliers, fixed_costs, cutoffs;
  std::optional<int> reps;
  int threads = 1;
};

void cmd_group_test_files(const GroupTestArgs& a) {
  if (a.group0.empty() || a.group1.empty()) throw ConfigError("--group0 and --group1 are required");
  const auto h0 = build_histogram(load_dataset(a.group0, a.horizon).data);
  const auto h1 = build_histogram(load_dataset(a.group1, a.horizon).data);
  KAtomOptions opts;
  opts.seed = a.seed;
  const auto r = lr_test(h0, h1, a.K, a.cutoff, a.K0, opts);
  if (r.clamped) std::cerr << "warning: negative statistic " << format_double(r.raw_statistic) << " clamped to 0\n";
  const Json config{{"command", "group-test"}, {"group0", a.group0}, {"group1", a.group1}, {"horizon", a.horizon},
                    {"K", a.K},                {"K0", a.K0},         {"cutoff", a.cutoff}, {"seed", a.seed}};
  const Json doc{{"config", config}, {"group0", histogram_json(h0)}, {"group1", histogram_json(h1)},
                 {"result", to_json(r)}};
  Sink sink(a.out);
  sink.stream() << doc.dump(2) << '\n';
  sink.close();
}

void cmd_group_test_experiment(const GroupTestArgs& a) {
  GroupingConfig base;
  std::vector<std::size_t> n0s{1000};
  std::vector<double> fractions{0.2}, beta0s{2.0, 4.0, 8.0};
  base.replications = 5;
  if (a.preset == "full") {
    n0s = {1000, 5000, 10000};
    fractions = {0.1, 0.2, 0.5};
    base.replications = 30;
  } else if (a.preset != "desk") {
    throw ConfigError("unknown preset '" + a.preset + "' (expected desk or full)");
  }
  if (!a.n0.empty()) n0s = a.n0;
  if (!a.fractions.empty()) fractions = a.fractions;
  if (!a.beta0.empty()) beta0s = a.beta0;
  if (!a.multipliers.empty()) base.multipliers = a.multipliers;
  if (!a.fixed_costs.empty()) base.fixed_costs = a.fixed_costs;
  if (!a.cutoffs.empty()) base.cutoffs = a.cutoffs;
  if (a.reps) base.replications = *a.reps;
  if (a.threads < 1) throw ConfigError("--threads must be at least 1");
  base.K = a.K;
  base.K0 = a.K0;
  base.threads = a.threads;
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("group fractions must lie in (0, 1]");

  const Json config{{"command", "group-test"},
                    {"experiment", true},
                    {"preset", a.preset},
                    {"n0", list_json(n0s)},
                    {"fractions", list_json(fractions)},
                    {"beta0", list_json(beta0s)},
                    {"multipliers", list_json(base.multipliers)},
                    {"fixed_costs", list_json(base.fixed_costs)},
                    {"cutoffs", list_json(base.cutoffs)},
                    {"replications", base.replications},
                    {"K", base.K},
                    {"K0", base.K0},
                    {"seed", a.seed}};
  Sink sink(a.out);
  auto& out = sink.stream();
  write_config_line(out, config);
  out << "n0,n1,cutoff,runs,avg_profit,split_proportion,changed,reduction_vs_best,se_reduction\n";
  std::uint64_t seed_state = a.seed;
  for (auto n0 : n0s)
    for (double f : fractions) {
      const auto n1 = static_cast<std::size_t>(std::llround(f * static_cast<double>(n0)));
      // runs from every beta0 enter one table per group-size pairing
      std::vector<GroupingRun> runs;
      for (double b0 : beta0s) {
        GroupingConfig cfg = base;
        cfg.n0 = n0;
        cfg.n1 = std::max<std::size_t>(1, n1);
        cfg.beta0 = b0;
        cfg.seed = splitmix64(seed_state);
        const auto part = grouping_runs(cfg);
        runs.insert(runs.end(), part.begin(), part.end());
      }
      for (const auto& r : summarize_grouping(runs, base.cutoffs))
        out << n0 << ',' << n1 << ',' << format_double(r.cutoff) << ',' << r.runs << ',' << format_double(r.avg_profit)
            << ',' << format_double(r.split_proportion) << ',' << r.changed << ','
            << format_double(r.reduction_vs_best) << ',' << format_double(r.se_reduction) << '\n';
    }
  sink.close();
}

// instability-demo

struct InstabilityArgs {
  double alpha = 2.0, theta = 2.0, horizon = 1.0;
  std::int64_t x = 8, k_max = 15;
  int decimals = 6;
  std::string out;
};

void cmd_instability_demo(const InstabilityArgs& a) {
  if (a.decimals < 0 || a.decimals > 17) throw ConfigError("--decimals must lie in [0, 17]");
  const auto rows = instability_table({a.alpha, a.theta}, a.x, a.k_max, a.horizon);
  const Json config{{"command", "instability-demo"}, {"alpha", a.alpha}, {"theta", a.theta},
                    {"x", a.x},                      {"k_max", a.k_max}, {"horizon", a.horizon}};
  Sink sink(a.out);
  auto& out = sink.stream();
  write_config_line(out, config);
  out << "k,exact,generalized_robbins\n";
  for (const auto& r : rows)
    out << r.k << ',' << format_fixed(r.exact, a.decimals) << ',' << format_fixed(r.estimate, a.decimals) << '\n';
  sink.close();
}

// ingest

struct IngestArgs {
  std::string data, out, histogram;
  double horizon = 1.0;
  std::optional<double> revenue_factor, cost_factor, fixed_cost;
};

void cmd_ingest(const IngestArgs& a) {
  auto ds = load_dataset(a.data, a.horizon);
  if (a.revenue_factor || a.cost_factor) {
    if (!ds.price) throw DataError(a.data + ": price factors need a price column");
    if (!a.revenue_factor || !a.cost_factor) throw ConfigError("--revenue-factor and --cost-factor go together");
    if (!(*a.revenue_factor > 0.0) || !(*a.cost_factor >= 0.0)) throw ConfigError("price factors must be non-negative");
    std::vector<double> cost(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      cost[i] = *a.cost_factor * (*ds.price)[i];
      (*ds.price)[i] *= *a.revenue_factor;
    }
    ds.unit_cost = std::move(cost);
  }
  if (a.fixed_cost) {
    if (!(*a.fixed_cost >= 0.0)) throw ConfigError("fixed cost must be non-negative");
    ds.fixed_cost = std::vector<double>(ds.size(), *a.fixed_cost);
  }
  const auto hist = build_histogram(ds.data);
  Sink sink(a.out);
  write_dataset_csv(sink.stream(), ds);
  sink.close();
  if (!a.histogram.empty()) {
    Sink hs(a.histogram);
    hs.stream() << "value,frequency\n";
    for (const auto& b : hist.bins()) hs.stream() << b.value << ',' << b.frequency << '\n';
    hs.close();
  }
  std::cerr << "items " << hist.total() << ", distinct counts " << hist.distinct() << ", mean "
            << format_fixed(hist.mean(), 4) << ", max " << hist.max_value() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical Bayes inventory decisions for many low-demand items"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ebinv 1.0.0");

  FitArgs fit;
  auto* sc_fit = app.add_subcommand("fit", "Estimate the count marginal or the rate mixture from a dataset");
  sc_fit->add_option("--data", fit.data, "Dataset CSV")->required();
  sc_fit->add_option("--horizon,-T", fit.horizon, "Observation horizon T")->capture_default_str();
  sc_fit->add_option("--method", fit.method, "g | f-spline | f-empirical")->capture_default_str();
  sc_fit->add_option("--eps", fit.eps, "NPMLE certificate tolerance")->capture_default_str();
  sc_fit->add_option("--max-iter", fit.max_iter, "NPMLE iteration cap")->capture_default_str();
  sc_fit->add_option("--knots", fit.knots, "Spline knots (default: count quantiles)")->delimiter(',');
  sc_fit->add_option("--out,-o", fit.out, "Output JSON (default stdout)");

  DecideArgs dec;
  auto* sc_dec = app.add_subcommand("decide", "Per-item stocking decisions");
  sc_dec->add_option("--data", dec.data, "Dataset CSV")->required();
  sc_dec->add_option("--horizon,-T", dec.horizon, "Observation horizon T")->capture_default_str();
  sc_dec->add_option("--method", dec.method, "naive | plugin | f-full | g")->capture_default_str();
  sc_dec->add_option("--marginal", dec.marginal, "Marginal for plugin and f-full: spline | empirical")
      ->capture_default_str();
  sc_dec->add_option("--estimate", dec.estimate, "Reuse a JSON estimate written by fit");
  sc_dec->add_option("--eps", dec.eps, "NPMLE certificate tolerance")->capture_default_str();
  sc_dec->add_option("--price", dec.price, "Revenue per unit when the dataset has no price column (default 1)");
  sc_dec->add_option("--unit-cost", dec.unit_cost, "Unit cost when the dataset has no unit_cost column");
  sc_dec->add_option("--fixed-cost", dec.fixed_cost, "Fixed cost when the dataset has no fixed_cost column (default 0)");
  sc_dec->add_option("--k-max", dec.k_max, "Truncation of predictive pmfs");
  sc_dec->add_option("--out,-o", dec.out, "Output CSV (default stdout)");

  SimulateArgs sim;
  auto* sc_sim = app.add_subcommand("simulate", "Monte Carlo comparison of the estimation methods");
  sc_sim->add_option("--preset", sim.preset, "desk | full")->capture_default_str();
  sc_sim->add_option("--sizes", sim.sizes, "Numbers of items")->delimiter(',');
  sc_sim->add_option("--scales", sim.scales, "Weibull scale parameters")->delimiter(',');
  sc_sim->add_option("--fixed-costs", sim.fixed_costs, "Fixed costs b")->delimiter(',');
  sc_sim->add_option("--methods", sim.methods, "Subset of naive,plugin,f-full,g")->delimiter(',');
  sc_sim->add_option("--reps", sim.reps, "Replications per cell");
  sc_sim->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  sc_sim->add_option("--shape", sim.shape, "Weibull shape")->capture_default_str();
  sc_sim->add_option("--horizon,-T", sim.horizon, "Observation horizon T")->capture_default_str();
  sc_sim->add_option("--marginal", sim.marginal, "Marginal for plugin and f-full")->capture_default_str();
  sc_sim->add_option("--threads", sim.threads, "Worker threads (results do not depend on it)")->capture_default_str();
  sc_sim->add_option("--out,-o", sim.out, "Per-replication CSV (default stdout)");
  sc_sim->add_option("--summary", sim.summary, "Per-cell summary CSV");
  sc_sim->add_option("--ordering", sim.ordering, "Paired method-ordering CSV");

  GroupTestArgs grp;
  auto* sc_grp = app.add_subcommand("group-test", "Likelihood-ratio test for splitting two groups of items");
  sc_grp->add_option("--group0", grp.group0, "Dataset CSV of the first group");
  sc_grp->add_option("--group1", grp.group1, "Dataset CSV of the second group");
  sc_grp->add_option("--horizon,-T", grp.horizon, "Observation horizon T")->capture_default_str();
  sc_grp->add_option("--K", grp.K, "Atoms in the fitted mixtures")->capture_default_str();
  sc_grp->add_option("--K0", grp.K0, "Atoms before the local search")->capture_default_str();
  sc_grp->add_option("--cutoff", grp.cutoff, "Split when the p-value is below this")->capture_default_str();
  sc_grp->add_option("--seed", grp.seed, "Seed for restarts or the experiment")->capture_default_str();
  sc_grp->add_flag("--experiment", grp.experiment, "Run the simulated grouping experiment instead");
  sc_grp->add_option("--preset", grp.preset, "Experiment grid: desk | full")->capture_default_str();
  sc_grp->add_option("--n0", grp.n0, "Experiment: larger group sizes")->delimiter(',');
  sc_grp->add_option("--fractions", grp.fractions, "Experiment: smaller group size as a fraction of n0")
      ->delimiter(',');
  sc_grp->add_option("--beta0", grp.beta0, "Experiment: Weibull scales of the larger group")->delimiter(',');
  sc_grp->add_option("--multipliers", grp.multipliers, "Experiment: beta1 / beta0")->delimiter(',');
  sc_grp->add_option("--fixed-costs", grp.fixed_costs, "Experiment: fixed costs b")->delimiter(',');
  sc_grp->add_option("--cutoffs", grp.cutoffs, "Experiment: p-value cutoffs")->delimiter(',');
  sc_grp->add_option("--reps", grp.reps, "Experiment: replications per cell");
  sc_grp->add_option("--threads", grp.threads, "Experiment: worker threads")->capture_default_str();
  sc_grp->add_option("--out,-o", grp.out, "Output (default stdout)");

  InstabilityArgs ins;
  auto* sc_ins = app.add_subcommand("instability-demo", "Exact posterior next to the generalized Robbins estimate");
  sc_ins->add_option("--alpha", ins.alpha, "Gamma prior shape")->capture_default_str();
  sc_ins->add_option("--theta", ins.theta, "Gamma prior scale")->capture_default_str();
  sc_ins->add_option("--x", ins.x, "Observed count")->capture_default_str();
  sc_ins->add_option("--k-max", ins.k_max, "Largest k shown")->capture_default_str();
  sc_ins->add_option("--horizon,-T", ins.horizon, "Observation horizon T")->capture_default_str();
  sc_ins->add_option("--decimals", ins.decimals, "Printed decimals")->capture_default_str();
  sc_ins->add_option("--out,-o", ins.out, "Output CSV (default stdout)");

  IngestArgs ing;
  auto* sc_ing = app.add_subcommand("ingest", "Validate a dataset and write it in canonical form");
  sc_ing->add_option("--data", ing.data, "Dataset CSV")->required();
  sc_ing->add_option("--horizon,-T", ing.horizon, "Observation horizon T")->capture_default_str();
  sc_ing->add_option("--revenue-factor", ing.revenue_factor, "Revenue = factor x list price");
  sc_ing->add_option("--cost-factor", ing.cost_factor, "Unit cost = factor x list price");
  sc_ing->add_option("--fixed-cost", ing.fixed_cost, "Fixed cost for every item");
  sc_ing->add_option("--histogram", ing.histogram, "Also write value,frequency CSV here");
  sc_ing->add_option("--out,-o", ing.out, "Canonical dataset CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sc_fit) cmd_fit(fit);
    else if (*sc_dec) cmd_decide(dec);
    else if (*sc_sim) cmd_simulate(sim);
    else if (*sc_grp) grp.experiment ? cmd_group_test_experiment(grp) : cmd_group_test_files(grp);
    else if (*sc_ins) cmd_instability_demo(ins);
    else if (*sc_ing) cmd_ingest(ing);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

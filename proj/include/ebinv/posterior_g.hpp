#pragma once

// g-modelling: nonparametric MLE of the rate mixing distribution by a fully
// corrective conditional-gradient method, and posteriors from a fitted mixture.

#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Dense>

#include <optional>

#include "ebinv/detail/simplex_qp.hpp"
#include "ebinv/mixture.hpp"

namespace ebinv {

/// Sum_s y_s log f(s) with f the Poisson mixture marginal (factorials included).
/// Returns -inf when some observed count has zero mixture mass.
inline double mixture_log_likelihood(const DiscreteMixture& mix, const CountHistogram& hist) {
  double ll = 0.0;
  for (const auto& bin : hist.bins()) {
    const double lf = mix.log_marginal(bin.value, hist.horizon());
    if (lf == kNegInf) return kNegInf;
    ll += static_cast<double>(bin.frequency) * lf;
  }
  return ll;
}

/// min(|S|, ceil((s* + 2) / 2)): support size of an exact NPMLE.
inline std::size_t npmle_support_bound(const CountHistogram& hist) {
  const auto half = static_cast<std::size_t>((hist.max_value() + 3) / 2);
  return std::min(hist.distinct(), half);
}

struct SubproblemResult {
  double lambda = 0.0;
  /// Sum_s w_s (lambda T)^s exp(-lambda T) at the maximiser.
  double value = 0.0;
};

namespace detail {

inline double subproblem_log_objective(std::span<const std::int64_t> values, std::span<const double> log_weights,
                                       double mu) {
  double hi = kNegInf;
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double e = static_cast<double>(values[i]);
    const double lp = (e == 0.0) ? 0.0 : (mu == 0.0 ? kNegInf : e * std::log(mu));
    terms[i] = log_weights[i] + lp - mu;
    hi = std::max(hi, terms[i]);
  }
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

// Golden-section maximisation of a unimodal-on-bracket function.
template <class F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 300 && (b - a) > tol; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace detail

/// Maximises sum_s w_s (lambda T)^s exp(-lambda T) over lambda in [0, s*/T], with
/// w_s = exp(log_weights[s]). Grid of 2048 points, best 5 local maxima refined.
inline SubproblemResult cg_subproblem(std::span<const std::int64_t> values, std::span<const double> log_weights,
                                      double horizon = 1.0) {
  if (values.size() != log_weights.size() || values.empty())
    throw ConfigError("cg_subproblem needs one weight per observed value");
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  const double s_max = static_cast<double>(*std::max_element(values.begin(), values.end()));
  auto objective = [&](double mu) { return detail::subproblem_log_objective(values, log_weights, mu); };
  if (s_max == 0.0) return {0.0, std::exp(objective(0.0))};

  constexpr int kGrid = 2048;
  std::vector<double> grid(kGrid), val(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    grid[i] = s_max * i / (kGrid - 1);
    val[i] = objective(grid[i]);
  }
  std::vector<int> peaks;
  for (int i = 0; i < kGrid; ++i) {
    const bool left = i == 0 || val[i] >= val[i - 1];
    const bool right = i == kGrid - 1 || val[i] >= val[i + 1];
    if (left && right) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) { return val[a] > val[b]; });
  if (peaks.size() > 5) peaks.resize(5);

  double best_mu = grid[peaks.front()], best_val = val[peaks.front()];
  const double tol = 1e-10 * std::max(1.0, s_max);
  for (int i : peaks) {
    const double lo = grid[std::max(0, i - 1)], hi = grid[std::min(kGrid - 1, i + 1)];
    auto [mu, v] = detail::golden_max(objective, lo, hi, tol);
    if (v > best_val) {
      best_val = v;
      best_mu = mu;
    }
  }
  return {best_mu / horizon, std::exp(best_val)};
}

/// Plain-weight overload.
inline SubproblemResult cg_subproblem_weights(std::span<const std::int64_t> values, std::span<const double> weights,
                                              double horizon = 1.0) {
  std::vector<double> lw(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw ConfigError("subproblem weights must be non-negative");
    lw[i] = weights[i] > 0.0 ? std::log(weights[i]) : kNegInf;
  }
  return cg_subproblem(values, lw, horizon);
}

struct WeightFit {
  DiscreteMixture mixture;
  /// max_j (g_j - 1)_+ over all atoms and |g_j - 1| over retained atoms, g the gradient of h.
  double kkt_residual = 0.0;
  int iterations = 0;
};

namespace detail {

// Row-scaled kernel: A(s, j) = (lambda_j T)^s exp(-lambda_j T) / max_j(...); row_log_scale holds the maxima.
struct Kernel {
  Eigen::MatrixXd a;
  Eigen::VectorXd row_log_scale;
  Eigen::VectorXd weight;  // y_s / n
};

inline Kernel build_kernel(const std::vector<double>& atoms, const CountHistogram& hist) {
  const auto rows = static_cast<Eigen::Index>(hist.distinct());
  const auto cols = static_cast<Eigen::Index>(atoms.size());
  Kernel k{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows), Eigen::VectorXd(rows)};
  const double n = static_cast<double>(hist.total());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& bin = hist.bins()[static_cast<std::size_t>(r)];
    const double s = static_cast<double>(bin.value);
    std::vector<double> lp(atoms.size());
    double hi = kNegInf;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double mu = atoms[static_cast<std::size_t>(c)] * hist.horizon();
      lp[static_cast<std::size_t>(c)] = (s == 0.0 ? 0.0 : (mu == 0.0 ? kNegInf : s * std::log(mu))) - mu;
      hi = std::max(hi, lp[static_cast<std::size_t>(c)]);
    }
    k.row_log_scale[r] = hi;
    for (Eigen::Index c = 0; c < cols; ++c)
      k.a(r, c) = hi == kNegInf ? 0.0 : std::exp(lp[static_cast<std::size_t>(c)] - hi);
    k.weight[r] = static_cast<double>(bin.frequency) / n;
  }
  return k;
}

// h(p) = sum_s (y_s/n) log v(s), v in (lambda T)^s exp(-lambda T) units.
inline double restricted_objective(const Kernel& k, const Eigen::VectorXd& p) {
  const Eigen::VectorXd v = k.a * p;
  double h = 0.0;
  for (Eigen::Index r = 0; r < v.size(); ++r) {
    if (!(v[r] > 0.0)) return kNegInf;
    h += k.weight[r] * (std::log(v[r]) + k.row_log_scale[r]);
  }
  return h;
}

inline Eigen::VectorXd restricted_gradient(const Kernel& k, const Eigen::VectorXd& p) {
  const Eigen::VectorXd v = k.a * p;
  return k.a.transpose() * k.weight.cwiseQuotient(v);
}

inline double kkt_residual(const Eigen::VectorXd& g, const Eigen::VectorXd& p) {
  double res = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    res = std::max(res, g[j] - 1.0);
    if (p[j] > 1e-12) res = std::max(res, std::abs(g[j] - 1.0));
  }
  return res;
}

}  // namespace detail

/// Maximises the restricted log-likelihood over simplex weights on a fixed support
/// by constrained Newton steps (simplex QP on the quadratic model plus a backtracking line search).
inline WeightFit reoptimize_weights(std::vector<double> support, const CountHistogram& hist,
                                    std::optional<std::vector<double>> warm_start = std::nullopt,
                                    double kkt_tol = 1e-9, int max_iter = 500) {
  if (support.empty()) throw ConfigError("reoptimize_weights needs a non-empty support");
  if (hist.empty()) throw DataError("reoptimize_weights needs data");
  std::vector<double> start;
  if (warm_start && warm_start->size() == support.size()) start = *warm_start;
  else start.assign(support.size(), 1.0);
  {
    std::vector<std::size_t> order(support.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return support[a] < support[b]; });
    std::vector<double> s2, w2;
    for (auto i : order) {
      if (!(support[i] >= 0.0) || !std::isfinite(support[i])) throw ConfigError("support atoms must be finite and >= 0");
      if (!s2.empty() && support[i] == s2.back()) {
        w2.back() += start[i];
        continue;
      }
      s2.push_back(support[i]);
      w2.push_back(start[i]);
    }
    support = std::move(s2);
    start = std::move(w2);
  }

  const auto kernel = detail::build_kernel(support, hist);
  const auto m = static_cast<Eigen::Index>(support.size());
  Eigen::VectorXd p(m);
  double total = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) total += std::max(0.0, start[static_cast<std::size_t>(j)]);
  for (Eigen::Index j = 0; j < m; ++j)
    p[j] = total > 0.0 ? std::max(0.0, start[static_cast<std::size_t>(j)]) / total : 1.0 / static_cast<double>(m);
  double h = detail::restricted_objective(kernel, p);
  if (h == kNegInf) {
    p.setConstant(1.0 / static_cast<double>(m));
    h = detail::restricted_objective(kernel, p);
    if (h == kNegInf) throw NumericError("support cannot explain every observed count");
  }

  const Eigen::VectorXd sqrt_w = kernel.weight.cwiseSqrt();
  int it = 0;
  double kkt = 0.0;
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd v = kernel.a * p;
    const Eigen::VectorXd g = kernel.a.transpose() * kernel.weight.cwiseQuotient(v);
    kkt = detail::kkt_residual(g, p);
    if (kkt <= kkt_tol) break;

    // Newton model: min ||M q - 2 sqrt(w)||^2 over the simplex, M = diag(sqrt(w)/v) A.
    Eigen::MatrixXd s = kernel.a;
    for (Eigen::Index r = 0; r < s.rows(); ++r) s.row(r) *= sqrt_w[r] / v[r];
    const Eigen::VectorXd pi = detail::simplex_least_squares(s, 2.0 * sqrt_w, p);
    const Eigen::VectorXd d = pi - p;
    const double slope = g.dot(d);
    if (!(slope > 0.0)) break;

    double alpha = 1.0, h_new = kNegInf;
    Eigen::VectorXd trial;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      trial = p + alpha * d;
      h_new = detail::restricted_objective(kernel, trial);
      if (h_new >= h + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Armijo cannot resolve progress below rounding; take the step only if it does not lose.
      trial = p + d;
      h_new = detail::restricted_objective(kernel, trial);
      if (!(h_new >= h)) break;
    }
    for (Eigen::Index j = 0; j < m; ++j) trial[j] = std::max(0.0, trial[j]);
    trial /= trial.sum();
    p = trial;
    h = detail::restricted_objective(kernel, p);
  }

  std::vector<double> atoms, weights;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (p[j] >= 1e-12) {
      atoms.push_back(support[static_cast<std::size_t>(j)]);
      weights.push_back(p[j]);
    }
  }
  WeightFit fit{DiscreteMixture::normalized(std::move(atoms), std::move(weights)), 0.0, it};
  const auto pruned = detail::build_kernel(fit.mixture.atoms(), hist);
  const Eigen::VectorXd pw = Eigen::Map<const Eigen::VectorXd>(fit.mixture.weights().data(),
                                                               static_cast<Eigen::Index>(fit.mixture.size()));
  fit.kkt_residual = detail::kkt_residual(detail::restricted_gradient(pruned, pw), pw);
  return fit;
}

struct CGIteration {
  std::size_t support_size = 0;
  /// h(v_t) = sum_s (y_s/n) log v_t(s), v_t(s) = sum_j p_j (lambda_j T)^s exp(-lambda_j T).
  double h = 0.0;
  double log_likelihood = 0.0;
  double certificate = 0.0;
  double new_atom = 0.0;
  /// min_s log v_t(s).
  double min_log_v = 0.0;
};

enum class CGTermination { certified, iteration_cap };

struct CGReport {
  std::vector<CGIteration> iterations;
  CGTermination termination = CGTermination::iteration_cap;
  double log_gamma_bound = kNegInf;

  bool certified() const noexcept { return termination == CGTermination::certified; }
  double final_certificate() const { return iterations.empty() ? std::numeric_limits<double>::infinity() : iterations.back().certificate; }
  double gamma_bound() const { return std::exp(log_gamma_bound); }
};

struct NpmleOptions {
  double eps = 1e-6;
  int max_iter = 300;
  /// Initial support in rate units; empty means quantiles of X/T plus 0.
  std::vector<double> init;
  double kkt_tol = 1e-9;
};

struct NpmleFit {
  DiscreteMixture mixture;
  CGReport report;
  double log_likelihood = 0.0;
};

/// log of min_s { v1(s) prod_{s' != s} (v1(s') / (s'^s' e^-s'))^(y_s'/y_s) }.
inline double log_gamma_lower_bound(std::span<const double> log_v1, const CountHistogram& hist) {
  if (log_v1.size() != hist.distinct()) throw ConfigError("first iterate must have one entry per observed value");
  std::vector<double> ratio(log_v1.size());
  for (std::size_t i = 0; i < log_v1.size(); ++i) {
    const double s = static_cast<double>(hist.bins()[i].value);
    ratio[i] = log_v1[i] - (s == 0.0 ? 0.0 : s * std::log(s) - s);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_v1.size(); ++i) {
    const double ys = static_cast<double>(hist.bins()[i].frequency);
    double acc = log_v1[i];
    for (std::size_t k = 0; k < log_v1.size(); ++k)
      if (k != i) acc += static_cast<double>(hist.bins()[k].frequency) / ys * ratio[k];
    best = std::min(best, acc);
  }
  return best;
}

inline double gamma_lower_bound(std::span<const double> log_v1, const CountHistogram& hist) {
  return std::exp(log_gamma_lower_bound(log_v1, hist));
}

namespace detail {

inline std::vector<double> log_v_of(const DiscreteMixture& mix, const CountHistogram& hist) {
  const auto k = build_kernel(mix.atoms(), hist);
  const Eigen::VectorXd p =
      Eigen::Map<const Eigen::VectorXd>(mix.weights().data(), static_cast<Eigen::Index>(mix.size()));
  const Eigen::VectorXd v = k.a * p;
  std::vector<double> out(hist.distinct());
  for (std::size_t r = 0; r < out.size(); ++r)
    out[r] = std::log(v[static_cast<Eigen::Index>(r)]) + k.row_log_scale[static_cast<Eigen::Index>(r)];
  return out;
}

inline std::vector<double> default_support(const CountHistogram& hist) {
  const auto d = hist.expand();
  std::vector<double> atoms{0.0};
  const auto n = d.counts.size();
  for (int i = 0; i < 8; ++i) {
    const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(n - 1) * i / 7.0));
    atoms.push_back(static_cast<double>(d.counts[idx]) / hist.horizon());
  }
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  return atoms;
}

}  // namespace detail

/// Fully corrective conditional gradient for the Poisson-mixture NPMLE.
inline NpmleFit fit_npmle(const CountHistogram& hist, const NpmleOptions& opts = {}) {
  if (hist.empty()) throw DataError("fit_npmle needs data");
  if (!(opts.eps > 0.0)) throw ConfigError("certificate tolerance must be positive");
  if (opts.max_iter < 1) throw ConfigError("iteration cap must be at least 1");
  const double T = hist.horizon();
  const double n = static_cast<double>(hist.total());

  std::vector<double> support = opts.init.empty() ? detail::default_support(hist) : opts.init;
  for (double a : support)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("initial atoms must be finite and >= 0");
  std::vector<std::int64_t> values;
  double log_fact = 0.0;
  for (const auto& b : hist.bins()) {
    values.push_back(b.value);
    log_fact += static_cast<double>(b.frequency) * log_factorial(b.value);
  }
  const double dup_tol = 1e-12 * std::max(1.0, static_cast<double>(hist.max_value()) / T);

  NpmleFit out;
  std::optional<std::vector<double>> warm;
  DiscreteMixture mix;
  for (int t = 1; t <= opts.max_iter; ++t) {
    auto fit = reoptimize_weights(support, hist, warm, opts.kkt_tol);
    mix = fit.mixture;
    const auto log_v = detail::log_v_of(mix, hist);
    if (t == 1) out.report.log_gamma_bound = log_gamma_lower_bound(log_v, hist);

    CGIteration rec;
    rec.support_size = mix.size();
    std::vector<double> lw(values.size());
    rec.min_log_v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double ys = static_cast<double>(hist.bins()[i].frequency);
      rec.h += ys / n * log_v[i];
      lw[i] = std::log(ys / n) - log_v[i];
      rec.min_log_v = std::min(rec.min_log_v, log_v[i]);
    }
    rec.log_likelihood = n * rec.h - log_fact;
    const auto sub = cg_subproblem(values, lw, T);
    rec.certificate = sub.value - 1.0;
    rec.new_atom = sub.lambda;
    out.report.iterations.push_back(rec);
    if (rec.certificate <= opts.eps) {
      out.report.termination = CGTermination::certified;
      break;
    }

    support = mix.atoms();
    warm = mix.weights();
    bool present = false;
    for (double a : support)
      if (std::abs(a - sub.lambda) <= dup_tol) present = true;
    if (!present) {
      support.push_back(sub.lambda);
      warm->push_back(0.0);
    }
  }

  const double merge_tol = 1e-6 * static_cast<double>(hist.max_value()) / T;
  out.mixture = DiscreteMixture::normalized(mix.atoms(), mix.weights(), merge_tol);
  out.log_likelihood = mixture_log_likelihood(out.mixture, hist);
  return out;
}

/// Predictive pmf of next-interval demand given X = x under the mixture prior.
/// The tail beyond k_max is the posterior-weighted Poisson upper tail.
inline DemandPmf mixture_posterior_pmf(const DiscreteMixture& mix, std::int64_t x, double horizon,
                                       std::int64_t k_max) {
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  if (x < 0) throw DataError("count must be non-negative");
  if (k_max < 0) throw ConfigError("truncation point must be non-negative");
  std::vector<double> lw(mix.size());
  for (std::size_t j = 0; j < mix.size(); ++j)
    lw[j] = std::log(mix.weights()[j]) + log_poisson_pmf(mix.atoms()[j] * horizon, x);
  const double norm = log_sum_exp(lw);
  if (norm == kNegInf) throw NumericError("posterior denominator is zero");

  std::vector<double> probs(static_cast<std::size_t>(k_max) + 1, 0.0);
  double tail = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    const double post = std::exp(lw[j] - norm);
    if (post == 0.0) continue;
    const double lam = mix.atoms()[j];
    const double top = static_cast<double>(k_max) + 1.0;
    if (lam < 500.0) {
      // p(k+1) = p(k) lambda / (k+1); e^{-lambda} stays normal in this range
      double pk = std::exp(-lam);
      for (std::int64_t k = 0; k <= k_max; ++k) {
        probs[static_cast<std::size_t>(k)] += post * pk;
        pk *= lam / static_cast<double>(k + 1);
      }
      if (lam <= 0.5 * top) {
        // terms beyond k_max shrink by a factor of at least two
        double t = 0.0;
        for (double k = top; pk > 1e-18 * t && pk > 0.0; k += 1.0) {
          t += pk;
          pk *= lam / (k + 1.0);
        }
        tail += post * t;
        continue;
      }
    } else {
      for (std::int64_t k = 0; k <= k_max; ++k) probs[static_cast<std::size_t>(k)] += post * poisson_pmf(lam, k);
    }
    if (lam > 0.0) tail += post * boost::math::gamma_p(top, lam);
  }
  return DemandPmf(std::move(probs), tail);
}

inline double mixture_posterior_mean(const DiscreteMixture& mix, std::int64_t x, double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  std::vector<double> lw(mix.size());
  for (std::size_t j = 0; j < mix.size(); ++j)
    lw[j] = std::log(mix.weights()[j]) + log_poisson_pmf(mix.atoms()[j] * horizon, x);
  const double norm = log_sum_exp(lw);
  if (norm == kNegInf) throw NumericError("posterior denominator is zero");
  double m = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) m += std::exp(lw[j] - norm) * mix.atoms()[j];
  return m;
}

}  // namespace ebinv

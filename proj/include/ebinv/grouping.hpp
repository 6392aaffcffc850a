#pragma once

// Two-group homogeneity test built on K-atom mixture fits.

#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Dense>

#include <random>

#include "ebinv/posterior_g.hpp"

namespace ebinv {

/// P(chi^2_df > x) = Q(df/2, x/2).
inline double chi_square_survival(double x, int df) {
  if (df < 1) throw ConfigError("chi-square degrees of freedom must be positive");
  if (!(x >= 0.0)) throw ConfigError("chi-square statistic must be non-negative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

struct KAtomOptions {
  int restarts = 3;
  std::uint64_t seed = 0x5eed;
  /// Sup-norm of the gradient of the average log-likelihood in (logit, log-rate) coordinates.
  /// Merging coincident atoms can add up to K such terms, so this sits below the 1e-6 target.
  double stationarity_tol = 1e-7;
  int em_warmup = 30;
  int max_iter = 500;
};

namespace detail {

// Free parameters: logits eta_0..eta_{K-1}, then log-rates rho_0..rho_{K-1}.
struct KAtomState {
  Eigen::VectorXd theta;
  std::size_t k() const { return static_cast<std::size_t>(theta.size() / 2); }
};

struct KAtomEval {
  double value = 0.0;  // average log-likelihood without the factorial constant
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

inline Eigen::VectorXd softmax(const Eigen::VectorXd& eta) {
  const double hi = eta.maxCoeff();
  Eigen::VectorXd p = (eta.array() - hi).exp();
  return p / p.sum();
}

inline KAtomEval evaluate_k_atom(const Eigen::VectorXd& theta, const CountHistogram& hist, bool second_order) {
  const auto K = theta.size() / 2;
  const Eigen::VectorXd eta = theta.head(K);
  const Eigen::VectorXd rho = theta.tail(K);
  const Eigen::VectorXd p = softmax(eta);
  const double T = hist.horizon();
  const double n = static_cast<double>(hist.total());
  KAtomEval out;
  out.grad = Eigen::VectorXd::Zero(2 * K);
  if (second_order) out.hess = Eigen::MatrixXd::Zero(2 * K, 2 * K);
  Eigen::VectorXd lt(K), w(K), d(K), g(2 * K);
  for (const auto& bin : hist.bins()) {
    const double s = static_cast<double>(bin.value);
    const double y = static_cast<double>(bin.frequency) / n;
    double hi = kNegInf;
    for (Eigen::Index j = 0; j < K; ++j) {
      const double mu = std::exp(rho[j]) * T;
      lt[j] = std::log(p[j]) - mu + s * (rho[j] + std::log(T));
      d[j] = s - mu;
      hi = std::max(hi, lt[j]);
    }
    const double lv = hi + std::log((lt.array() - hi).exp().sum());
    w = (lt.array() - lv).exp();
    out.value += y * lv;
    g.head(K) = w - p;
    g.tail(K) = w.cwiseProduct(d);
    out.grad += y * g;
    if (!second_order) continue;
    Eigen::MatrixXd h = -g * g.transpose();
    for (Eigen::Index a = 0; a < K; ++a) {
      for (Eigen::Index b = 0; b < K; ++b) {
        h(a, b) += (a == b ? 1.0 : 0.0) * (w[a] - p[a]) - p[b] * (w[a] - p[a]) - p[a] * (w[b] - p[b]);
        h(a, K + b) += ((a == b ? 1.0 : 0.0) - p[a]) * w[b] * d[b];
        h(K + b, a) = h(a, K + b);
      }
      h(K + a, K + a) += w[a] * (d[a] * d[a] - std::exp(rho[a]) * T);
    }
    out.hess += y * h;
  }
  return out;
}

// Minimiser of g'd + d'Hd/2 subject to |d| <= radius, by eigen-decomposition and a
// bisection on the shift. Directions with negligible curvature and gradient are ignored.
inline Eigen::VectorXd trust_region_step(const Eigen::VectorXd& g, const Eigen::MatrixXd& H, double radius) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::VectorXd gq = es.eigenvectors().transpose() * g;
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  auto step_for = [&](double shift) {
    Eigen::VectorXd c(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double den = lam[i] + shift;
      c[i] = den > 1e-14 * scale ? -gq[i] / den : 0.0;
    }
    return c;
  };
  const double lo = std::max(0.0, -lam.minCoeff());
  if (lo == 0.0) {
    const Eigen::VectorXd c = step_for(0.0);
    if (c.norm() <= radius) return es.eigenvectors() * c;
  }
  double a = lo + 1e-14 * scale, b = lo + g.norm() / radius + scale;
  for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
    const double mid = 0.5 * (a + b);
    if (step_for(mid).norm() > radius) a = mid;
    else b = mid;
  }
  return es.eigenvectors() * step_for(b);
}

inline double local_search(Eigen::VectorXd& theta, const CountHistogram& hist, const KAtomOptions& opts) {
  double radius = 1.0;
  auto cur = evaluate_k_atom(theta, hist, true);
  for (int it = 0; it < opts.max_iter; ++it) {
    if (cur.grad.cwiseAbs().maxCoeff() <= opts.stationarity_tol) break;
    // Maximising: model on -f.
    const Eigen::VectorXd step = trust_region_step(-cur.grad, -cur.hess, radius);
    const double predicted = cur.grad.dot(step) + 0.5 * step.dot(cur.hess * step);
    const Eigen::VectorXd trial = theta + step;
    const auto next = evaluate_k_atom(trial, hist, true);
    const double actual = next.value - cur.value;
    const double ratio = predicted > 0.0 ? actual / predicted : (actual >= 0.0 ? 1.0 : -1.0);
    if (ratio < 0.25) radius *= 0.25;
    else if (ratio > 0.75 && step.norm() >= 0.99 * radius) radius = std::min(2.0 * radius, 100.0);
    if (ratio > 1e-4 && std::isfinite(next.value)) {
      theta = trial;
      cur = next;
    }
    if (radius < 1e-14) break;
  }
  return cur.grad.cwiseAbs().maxCoeff();
}

// A few EM sweeps from the given atoms and weights.
inline void em_sweeps(std::vector<double>& atoms, std::vector<double>& weights, const CountHistogram& hist, int sweeps) {
  const auto K = atoms.size();
  const double T = hist.horizon();
  const double n = static_cast<double>(hist.total());
  std::vector<double> lt(K), mass(K), first(K);
  for (int it = 0; it < sweeps; ++it) {
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(first.begin(), first.end(), 0.0);
    for (const auto& bin : hist.bins()) {
      for (std::size_t j = 0; j < K; ++j) lt[j] = std::log(weights[j]) + log_poisson_pmf(atoms[j] * T, bin.value);
      const double lv = log_sum_exp(lt);
      for (std::size_t j = 0; j < K; ++j) {
        const double r = static_cast<double>(bin.frequency) * std::exp(lt[j] - lv);
        mass[j] += r;
        first[j] += r * static_cast<double>(bin.value);
      }
    }
    for (std::size_t j = 0; j < K; ++j) {
      weights[j] = std::max(mass[j] / n, 1e-12);
      if (mass[j] > 0.0) atoms[j] = std::max(first[j] / (mass[j] * T), 1e-10);
    }
    const double tot = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= tot;
  }
}

inline Eigen::VectorXd to_theta(const std::vector<double>& atoms, const std::vector<double>& weights) {
  const auto K = static_cast<Eigen::Index>(atoms.size());
  Eigen::VectorXd theta(2 * K);
  for (Eigen::Index j = 0; j < K; ++j) {
    theta[j] = std::log(std::max(weights[static_cast<std::size_t>(j)], 1e-300));
    theta[K + j] = std::log(std::max(atoms[static_cast<std::size_t>(j)], 1e-300));
  }
  return theta;
}

inline DiscreteMixture from_theta(const Eigen::VectorXd& theta, const CountHistogram& hist) {
  const auto K = theta.size() / 2;
  const Eigen::VectorXd p = softmax(theta.head(K));
  std::vector<double> atoms, weights;
  for (Eigen::Index j = 0; j < K; ++j) {
    if (!(p[j] > 1e-12)) continue;
    atoms.push_back(std::exp(theta[K + j]));
    weights.push_back(p[j]);
  }
  const double merge_tol = 1e-9 * std::max(1.0, static_cast<double>(hist.max_value()) / hist.horizon());
  return DiscreteMixture::normalized(std::move(atoms), std::move(weights), merge_tol);
}

inline double atom_floor(const CountHistogram& hist) { return 1e-3 + 0.05 * hist.mean() / hist.horizon(); }

// Distinct positive starting atoms at the (j + 1/2)/K quantiles of X / T.
inline std::vector<double> quantile_atoms(const CountHistogram& hist, std::size_t K) {
  const auto d = hist.expand();
  const auto n = d.counts.size();
  const double floor = atom_floor(hist);
  std::vector<double> atoms;
  for (std::size_t j = 0; j < K; ++j) {
    const auto idx = std::min(n - 1, static_cast<std::size_t>((static_cast<double>(j) + 0.5) / static_cast<double>(K) *
                                                              static_cast<double>(n)));
    double a = std::max(floor, static_cast<double>(d.counts[idx]) / hist.horizon());
    if (!atoms.empty() && a <= atoms.back() * 1.05) a = atoms.back() * 1.5 + floor;
    atoms.push_back(a);
  }
  return atoms;
}

}  // namespace detail

/// Gradient sup-norm of the average log-likelihood in (logit, log-rate) coordinates at mix.
/// Atoms at zero contribute only their logit component.
inline double k_atom_stationarity(const DiscreteMixture& mix, const CountHistogram& hist) {
  std::vector<double> atoms, weights;
  bool zero = false;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    if (mix.atoms()[j] == 0.0) zero = true;
    atoms.push_back(mix.atoms()[j] == 0.0 ? 1e-300 : mix.atoms()[j]);
    weights.push_back(mix.weights()[j]);
  }
  const auto e = detail::evaluate_k_atom(detail::to_theta(atoms, weights), hist, false);
  const auto K = static_cast<Eigen::Index>(mix.size());
  double r = e.grad.head(K).cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < K; ++j)
    if (!(zero && mix.atoms()[static_cast<std::size_t>(j)] == 0.0)) r = std::max(r, std::abs(e.grad[K + j]));
  return r;
}

/// Local search over K0-atom mixtures, K - K0 conditional-gradient expansions, then a
/// local search over all atoms. Heuristic: returns the best mixture found.
inline DiscreteMixture fit_k_atom_mixture(const CountHistogram& hist, std::size_t K, std::size_t K0,
                                          const KAtomOptions& opts = {}) {
  if (hist.empty()) throw DataError("K-atom fit needs data");
  if (K0 < 1 || K0 > K) throw ConfigError("K-atom fit needs 1 <= K0 <= K");
  if (opts.restarts < 1) throw ConfigError("K-atom fit needs at least one start");
  const double T = hist.horizon();
  if (hist.distinct() == 1) return DiscreteMixture::single(static_cast<double>(hist.min_value()) / T);
  if (K == 1) return DiscreteMixture::single(hist.mean() / T);

  std::vector<std::int64_t> values;
  for (const auto& b : hist.bins()) values.push_back(b.value);
  const double n = static_cast<double>(hist.total());

  auto polish = [&](std::vector<double> atoms, std::vector<double> weights) {
    if (opts.em_warmup > 0) detail::em_sweeps(atoms, weights, hist, opts.em_warmup);
    Eigen::VectorXd theta = detail::to_theta(atoms, weights);
    detail::local_search(theta, hist, opts);
    return detail::from_theta(theta, hist);
  };

  std::mt19937_64 rng(opts.seed);
  std::lognormal_distribution<double> jitter(0.0, 0.5);
  const double dup_tol = 1e-9 * std::max(1.0, static_cast<double>(hist.max_value()) / T);
  const double floor = detail::atom_floor(hist);
  // Grows the support by conditional-gradient steps until it holds K atoms (at most
  // 2K steps, since the weight solve may drop atoms), then polishes all atoms jointly.
  auto expand = [&](DiscreteMixture mix) {
    for (std::size_t step = 0; mix.size() < K && step < 2 * K; ++step) {
      const auto log_v = detail::log_v_of(mix, hist);
      std::vector<double> lw(values.size());
      for (std::size_t i = 0; i < values.size(); ++i)
        lw[i] = std::log(static_cast<double>(hist.bins()[i].frequency) / n) - log_v[i];
      const auto sub = cg_subproblem(values, lw, T);
      if (sub.value - 1.0 <= 0.0) break;  // already a global maximiser
      auto support = mix.atoms();
      auto warm = mix.weights();
      if (std::any_of(support.begin(), support.end(), [&](double a) { return std::abs(a - sub.lambda) <= dup_tol; }))
        break;
      support.push_back(sub.lambda);
      warm.push_back(0.0);
      mix = reoptimize_weights(support, hist, warm).mixture;
    }
    // Log-rates cannot leave zero, so atoms start from a small positive floor.
    std::vector<double> atoms = mix.atoms();
    for (double& a : atoms) a = std::max(a, floor);
    Eigen::VectorXd theta = detail::to_theta(atoms, mix.weights());
    detail::local_search(theta, hist, opts);
    auto polished = detail::from_theta(theta, hist);
    return mixture_log_likelihood(polished, hist) >= mixture_log_likelihood(mix, hist) ? polished : mix;
  };

  DiscreteMixture best;
  double best_ll = kNegInf;
  const auto base = detail::quantile_atoms(hist, K0);
  for (int r = 0; r < opts.restarts; ++r) {
    std::vector<double> atoms = base;
    if (r > 0) {
      for (double& a : atoms) a *= jitter(rng);
      std::sort(atoms.begin(), atoms.end());
    }
    const auto start = polish(atoms, std::vector<double>(K0, 1.0 / static_cast<double>(K0)));
    for (const auto& cand : {start, expand(start)}) {
      const double ll = mixture_log_likelihood(cand, hist);
      if (ll > best_ll) {
        best_ll = ll;
        best = cand;
      }
    }
  }
  return best;
}

struct LrTestResult {
  double statistic = 0.0;      // clamped at zero
  double raw_statistic = 0.0;  // before clamping
  bool clamped = false;        // raw statistic was negative
  int df = 0;
  double p_value = 1.0;
  DiscreteMixture fit0, fit1, fit_pooled;
  double log_likelihood0 = 0.0, log_likelihood1 = 0.0, log_likelihood_pooled = 0.0;
  double cutoff = 0.0;
  bool split = false;
};

/// Likelihood-ratio test of a common mixing distribution for two groups.
inline LrTestResult lr_test(const CountHistogram& hist0, const CountHistogram& hist1, std::size_t K = 5,
                            double cutoff = 0.05, std::size_t K0 = 3, const KAtomOptions& opts = {}) {
  if (hist0.empty() || hist1.empty()) throw DataError("both groups need data");
  if (hist0.horizon() != hist1.horizon()) throw DataError("groups must share the observation horizon");
  if (!(cutoff >= 0.0 && cutoff <= 1.0)) throw ConfigError("p-value cutoff must lie in [0, 1]");
  K0 = std::min(K0, K);
  const auto pooled = pool(hist0, hist1);
  LrTestResult r;
  r.fit0 = fit_k_atom_mixture(hist0, K, K0, opts);
  r.fit1 = fit_k_atom_mixture(hist1, K, K0, opts);
  r.fit_pooled = fit_k_atom_mixture(pooled, K, K0, opts);
  r.log_likelihood0 = mixture_log_likelihood(r.fit0, hist0);
  r.log_likelihood1 = mixture_log_likelihood(r.fit1, hist1);
  r.log_likelihood_pooled = mixture_log_likelihood(r.fit_pooled, pooled);
  r.raw_statistic = -2.0 * (r.log_likelihood_pooled - (r.log_likelihood0 + r.log_likelihood1));
  r.clamped = r.raw_statistic < 0.0;
  r.statistic = std::max(0.0, r.raw_statistic);
  r.df = static_cast<int>(2 * K - 1);
  r.p_value = chi_square_survival(r.statistic, r.df);
  r.cutoff = cutoff;
  r.split = r.p_value < cutoff;
  return r;
}

}  // namespace ebinv

#pragma once

// f-modelling: estimates of the count marginal f_T and the posterior quantities
// that only need f (Robbins mean, plugin Poisson, generalized Robbins pmf).

#include <functional>
#include <memory>
#include <optional>

#include "ebinv/detail/barrier.hpp"

namespace ebinv {

enum class MarginalKind { empirical, spline, exact };

inline const char* to_string(MarginalKind k) {
  switch (k) {
    case MarginalKind::empirical: return "empirical";
    case MarginalKind::spline: return "spline";
    case MarginalKind::exact: return "exact";
  }
  return "?";
}

/// log f(s) = beta0 + w(s)'beta below s0 = ceil(tau), linear in s from s0 on, with
/// w(s) = (s, s^2, s^3, (s - c_1)_+^3, ..., (s - c_m)_+^3) and tau = c_m.
struct SplineCoefficients {
  double beta0 = 0.0;
  std::vector<double> beta;
  std::vector<double> knots;
  /// Auxiliary variable of the probability constraint.
  double gamma = 0.0;

  double tau() const { return knots.back(); }
  std::int64_t tail_start() const { return static_cast<std::int64_t>(std::ceil(tau())); }

  std::vector<double> basis(double s) const {
    std::vector<double> w{s, s * s, s * s * s};
    for (double c : knots) {
      const double d = std::max(0.0, s - c);
      w.push_back(d * d * d);
    }
    return w;
  }
  double inner(const std::vector<double>& w) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * beta[i];
    return acc;
  }
  // a_k' beta: coefficient of s^k in w(s)'beta for s >= tau.
  double a0() const {
    double acc = 0.0;
    for (std::size_t j = 0; j < knots.size(); ++j) acc -= knots[j] * knots[j] * knots[j] * beta[3 + j];
    return acc;
  }
  double a1() const {
    double acc = beta[0];
    for (std::size_t j = 0; j < knots.size(); ++j) acc += 3.0 * knots[j] * knots[j] * beta[3 + j];
    return acc;
  }
  double a2() const {
    double acc = beta[1];
    for (std::size_t j = 0; j < knots.size(); ++j) acc -= 3.0 * knots[j] * beta[3 + j];
    return acc;
  }
  double a3() const {
    double acc = beta[2];
    for (std::size_t j = 0; j < knots.size(); ++j) acc += beta[3 + j];
    return acc;
  }

  double log_pmf(std::int64_t s) const {
    if (s < 0) return kNegInf;
    const auto sd = static_cast<double>(s);
    if (s < tail_start()) return beta0 + inner(basis(sd));
    return beta0 + a0() + a1() * sd;
  }
};

/// Worst violation of each constraint family at a fitted spline.
struct SplineResiduals {
  double natural = 0.0;      // max(|a2'beta|, |a3'beta|)
  double probability = 0.0;  // (total mass - 1)_+, or +inf for a non-decaying tail
  double monotone = 0.0;     // max_s ((2w(s+1) - w(s+2) - w(s))'beta - log((s+2)/(s+1)))_+
};

inline SplineResiduals spline_residuals(const SplineCoefficients& c) {
  SplineResiduals r;
  r.natural = std::max(std::abs(c.a2()), std::abs(c.a3()));
  const auto s0 = c.tail_start();
  double mass = 0.0;
  for (std::int64_t s = 0; s < s0; ++s) mass += std::exp(c.log_pmf(s));
  if (c.a1() < 0.0) {
    mass += std::exp(c.log_pmf(s0)) / -std::expm1(c.a1());
    r.probability = std::max(0.0, mass - 1.0);
  } else {
    r.probability = std::numeric_limits<double>::infinity();
  }
  for (std::int64_t s = 0; s + 2 <= s0; ++s) {
    const auto w0 = c.basis(static_cast<double>(s)), w1 = c.basis(static_cast<double>(s + 1)),
               w2 = c.basis(static_cast<double>(s + 2));
    double lhs = 0.0;
    for (std::size_t i = 0; i < w0.size(); ++i) lhs += (2.0 * w1[i] - w2[i] - w0[i]) * c.beta[i];
    r.monotone = std::max(r.monotone, lhs - std::log(static_cast<double>(s + 2) / static_cast<double>(s + 1)));
  }
  return r;
}

/// An estimate of the count marginal f_T: empirical frequencies, a fitted spline, or an exact pmf.
class MarginalEstimate {
public:
  static MarginalEstimate empirical(const CountHistogram& hist) {
    if (hist.empty()) throw DataError("empirical marginal needs data");
    MarginalEstimate m;
    m.kind_ = MarginalKind::empirical;
    m.horizon_ = hist.horizon();
    const double n = static_cast<double>(hist.total());
    for (const auto& b : hist.bins()) {
      const double f = static_cast<double>(b.frequency) / n;
      m.table_.emplace(b.value, f);
      m.log_likelihood_ += static_cast<double>(b.frequency) * std::log(f);
    }
    return m;
  }

  static MarginalEstimate spline(SplineCoefficients coef, double horizon, double log_likelihood) {
    if (coef.knots.empty() || coef.beta.size() != coef.knots.size() + 3)
      throw ConfigError("spline needs 3 + m coefficients for m knots");
    MarginalEstimate m;
    m.kind_ = MarginalKind::spline;
    m.horizon_ = horizon;
    m.spline_ = std::move(coef);
    m.log_likelihood_ = log_likelihood;
    return m;
  }

  /// Exact pmf given as a callable (e.g. a conjugate-prior marginal).
  static MarginalEstimate exact(std::function<double(std::int64_t)> pmf, double horizon) {
    MarginalEstimate m;
    m.kind_ = MarginalKind::exact;
    m.horizon_ = horizon;
    m.exact_ = std::move(pmf);
    return m;
  }

  /// Exact pmf from a table f(0..); zero beyond it.
  static MarginalEstimate exact_table(std::vector<double> table, double horizon) {
    auto shared = std::make_shared<const std::vector<double>>(std::move(table));
    return exact(
        [shared](std::int64_t s) {
          return (s >= 0 && static_cast<std::size_t>(s) < shared->size()) ? (*shared)[static_cast<std::size_t>(s)] : 0.0;
        },
        horizon);
  }

  MarginalKind kind() const noexcept { return kind_; }
  double horizon() const noexcept { return horizon_; }
  double log_likelihood() const noexcept { return log_likelihood_; }
  const SplineCoefficients& spline_coefficients() const {
    if (kind_ != MarginalKind::spline) throw ConfigError("not a spline marginal");
    return spline_;
  }

  double pmf(std::int64_t s) const {
    if (s < 0) return 0.0;
    switch (kind_) {
      case MarginalKind::empirical: {
        auto it = table_.find(s);
        return it == table_.end() ? 0.0 : it->second;
      }
      case MarginalKind::spline: return std::exp(spline_.log_pmf(s));
      case MarginalKind::exact: return exact_(s);
    }
    return 0.0;
  }

  double log_pmf(std::int64_t s) const {
    if (kind_ == MarginalKind::spline) return spline_.log_pmf(s);
    const double f = pmf(s);
    return f > 0.0 ? std::log(f) : kNegInf;
  }

  /// Largest s with f(s) > 0 for the empirical kind; unbounded otherwise.
  std::int64_t support_max() const {
    if (kind_ == MarginalKind::empirical) return table_.rbegin()->first;
    return std::numeric_limits<std::int64_t>::max();
  }

private:
  MarginalKind kind_ = MarginalKind::empirical;
  double horizon_ = 1.0;
  double log_likelihood_ = 0.0;
  std::map<std::int64_t, double> table_;
  SplineCoefficients spline_;
  std::function<double(std::int64_t)> exact_;
};

/// R(k) = f(k+1) / f(k).
inline double marginal_ratio(const MarginalEstimate& m, std::int64_t k) {
  const double fk = m.pmf(k);
  if (!(fk > 0.0)) throw DataError("count outside marginal support");
  if (m.kind() == MarginalKind::spline) return std::exp(m.log_pmf(k + 1) - m.log_pmf(k));
  return m.pmf(k + 1) / fk;
}

/// (X + 1) f(X + 1) / (T f(X)).
inline double robbins_mean(const MarginalEstimate& m, std::int64_t x) {
  if (x < 0) throw DataError("count must be non-negative");
  return static_cast<double>(x + 1) * marginal_ratio(m, x) / m.horizon();
}

/// Poisson predictive at the Robbins mean.
inline DemandPmf plugin_posterior_pmf(const MarginalEstimate& m, std::int64_t x, std::int64_t k_max) {
  return DemandPmf::poisson(robbins_mean(m, x), k_max);
}

struct RobbinsTermDiagnostic {
  int terms_used = 0;
  double max_term = 0.0;
  bool hit_cap = false;
  /// f vanished inside the sum while later terms still carried weight.
  bool vanished = false;
};

struct GeneralizedRobbinsResult {
  /// Raw, possibly negative, values for k = 0..k_max.
  std::vector<double> values;
  std::vector<RobbinsTermDiagnostic> diagnostics;
};

struct GeneralizedRobbinsOptions {
  int cap = 200;
  double rel_tol = 1e-12;
};

/// sum_j (-1)^j (j+k+X)! f(j+k+X) / (T^(j+k) j! k! X! f(X)) for k = 0..k_max, summed
/// term by term in double precision with no clamping.
inline GeneralizedRobbinsResult generalized_robbins_pmf(const MarginalEstimate& m, std::int64_t x, std::int64_t k_max,
                                                        const GeneralizedRobbinsOptions& opts = {}) {
  if (x < 0 || k_max < 0) throw DataError("counts must be non-negative");
  const double fx = m.pmf(x);
  if (!(fx > 0.0)) throw DataError("count outside marginal support");
  const double T = m.horizon();
  const double log_fx = m.log_pmf(x);
  const std::int64_t last = m.support_max();

  // Term by direct log evaluation, used where the ratio recurrence cannot be.
  auto direct = [&](std::int64_t j, std::int64_t k) {
    const std::int64_t s = j + k + x;
    const double lf = m.log_pmf(s);
    if (lf == kNegInf) return 0.0;
    const double mag = std::exp(log_factorial(s) - log_factorial(j) - log_factorial(k) - log_factorial(x) -
                                static_cast<double>(j + k) * std::log(T) + lf - log_fx);
    return (j % 2 == 0) ? mag : -mag;
  };

  GeneralizedRobbinsResult out;
  out.values.resize(static_cast<std::size_t>(k_max) + 1);
  out.diagnostics.resize(out.values.size());
  for (std::int64_t k = 0; k <= k_max; ++k) {
    auto& diag = out.diagnostics[static_cast<std::size_t>(k)];
    double sum = 0.0;
    double term = 0.0;
    for (std::int64_t j = 0;; ++j) {
      const std::int64_t s = j + k + x;
      if (s > last) break;
      if (j > opts.cap) {
        diag.hit_cap = true;
        break;
      }
      const double fs = m.pmf(s);
      if (j == 0 || term == 0.0) {
        term = direct(j, k);
      } else {
        const double fprev = m.pmf(s - 1);
        term = (fprev > 0.0 && fs > 0.0)
                   ? -term * static_cast<double>(s) / (static_cast<double>(j) * T) * (fs / fprev)
                   : direct(j, k);
      }
      if (fs == 0.0 && s < last) diag.vanished = true;
      sum += term;
      ++diag.terms_used;
      diag.max_term = std::max(diag.max_term, std::abs(term));
      if (j > 0 && std::abs(term) < opts.rel_tol * std::abs(sum)) break;
    }
    out.values[static_cast<std::size_t>(k)] = sum;
  }
  return out;
}

/// Generalized Robbins values made usable for decisions: negatives clamped, the sequence cut
/// at the first k where the accumulated mass reaches one (later values cannot be
/// probabilities and are where the alternating sums blow up), then renormalised.
inline DemandPmf sanitized_robbins_pmf(const MarginalEstimate& m, std::int64_t x, std::int64_t k_max,
                                       const GeneralizedRobbinsOptions& opts = {}) {
  auto values = generalized_robbins_pmf(m, x, k_max, opts).values;
  double mass = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (std::isfinite(values[k]) && values[k] > 0.0) mass += values[k];
    if (mass >= 1.0) {
      values.resize(k + 1);
      break;
    }
  }
  return DemandPmf::sanitized(values);
}

/// Knots at the 0.2, 0.4, ..., 1.0 empirical quantiles (linear interpolation) of the counts;
/// non-positive knots are dropped and duplicates merged. The last knot is the largest count.
inline std::vector<double> default_knots(const CountHistogram& hist) {
  const auto d = hist.expand();
  const auto n = d.counts.size();
  std::vector<double> knots;
  for (int i = 1; i <= 5; ++i) {
    const double pos = 0.2 * i * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(n - 1, lo + 1);
    const double frac = pos - static_cast<double>(lo);
    const double q = static_cast<double>(d.counts[lo]) * (1.0 - frac) + static_cast<double>(d.counts[hi]) * frac;
    if (q > 0.0 && (knots.empty() || q > knots.back() + 1e-9)) knots.push_back(q);
  }
  return knots;
}

struct SplineFitOptions {
  /// Empty means default_knots.
  std::vector<double> knots;
  double gap_tol = 1e-10;
  int max_newton = 20000;
};

/// Thrown when the interior point does not reach its tolerance; carries the last iterate.
class SplineFitError : public NumericError {
public:
  SplineFitError(const std::string& what, SplineCoefficients best) : NumericError(what), best_(std::move(best)) {}
  const SplineCoefficients& best() const noexcept { return best_; }

private:
  SplineCoefficients best_;
};

/// Constrained maximum likelihood for the log-spline marginal: natural-spline tail,
/// total mass at most one, non-decreasing Robbins means up to the tail.
inline MarginalEstimate fit_spline_marginal(const CountHistogram& hist, const SplineFitOptions& opts = {}) {
  if (hist.distinct() < 2) throw DataError("spline marginal needs at least two distinct counts");
  std::vector<double> knots = opts.knots.empty() ? default_knots(hist) : opts.knots;
  if (knots.empty()) throw ConfigError("spline needs at least one knot");
  for (std::size_t j = 0; j < knots.size(); ++j) {
    if (!(knots[j] > 0.0) || !std::isfinite(knots[j])) throw ConfigError("knots must be positive");
    if (j > 0 && !(knots[j] > knots[j - 1])) throw ConfigError("knots must be strictly increasing");
  }
  if (knots.back() > static_cast<double>(hist.max_value())) throw ConfigError("knots must lie within the observed range");

  const std::size_t mk = knots.size();
  const double tau = knots.back();
  const auto s0 = static_cast<std::int64_t>(std::ceil(tau));
  // Variables: [beta0, scaled beta (3 + m), gamma]. Scaled basis uses u = s / tau.
  const auto dim = static_cast<Eigen::Index>(5 + mk);
  const Eigen::Index ig = dim - 1;
  std::vector<double> ck(mk);
  for (std::size_t j = 0; j < mk; ++j) ck[j] = knots[j] / tau;

  auto scaled_row = [&](double s) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(dim);
    const double u = s / tau;
    r[0] = 1.0;
    r[1] = u;
    r[2] = u * u;
    r[3] = u * u * u;
    for (std::size_t j = 0; j < mk; ++j) {
      const double d = std::max(0.0, u - ck[j]);
      r[static_cast<Eigen::Index>(4 + j)] = d * d * d;
    }
    return r;
  };
  Eigen::VectorXd a0 = Eigen::VectorXd::Zero(dim), a1 = a0, a2 = a0, a3 = a0;
  a1[1] = 1.0;
  a2[2] = 1.0;
  a3[3] = 1.0;
  for (std::size_t j = 0; j < mk; ++j) {
    const auto i = static_cast<Eigen::Index>(4 + j);
    a0[i] = -ck[j] * ck[j] * ck[j];
    a1[i] = 3.0 * ck[j] * ck[j];
    a2[i] = -3.0 * ck[j];
    a3[i] = 1.0;
  }
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(dim);
  e0[0] = 1.0;
  // log f(s) as a linear form in z.
  auto log_f_row = [&](std::int64_t s) -> Eigen::VectorXd {
    if (s < s0) return scaled_row(static_cast<double>(s));
    return e0 + a0 + a1 * (static_cast<double>(s) / tau);
  };

  detail::BarrierProblem prob;
  prob.cost = Eigen::VectorXd::Zero(dim);
  const double n = static_cast<double>(hist.total());
  for (const auto& b : hist.bins()) prob.cost -= static_cast<double>(b.frequency) / n * log_f_row(b.value);
  prob.equalities.resize(2, dim);
  prob.equalities.row(0) = a2.transpose();
  prob.equalities.row(1) = a3.transpose();

  {
    detail::LseConstraint mass;
    mass.rows.resize(s0 + 1, dim);
    mass.offsets = Eigen::VectorXd::Zero(s0 + 1);
    for (std::int64_t s = 0; s < s0; ++s) mass.rows.row(s) = scaled_row(static_cast<double>(s)).transpose();
    mass.rows.row(s0).setZero();
    mass.rows(s0, ig) = 1.0;
    prob.constraints.push_back(std::move(mass));

    detail::LseConstraint tail;
    tail.rows.resize(2, dim);
    tail.offsets = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd r0 = e0 + a0 + a1 * (static_cast<double>(s0) / tau);
    r0[ig] = -1.0;
    tail.rows.row(0) = r0.transpose();
    tail.rows.row(1) = (a1 / tau).transpose();
    prob.constraints.push_back(std::move(tail));
  }
  for (std::int64_t s = 0; s + 2 <= s0; ++s) {
    detail::LseConstraint mono;
    mono.rows = (2.0 * scaled_row(static_cast<double>(s + 1)) - scaled_row(static_cast<double>(s + 2)) -
                 scaled_row(static_cast<double>(s)))
                    .transpose();
    mono.offsets = Eigen::VectorXd::Constant(1, -std::log(static_cast<double>(s + 2) / static_cast<double>(s + 1)));
    prob.constraints.push_back(std::move(mono));
  }

  // Geometric start with per-unit decay delta: strictly feasible for every family.
  const double delta = std::log1p(1.0 / (1.0 + hist.mean()));
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(dim);
  z0[0] = std::log(-std::expm1(-delta)) - 1.0;
  z0[1] = -delta * tau;
  z0[ig] = z0[0] - delta * static_cast<double>(s0) - std::log(-std::expm1(-delta)) + 0.5;

  const auto res = detail::solve_barrier(prob, z0, opts.gap_tol, opts.max_newton);

  SplineCoefficients coef;
  coef.knots = knots;
  coef.beta0 = res.z[0];
  coef.beta.resize(3 + mk);
  coef.beta[0] = res.z[1] / tau;
  coef.beta[1] = res.z[2] / (tau * tau);
  coef.beta[2] = res.z[3] / (tau * tau * tau);
  for (std::size_t j = 0; j < mk; ++j) coef.beta[3 + j] = res.z[static_cast<Eigen::Index>(4 + j)] / (tau * tau * tau);
  coef.gamma = res.z[ig];
  if (!res.converged) throw SplineFitError("spline fit did not reach its duality-gap tolerance", coef);

  double ll = 0.0;
  for (const auto& b : hist.bins()) ll += static_cast<double>(b.frequency) * coef.log_pmf(b.value);
  return MarginalEstimate::spline(std::move(coef), hist.horizon(), ll);
}

}  // namespace ebinv

#pragma once

#include "ebinv/core.hpp"

namespace ebinv {

/// Finite-support distribution of the Poisson rate: sum_j p_j delta(lambda_j).
class DiscreteMixture {
public:
  DiscreteMixture() = default;

  /// Atoms must be non-negative and strictly increasing, weights positive and summing to 1.
  DiscreteMixture(std::vector<double> atoms, std::vector<double> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.empty() || atoms_.size() != weights_.size())
      throw ConfigError("mixture needs matching, non-empty atom and weight lists");
    double sum = 0.0;
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
      if (!(atoms_[j] >= 0.0) || !std::isfinite(atoms_[j])) throw ConfigError("mixture atoms must be finite and >= 0");
      if (j > 0 && !(atoms_[j] > atoms_[j - 1])) throw ConfigError("mixture atoms must be strictly increasing");
      if (!(weights_[j] > 0.0)) throw ConfigError("mixture weights must be positive");
      sum += weights_[j];
    }
    if (std::abs(sum - 1.0) > 1e-10) throw ConfigError("mixture weights must sum to 1");
  }

  /// Sorts, merges atoms closer than merge_tol, drops weights <= drop_below and renormalises.
  static DiscreteMixture normalized(std::vector<double> atoms, std::vector<double> weights, double merge_tol = 0.0,
                                    double drop_below = 0.0) {
    if (atoms.size() != weights.size()) throw ConfigError("atom and weight lists differ in length");
    std::vector<std::size_t> order(atoms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return atoms[a] < atoms[b]; });
    std::vector<double> a, w;
    for (auto i : order) {
      if (!(weights[i] > drop_below)) continue;
      const double atom = std::max(0.0, atoms[i]);
      if (!a.empty() && atom - a.back() <= merge_tol) {
        const double total = w.back() + weights[i];
        a.back() = (a.back() * w.back() + atom * weights[i]) / total;
        w.back() = total;
      } else {
        a.push_back(atom);
        w.push_back(weights[i]);
      }
    }
    double sum = 0.0;
    for (double x : w) sum += x;
    if (a.empty() || !(sum > 0.0)) throw NumericError("mixture has no positive weight");
    for (double& x : w) x /= sum;
    return DiscreteMixture(std::move(a), std::move(w));
  }

  static DiscreteMixture single(double atom) { return DiscreteMixture({atom}, {1.0}); }

  std::size_t size() const noexcept { return atoms_.size(); }
  const std::vector<double>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  double mean() const noexcept {
    double m = 0.0;
    for (std::size_t j = 0; j < size(); ++j) m += atoms_[j] * weights_[j];
    return m;
  }

  /// log P(X = s) under X ~ Poisson(lambda T), lambda ~ this mixture.
  double log_marginal(std::int64_t s, double horizon) const {
    std::vector<double> terms(size());
    for (std::size_t j = 0; j < size(); ++j)
      terms[j] = std::log(weights_[j]) + log_poisson_pmf(atoms_[j] * horizon, s);
    return log_sum_exp(terms);
  }

  double marginal(std::int64_t s, double horizon) const { return std::exp(log_marginal(s, horizon)); }

private:
  std::vector<double> atoms_;
  std::vector<double> weights_;
};

}  // namespace ebinv

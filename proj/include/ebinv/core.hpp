#pragma once

// Shared domain types and Poisson primitives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ebinv {

// Error hierarchy. The CLI maps these onto exit codes 2 / 3 / 4.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) noexcept {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  if (std::isinf(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double log_factorial(std::int64_t k) noexcept {
  return std::lgamma(static_cast<double>(k) + 1.0);
}

/// log of the Poisson(rate) pmf at k. rate = 0 gives a point mass at 0.
inline double log_poisson_pmf(double rate, std::int64_t k) {
  if (!(rate >= 0.0)) throw std::domain_error("poisson_pmf: rate must be non-negative");
  if (k < 0) return kNegInf;
  if (rate == 0.0) return k == 0 ? 0.0 : kNegInf;
  if (std::isinf(rate)) return kNegInf;
  return static_cast<double>(k) * std::log(rate) - rate - log_factorial(k);
}

inline double poisson_pmf(double rate, std::int64_t k) {
  return std::exp(log_poisson_pmf(rate, k));
}

struct ItemEconomics {
  double revenue = 1.0;
  double unit_cost = 0.0;
  double fixed_cost = 0.0;

  void validate() const {
    if (!(revenue > 0.0)) throw ConfigError("revenue must be positive");
    if (!(unit_cost >= 0.0)) throw ConfigError("unit cost must be non-negative");
    if (!(fixed_cost >= 0.0)) throw ConfigError("fixed cost must be non-negative");
  }

  ItemEconomics scaled(double factor) const {
    return {revenue * factor, unit_cost * factor, fixed_cost * factor};
  }
};

struct Dataset {
  std::vector<std::int64_t> counts;
  double horizon = 1.0;

  void validate() const {
    if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
    for (auto c : counts)
      if (c < 0) throw DataError("counts must be non-negative");
  }
};

/// Pooled counts: for every distinct observed value s, the multiplicity y_s.
class CountHistogram {
public:
  struct Bin {
    std::int64_t value;
    std::int64_t frequency;
    friend bool operator==(const Bin&, const Bin&) = default;
  };

  CountHistogram() = default;

  /// Bins must have distinct values and positive frequencies; they are sorted here.
  CountHistogram(std::vector<Bin> bins, double horizon) : bins_(std::move(bins)), horizon_(horizon) {
    if (!(horizon_ > 0.0)) throw ConfigError("horizon T must be positive");
    std::sort(bins_.begin(), bins_.end(), [](const Bin& a, const Bin& b) { return a.value < b.value; });
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      if (bins_[i].value < 0) throw DataError("histogram value must be non-negative");
      if (bins_[i].frequency < 1) throw DataError("histogram frequency must be at least 1");
      if (i > 0 && bins_[i].value == bins_[i - 1].value) throw DataError("duplicate histogram value");
      total_ += bins_[i].frequency;
    }
  }

  const std::vector<Bin>& bins() const noexcept { return bins_; }
  std::size_t distinct() const noexcept { return bins_.size(); }
  std::int64_t total() const noexcept { return total_; }
  double horizon() const noexcept { return horizon_; }
  bool empty() const noexcept { return bins_.empty(); }
  std::int64_t max_value() const noexcept { return bins_.empty() ? 0 : bins_.back().value; }
  std::int64_t min_value() const noexcept { return bins_.empty() ? 0 : bins_.front().value; }

  std::int64_t frequency(std::int64_t value) const noexcept {
    auto it = std::lower_bound(bins_.begin(), bins_.end(), value,
                               [](const Bin& b, std::int64_t v) { return b.value < v; });
    return (it != bins_.end() && it->value == value) ? it->frequency : 0;
  }

  double mean() const noexcept {
    double acc = 0.0;
    for (const auto& b : bins_) acc += static_cast<double>(b.value) * static_cast<double>(b.frequency);
    return total_ > 0 ? acc / static_cast<double>(total_) : 0.0;
  }

  /// Expands back into a sorted count vector.
  Dataset expand() const {
    Dataset d;
    d.horizon = horizon_;
    d.counts.reserve(static_cast<std::size_t>(total_));
    for (const auto& b : bins_) d.counts.insert(d.counts.end(), static_cast<std::size_t>(b.frequency), b.value);
    return d;
  }

  friend bool operator==(const CountHistogram& a, const CountHistogram& b) {
    return a.bins_ == b.bins_ && a.horizon_ == b.horizon_;
  }

private:
  std::vector<Bin> bins_;
  std::int64_t total_ = 0;
  double horizon_ = 1.0;
};

inline CountHistogram build_histogram(const Dataset& data) {
  data.validate();
  if (data.counts.empty()) throw DataError("cannot build a histogram from an empty dataset");
  std::map<std::int64_t, std::int64_t> tally;
  for (auto c : data.counts) ++tally[c];
  std::vector<CountHistogram::Bin> bins;
  bins.reserve(tally.size());
  for (auto [v, f] : tally) bins.push_back({v, f});
  return CountHistogram(std::move(bins), data.horizon);
}

/// Element-wise sum of two histograms over the same horizon.
inline CountHistogram pool(const CountHistogram& a, const CountHistogram& b) {
  if (a.horizon() != b.horizon()) throw ConfigError("cannot pool histograms with different horizons");
  std::map<std::int64_t, std::int64_t> tally;
  for (const auto& bin : a.bins()) tally[bin.value] += bin.frequency;
  for (const auto& bin : b.bins()) tally[bin.value] += bin.frequency;
  std::vector<CountHistogram::Bin> bins;
  for (auto [v, f] : tally) bins.push_back({v, f});
  return CountHistogram(std::move(bins), a.horizon());
}

/// Truncated predictive pmf of future demand over one replenishment interval.
/// Mass beyond the truncation point is kept in tail().
class DemandPmf {
public:
  DemandPmf() : probs_{1.0} {}

  explicit DemandPmf(std::vector<double> probs, double tail = -1.0) : probs_(std::move(probs)) {
    if (probs_.empty()) throw NumericError("DemandPmf needs at least one probability");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || p > 1.0 + 1e-12) throw NumericError("DemandPmf probability out of [0,1]");
      sum += p;
    }
    tail_ = tail < 0.0 ? std::max(0.0, 1.0 - sum) : tail;
    if (std::abs(sum + tail_ - 1.0) > 1e-9) throw NumericError("DemandPmf does not normalise");
  }

  /// Renormalises an arbitrary signed sequence: negatives clamped to 0, total scaled to 1.
  static DemandPmf sanitized(std::span<const double> values) {
    std::vector<double> p(values.begin(), values.end());
    double sum = 0.0;
    for (double& x : p) {
      if (!std::isfinite(x) || x < 0.0) x = 0.0;
      sum += x;
    }
    if (!(sum > 0.0)) throw NumericError("cannot sanitise a pmf with no positive mass");
    for (double& x : p) x /= sum;
    return DemandPmf(std::move(p), 0.0);
  }

  static DemandPmf poisson(double rate, std::int64_t k_max) {
    std::vector<double> p(static_cast<std::size_t>(k_max) + 1);
    for (std::int64_t k = 0; k <= k_max; ++k) p[static_cast<std::size_t>(k)] = poisson_pmf(rate, k);
    return DemandPmf(std::move(p));
  }

  static DemandPmf point_mass(std::int64_t at) {
    std::vector<double> p(static_cast<std::size_t>(at) + 1, 0.0);
    p.back() = 1.0;
    return DemandPmf(std::move(p), 0.0);
  }

  std::int64_t k_max() const noexcept { return static_cast<std::int64_t>(probs_.size()) - 1; }
  double operator[](std::int64_t k) const noexcept {
    return (k >= 0 && k <= k_max()) ? probs_[static_cast<std::size_t>(k)] : 0.0;
  }
  const std::vector<double>& probabilities() const noexcept { return probs_; }
  double tail() const noexcept { return tail_; }

  double mean() const noexcept {
    double m = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) m += static_cast<double>(k) * probs_[k];
    return m;
  }

private:
  std::vector<double> probs_;
  double tail_ = 0.0;
};

/// Default truncation point for predictive pmfs built from a dataset.
inline std::int64_t default_k_max(const CountHistogram& hist) {
  const double mean_rate = hist.mean() / hist.horizon();
  const auto top = static_cast<std::int64_t>(std::ceil(static_cast<double>(hist.max_value()) / hist.horizon()));
  return top + static_cast<std::int64_t>(std::ceil(10.0 * (1.0 + mean_rate)));
}

}  // namespace ebinv

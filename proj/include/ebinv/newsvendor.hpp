#pragma once

// Single-item newsvendor with a fixed cost of holding the item at all.

#include "ebinv/core.hpp"

namespace ebinv {

struct StockDecision {
  std::int64_t quantity = 0;
  double expected_profit = 0.0;
};

namespace detail {

// P(xi > k) including the truncated tail.
inline double survival(const DemandPmf& pmf, std::int64_t k) {
  double s = pmf.tail();
  for (std::int64_t j = pmf.k_max(); j > k; --j) s += pmf[j];
  return s;
}

inline constexpr double kQuantileTol = 1e-12;

}  // namespace detail

/// r E[min(x, xi)] - b 1(x>0) - c x, and 0 for x = 0.
inline double expected_profit(const DemandPmf& pmf, std::int64_t x, const ItemEconomics& econ) {
  if (x < 0) throw ConfigError("stock quantity must be non-negative");
  if (x == 0) return 0.0;
  double partial = 0.0;
  for (std::int64_t k = 0; k <= std::min(x, pmf.k_max()); ++k) partial += static_cast<double>(k) * pmf[k];
  const double sold = partial + static_cast<double>(x) * detail::survival(pmf, x);
  return econ.revenue * sold - econ.fixed_cost - econ.unit_cost * static_cast<double>(x);
}

/// Smallest k with F(k) > 1 - c/r. Returns 0 when c >= r. If the truncated pmf
/// never reaches the level, the truncation point is returned.
inline std::int64_t critical_quantile(const DemandPmf& pmf, double revenue, double unit_cost) {
  if (!(unit_cost > 0.0)) throw ConfigError("critical_quantile: unit cost must be positive (unbounded stock)");
  if (unit_cost >= revenue) return 0;
  const double level = unit_cost / revenue;
  std::vector<double> surv(static_cast<std::size_t>(pmf.k_max()) + 1);
  double acc = pmf.tail();
  for (std::int64_t k = pmf.k_max(); k >= 0; --k) {
    surv[static_cast<std::size_t>(k)] = acc;
    acc += pmf[k];
  }
  for (std::int64_t k = 0; k <= pmf.k_max(); ++k)
    if (surv[static_cast<std::size_t>(k)] < level - detail::kQuantileTol) return k;
  return pmf.k_max();
}

/// Newsvendor quantile, then the fixed-cost check. When b equals the profit
/// threshold exactly the item is stocked.
inline StockDecision optimal_stock(const DemandPmf& pmf, const ItemEconomics& econ) {
  econ.validate();
  std::int64_t x_star = 0;
  if (econ.unit_cost > 0.0) {
    x_star = critical_quantile(pmf, econ.revenue, econ.unit_cost);
  } else {
    // c = 0: stock the whole truncated support.
    x_star = pmf.k_max();
    while (x_star > 0 && pmf[x_star] == 0.0) --x_star;
  }
  if (x_star == 0) return {};

  double shortfall = 0.0;
  for (std::int64_t k = 0; k <= std::min(x_star, pmf.k_max()); ++k)
    shortfall += static_cast<double>(x_star - k) * pmf[k];
  const double threshold =
      (econ.revenue - econ.unit_cost) * static_cast<double>(x_star) - econ.revenue * shortfall;
  if (econ.fixed_cost > threshold) return {};
  return {x_star, expected_profit(pmf, x_star, econ)};
}

}  // namespace ebinv

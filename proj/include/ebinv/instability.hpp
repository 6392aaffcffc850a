#pragma once

// Exact conjugate posterior next to the generalized Robbins estimate built from the exact marginal.

#include <vector>

#include "ebinv/oracle.hpp"
#include "ebinv/posterior_f.hpp"

namespace ebinv {

struct InstabilityRow {
  std::int64_t k = 0;
  double exact = 0.0;
  double estimate = 0.0;
  int terms_used = 0;
  double max_term = 0.0;
};

/// Rows k = 0..k_max for lambda ~ Gamma(prior) and observed count x over horizon T.
inline std::vector<InstabilityRow> instability_table(const GammaPrior& prior, std::int64_t x, std::int64_t k_max,
                                                     double horizon = 1.0, const GeneralizedRobbinsOptions& opts = {}) {
  prior.validate();
  if (x < 0) throw ConfigError("observed count must be non-negative");
  if (k_max < 0) throw ConfigError("k_max must be non-negative");
  // the table must reach every term the alternating sum may touch
  const auto s_max = x + k_max + opts.cap + 1;
  const auto marginal = MarginalEstimate::exact_table(nb_marginal_table(prior, s_max, horizon), horizon);
  const auto gr = generalized_robbins_pmf(marginal, x, k_max, opts);
  std::vector<InstabilityRow> rows(static_cast<std::size_t>(k_max) + 1);
  for (std::int64_t k = 0; k <= k_max; ++k) {
    auto& r = rows[static_cast<std::size_t>(k)];
    r.k = k;
    r.exact = nb_posterior_pmf(prior, x, k, horizon);
    r.estimate = gr.values[static_cast<std::size_t>(k)];
    r.terms_used = gr.diagnostics[static_cast<std::size_t>(k)].terms_used;
    r.max_term = gr.diagnostics[static_cast<std::size_t>(k)].max_term;
  }
  return rows;
}

}  // namespace ebinv

#pragma once

// Continuous priors over the Poisson rate and their discretisation by quadrature.

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ebinv/mixture.hpp"

namespace ebinv {

/// Gamma(shape alpha, scale theta).
struct GammaPrior {
  double shape = 1.0;
  double scale = 1.0;

  void validate() const {
    if (!(shape > 0.0) || !(scale > 0.0)) throw ConfigError("gamma prior needs shape > 0 and scale > 0");
  }
  double log_pdf(double lambda) const {
    if (lambda < 0.0) return kNegInf;
    if (lambda == 0.0) return shape < 1.0 ? std::numeric_limits<double>::infinity() : (shape == 1.0 ? -std::log(scale) : kNegInf);
    return (shape - 1.0) * std::log(lambda) - lambda / scale - std::lgamma(shape) - shape * std::log(scale);
  }
  double mean() const { return shape * scale; }
  double quantile(double p) const { return scale * boost::math::gamma_p_inv(shape, p); }
};

/// Weibull(shape alpha, scale beta): density (alpha/beta)(x/beta)^(alpha-1) exp(-(x/beta)^alpha).
struct WeibullPrior {
  double shape = 1.8;
  double scale = 3.0;

  void validate() const {
    if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale))
      throw ConfigError("Weibull prior needs shape > 0 and scale > 0");
  }
  double log_pdf(double lambda) const {
    if (lambda < 0.0) return kNegInf;
    if (lambda == 0.0) return shape < 1.0 ? std::numeric_limits<double>::infinity() : (shape == 1.0 ? -std::log(scale) : kNegInf);
    const double z = lambda / scale;
    return std::log(shape / scale) + (shape - 1.0) * std::log(z) - std::pow(z, shape);
  }
  double mean() const { return scale * std::tgamma(1.0 + 1.0 / shape); }
  double variance() const {
    const double m = std::tgamma(1.0 + 1.0 / shape);
    return scale * scale * (std::tgamma(1.0 + 2.0 / shape) - m * m);
  }
  double mode() const { return std::pow(std::max(0.0, 1.0 - 1.0 / shape), 1.0 / shape) * scale; }
  double quantile(double p) const { return scale * std::pow(-std::log1p(-p), 1.0 / shape); }
  /// Inverse-CDF draw from a uniform u in (0,1).
  double from_uniform(double u) const { return scale * std::pow(-std::log(u), 1.0 / shape); }
};

/// Half-Normal with scale sigma: density sqrt(2/pi)/sigma exp(-x^2/(2 sigma^2)), x >= 0.
struct HalfNormalPrior {
  double sigma = 1.0;

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("half-normal prior needs sigma > 0");
  }
  double log_pdf(double lambda) const {
    if (lambda < 0.0) return kNegInf;
    const double z = lambda / sigma;
    return 0.5 * std::log(2.0 / std::numbers::pi) - std::log(sigma) - 0.5 * z * z;
  }
  double mean() const { return sigma * std::sqrt(2.0 / std::numbers::pi); }
  double quantile(double p) const { return sigma * std::sqrt(2.0) * boost::math::erf_inv(p); }
};

struct QuadratureOptions {
  int panels = 256;
  /// Smallest upper integration limit; the prior's own 1 - 1e-14 quantile is also covered.
  double min_upper = 0.0;
};

/// Discretises a continuous prior into a finite mixture by composite Gauss-Legendre
/// quadrature on lambda = L v^2, v in [0,1]. Nodes are strictly inside (0, L).
template <class Prior>
DiscreteMixture discretize(const Prior& prior, const QuadratureOptions& opts = {}) {
  prior.validate();
  if (opts.panels < 1) throw ConfigError("quadrature needs at least one panel");
  using Rule = boost::math::quadrature::gauss<double, 16>;
  const auto& half_nodes = Rule::abscissa();
  const auto& half_weights = Rule::weights();
  std::vector<double> nodes, weights;
  for (std::size_t i = 0; i < half_nodes.size(); ++i) {
    nodes.push_back(half_nodes[i]);
    weights.push_back(half_weights[i]);
    if (half_nodes[i] != 0.0) {
      nodes.push_back(-half_nodes[i]);
      weights.push_back(half_weights[i]);
    }
  }

  const double upper = std::max(opts.min_upper, prior.quantile(1.0 - 1e-14));
  const double h = 1.0 / opts.panels;
  std::vector<double> atoms, log_w;
  atoms.reserve(nodes.size() * static_cast<std::size_t>(opts.panels));
  log_w.reserve(atoms.capacity());
  for (int p = 0; p < opts.panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double v = mid + 0.5 * h * nodes[i];
      const double lambda = upper * v * v;
      atoms.push_back(lambda);
      log_w.push_back(std::log(0.5 * h * weights[i] * 2.0 * upper * v) + prior.log_pdf(lambda));
    }
  }
  const double norm = log_sum_exp(log_w);
  if (!std::isfinite(norm)) throw NumericError("prior quadrature has no mass");
  std::vector<double> w(log_w.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::exp(log_w[j] - norm);
  return DiscreteMixture::normalized(std::move(atoms), std::move(w));
}

}  // namespace ebinv

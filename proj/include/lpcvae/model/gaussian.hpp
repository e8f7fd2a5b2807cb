#pragma once

#include <cmath>
#include <numbers>

#include "lpcvae/autodiff.hpp"

namespace lpcvae::model {

using ad::Tensor;

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// Diagonal Gaussian; rows index windows when batched.
struct GaussianParams {
  Tensor mu;
  Tensor sigma;

  bool defined() const { return mu.defined() && sigma.defined(); }
};

/// Builds a Gaussian head from an unconstrained log-variance, clamped to
/// [-10, 10] so that sigma stays within [e^-5, e^5].
inline GaussianParams from_logvar(const Tensor& mu, const Tensor& logvar) {
  return {mu, ad::exp(ad::mul_scalar(ad::clamp(logvar, kLogVarMin, kLogVarMax), 0.5))};
}

/// Product of two Gaussian experts: precisions add and the mean is the
/// precision-weighted average.
inline GaussianParams poe_fuse(const GaussianParams& a, const GaussianParams& b) {
  if (a.mu.shape() != b.mu.shape() || a.sigma.shape() != a.mu.shape() ||
      b.sigma.shape() != b.mu.shape())
    throw DimensionError("poe_fuse: expert shapes " + ad::shape_str(a.mu.shape()) + " and " +
                         ad::shape_str(b.mu.shape()) + " differ");
  for (const auto* s : {&a.sigma, &b.sigma})
    for (double v : s->data())
      if (!(v > 0.0)) throw ContractError("poe_fuse: expert sigma must be positive");
  const Tensor one = Tensor::scalar(1.0);
  const Tensor prec_a = one / ad::square(a.sigma);
  const Tensor prec_b = one / ad::square(b.sigma);
  const Tensor var = one / (prec_a + prec_b);
  const Tensor mu = var * (a.mu * prec_a + b.mu * prec_b);
  return {mu, ad::sqrt(var)};
}

/// z = mu + sigma ⊙ eps with caller-supplied noise (no gradient to eps).
inline Tensor reparameterize(const GaussianParams& q, const Tensor& eps) {
  return q.mu + q.sigma * eps;
}

inline Tensor reparameterize(const GaussianParams& q, Rng& rng) {
  std::vector<double> eps(q.mu.numel());
  for (double& e : eps) e = rng.normal();
  return reparameterize(q, Tensor(q.mu.shape(), std::move(eps)));
}

inline double log_normal_density(double x, double mu, double sigma) {
  const double r = (x - mu) / sigma;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma) - 0.5 * r * r;
}

}  // namespace lpcvae::model

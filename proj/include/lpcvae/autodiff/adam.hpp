#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lpcvae/autodiff/tensor.hpp"

namespace lpcvae::ad {

struct AdamState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam_state(std::span<const Tensor> params, double lr) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.numel();
  AdamState s;
  s.lr = lr;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

/// One bias-corrected Adam update using each parameter's accumulated grad.
/// Parameters without a grad buffer are treated as having zero gradient.
inline void adam_step(std::span<Tensor> params, AdamState& state) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.numel();
  if (state.m.size() != n || state.v.size() != n)
    throw ContractError("adam_step: optimizer state holds " + std::to_string(state.m.size()) +
                        " moments for " + std::to_string(n) + " parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  std::size_t off = 0;
  for (auto& p : params) {
    auto data = p.mutable_data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i, ++off) {
      const double g = grad.empty() ? 0.0 : grad[i];
      double& m = state.m[off];
      double& v = state.v[off];
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g * g;
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      data[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace lpcvae::ad

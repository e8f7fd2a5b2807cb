#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "lpcvae/autodiff/tensor.hpp"

namespace lpcvae::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares tape gradients of the scalar function `f` with central finite
/// differences for every element of every tensor in `inputs`. `f` must build
/// its graph from the current contents of the inputs and be deterministic
/// (re-seed any sampling inside it). Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8).
inline GradCheckResult finite_diff_check(const std::function<Tensor()>& f,
                                         std::vector<Tensor> inputs, double h = 1e-5) {
  for (auto& x : inputs) x.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = f();
    tape.backward(loss);
  }
  GradCheckResult res;
  NoGradScope no_grad;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& x = inputs[t];
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    auto data = x.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = f().item();
      data[i] = orig - h;
      const double fm = f().item();
      data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      double err = std::abs(analytic[i] - numeric) / denom;
      if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_tensor = t;
        res.worst_index = i;
        res.analytic = analytic[i];
        res.numeric = numeric;
      }
    }
  }
  return res;
}

inline GradCheckResult finite_diff_check(const std::function<Tensor()>& f, const Tensor& x,
                                         double h = 1e-5) {
  return finite_diff_check(f, std::vector<Tensor>{x}, h);
}

}  // namespace lpcvae::ad

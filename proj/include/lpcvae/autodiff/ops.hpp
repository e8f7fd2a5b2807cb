#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lpcvae/autodiff/tensor.hpp"
#include "lpcvae/rng.hpp"

namespace lpcvae::ad {

namespace detail {

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
}

// Pointwise unary map; `deriv(x, y)` returns dy/dx from input and output.
template <class F, class D>
Tensor unary(const char* op, const Tensor& x, F f, D deriv) {
  std::vector<double> out(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xs[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [x, deriv](Node& o) {
    auto& gx = x.node()->grad_buffer();
    auto xs = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * deriv(xs[i], o.data[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor relu(const Tensor& x) {
  return detail::unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                       [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary("tanh", x, [](double v) { return std::tanh(v); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary("exp", x, [](double v) { return std::exp(v); },
                       [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  auto xs = x.data();
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!(xs[i] > 0.0))
      throw NumericDomainError("log: non-positive input " + std::to_string(xs[i]) + " at index " +
                               std::to_string(i));
  return detail::unary("log", x, [](double v) { return std::log(v); },
                       [](double v, double) { return 1.0 / v; });
}

inline Tensor sqrt(const Tensor& x) {
  auto xs = x.data();
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!(xs[i] > 0.0))
      throw NumericDomainError("sqrt: non-positive input " + std::to_string(xs[i]) + " at index " +
                               std::to_string(i));
  return detail::unary("sqrt", x, [](double v) { return std::sqrt(v); },
                       [](double, double y) { return 0.5 / y; });
}

inline Tensor neg(const Tensor& x) {
  return detail::unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary("square", x, [](double v) { return v * v; },
                       [](double v, double) { return 2.0 * v; });
}

/// Clamp to [lo, hi]; gradient passes only strictly inside the interval.
inline Tensor clamp(const Tensor& x, double lo, double hi) {
  return detail::unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
                       [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

inline Tensor add_scalar(const Tensor& x, double s) {
  return detail::unary("add_scalar", x, [s](double v) { return v + s; },
                       [](double, double) { return 1.0; });
}

inline Tensor mul_scalar(const Tensor& x, double s) {
  return detail::unary("mul_scalar", x, [s](double v) { return v * s; },
                       [s](double, double) { return s; });
}

namespace detail {

// Binary op on equal shapes, or with a one-element operand treated as a scalar.
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  if (!a_scalar && !b_scalar) require_same_shape(op, a, b);
  const Shape shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = a_scalar ? b.numel() : a.numel();
  std::vector<double> out(n);
  auto as = a.data();
  auto bs = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(as[a_scalar ? 0 : i], bs[b_scalar ? 0 : i]);
  return make_result(op, shape, std::move(out), {a, b}, [a, b, a_scalar, b_scalar, da, db](Node& o) {
    auto as = a.data();
    auto bs = b.data();
    const std::size_t n = o.grad.size();
    if (wants_grad(a)) {
      auto& ga = a.node()->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        ga[a_scalar ? 0 : i] += o.grad[i] * da(as[a_scalar ? 0 : i], bs[b_scalar ? 0 : i]);
    }
    if (wants_grad(b)) {
      auto& gb = b.node()->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        gb[b_scalar ? 0 : i] += o.grad[i] * db(as[a_scalar ? 0 : i], bs[b_scalar ? 0 : i]);
    }
  });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  auto bs = b.data();
  for (std::size_t i = 0; i < bs.size(); ++i)
    if (bs[i] == 0.0)
      throw NumericDomainError("div: zero divisor at index " + std::to_string(i));
  return detail::binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---------------------------------------------------------------------------
// Reductions and shape manipulation

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return detail::make_result("sum", {1}, {s}, {x}, [x](Node& o) {
    auto& gx = x.node()->grad_buffer();
    for (double& g : gx) g += o.grad[0];
  });
}

inline Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel())); }

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return detail::make_result("reshape", std::move(shape), std::move(out), {x}, [x](Node& o) {
    auto& gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
  });
}

namespace detail {
inline std::pair<std::size_t, std::size_t> as_matrix(const Tensor& t) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw DimensionError("expected a vector or matrix, got " + shape_str(t.shape()));
}
}  // namespace detail

/// Concatenates along the last axis. Inputs are vectors or matrices with the
/// same number of rows.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const auto [rows, c0] = detail::as_matrix(parts[0]);
  (void)c0;
  const bool vec = parts[0].rank() == 1;
  std::vector<std::size_t> cols;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto [r, c] = detail::as_matrix(p);
    if (r != rows || (p.rank() == 1) != vec)
      throw DimensionError("concat: " + shape_str(p.shape()) + " incompatible with " +
                           shape_str(parts[0].shape()));
    cols.push_back(c);
    total += c;
  }
  std::vector<double> out(rows * total);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto d = parts[k].data();
      std::copy_n(d.begin() + r * cols[k], cols[k], out.begin() + r * total + off);
      off += cols[k];
    }
  }
  Shape shape = vec ? Shape{total} : Shape{rows, total};
  return detail::make_result_n("concat", std::move(shape), std::move(out), parts,
                               [parts, cols, rows, total](Node& o) {
                                 std::size_t off = 0;
                                 for (std::size_t k = 0; k < parts.size(); ++k) {
                                   if (detail::wants_grad(parts[k])) {
                                     auto& g = parts[k].node()->grad_buffer();
                                     for (std::size_t r = 0; r < rows; ++r)
                                       for (std::size_t c = 0; c < cols[k]; ++c)
                                         g[r * cols[k] + c] += o.grad[r * total + off + c];
                                   }
                                   off += cols[k];
                                 }
                               });
}

/// Columns [begin, end) of a vector or matrix.
inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const auto [rows, cols] = detail::as_matrix(x);
  if (begin >= end || end > cols)
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_str(x.shape()));
  const std::size_t w = end - begin;
  std::vector<double> out(rows * w);
  auto d = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(d.begin() + r * cols + begin, w, out.begin() + r * w);
  Shape shape = x.rank() == 1 ? Shape{w} : Shape{rows, w};
  return detail::make_result("slice_cols", std::move(shape), std::move(out), {x},
                             [x, rows, cols, begin, w](Node& o) {
                               auto& g = x.node()->grad_buffer();
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t c = 0; c < w; ++c)
                                   g[r * cols + begin + c] += o.grad[r * w + c];
                             });
}

/// Row `r` of a matrix, as a vector.
inline Tensor row(const Tensor& x, std::size_t r) {
  if (x.rank() != 2 || r >= x.dim(0))
    throw DimensionError("row: index " + std::to_string(r) + " outside " + shape_str(x.shape()));
  const std::size_t cols = x.dim(1);
  std::vector<double> out(x.data().begin() + r * cols, x.data().begin() + (r + 1) * cols);
  return detail::make_result("row", {cols}, std::move(out), {x}, [x, r, cols](Node& o) {
    auto& g = x.node()->grad_buffer();
    for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += o.grad[c];
  });
}

/// Stacks equal-length vectors into a matrix, one per row.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const std::size_t cols = rows[0].numel();
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.numel() != cols)
      throw DimensionError("stack_rows: " + shape_str(r.shape()) + " is not a length-" +
                           std::to_string(cols) + " vector");
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  return detail::make_result_n("stack_rows", {rows.size(), cols}, std::move(out), rows,
                               [rows, cols](Node& o) {
                                 for (std::size_t k = 0; k < rows.size(); ++k) {
                                   if (!detail::wants_grad(rows[k])) continue;
                                   auto& g = rows[k].node()->grad_buffer();
                                   for (std::size_t c = 0; c < cols; ++c) g[c] += o.grad[k * cols + c];
                                 }
                               });
}

// ---------------------------------------------------------------------------
// Dense algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner dimensions of " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " disagree");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  return detail::make_result("matmul", {m, n}, std::move(out), {a, b}, [a, b, m, k, n](Node& o) {
    auto A = a.data();
    auto B = b.data();
    const auto& G = o.grad;
    if (detail::wants_grad(a)) {  // dA = dC * B^T
      auto& ga = a.node()->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (detail::wants_grad(b)) {  // dB = A^T * dC
      auto& gb = b.node()->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

/// Affine map x·W + b for x of shape [k] or [m×k], W [k×n], b [n].
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const auto [m, k] = detail::as_matrix(x);
  if (weight.rank() != 2 || weight.dim(0) != k || bias.numel() != weight.dim(1))
    throw DimensionError("linear: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));
  const std::size_t n = weight.dim(1);
  std::vector<double> out(m * n);
  auto X = x.data();
  auto W = weight.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    std::copy(bv.begin(), bv.end(), orow);
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = X[i * k + p];
      if (xv == 0.0) continue;
      const double* wrow = W.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += xv * wrow[j];
    }
  }
  Shape shape = x.rank() == 1 ? Shape{n} : Shape{m, n};
  return detail::make_result("linear", std::move(shape), std::move(out), {x, weight, bias},
                             [x, weight, bias, m, k, n](Node& o) {
                               auto X = x.data();
                               auto W = weight.data();
                               const auto& G = o.grad;
                               if (detail::wants_grad(x)) {
                                 auto& gx = x.node()->grad_buffer();
                                 for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t p = 0; p < k; ++p) {
                                     double s = 0.0;
                                     const double* wrow = W.data() + p * n;
                                     const double* grow = G.data() + i * n;
                                     for (std::size_t j = 0; j < n; ++j) s += grow[j] * wrow[j];
                                     gx[i * k + p] += s;
                                   }
                               }
                               if (detail::wants_grad(weight)) {
                                 auto& gw = weight.node()->grad_buffer();
                                 for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t p = 0; p < k; ++p) {
                                     const double xv = X[i * k + p];
                                     if (xv == 0.0) continue;
                                     double* gwrow = gw.data() + p * n;
                                     const double* grow = G.data() + i * n;
                                     for (std::size_t j = 0; j < n; ++j) gwrow[j] += xv * grow[j];
                                   }
                               }
                               if (detail::wants_grad(bias)) {
                                 auto& gb = bias.node()->grad_buffer();
                                 for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t j = 0; j < n; ++j) gb[j] += G[i * n + j];
                               }
                             });
}

// ---------------------------------------------------------------------------
// Convolution and pooling

/// Cross-correlation of x ([C_in×w] or [B×C_in×w]) with kernel
/// [C_out×C_in×k] plus bias [C_out], zero-padded by `padding` on both sides.
inline Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t padding) {
  if (x.rank() != 2 && x.rank() != 3)
    throw DimensionError("conv1d: input must be [C×w] or [B×C×w], got " + shape_str(x.shape()));
  const bool batched = x.rank() == 3;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t cin = x.dim(batched ? 1 : 0);
  const std::size_t w = x.dim(batched ? 2 : 1);
  if (kernel.rank() != 3 || kernel.dim(1) != cin || bias.numel() != kernel.dim(0))
    throw DimensionError("conv1d: input " + shape_str(x.shape()) + ", kernel " +
                         shape_str(kernel.shape()) + ", bias " + shape_str(bias.shape()));
  const std::size_t cout = kernel.dim(0);
  const std::size_t k = kernel.dim(2);
  if (k > w + 2 * padding)
    throw DimensionError("conv1d: kernel width " + std::to_string(k) + " exceeds padded input " +
                         std::to_string(w + 2 * padding));
  const std::size_t wout = w + 2 * padding - k + 1;
  const long pad = static_cast<long>(padding);
  const long wl = static_cast<long>(w);

  std::vector<double> out(batch * cout * wout);
  auto X = x.data();
  auto K = kernel.data();
  auto bv = bias.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t co = 0; co < cout; ++co) {
      double* orow = out.data() + (b * cout + co) * wout;
      std::fill(orow, orow + wout, bv[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xrow = X.data() + (b * cin + ci) * w;
        const double* krow = K.data() + (co * cin + ci) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const double kv = krow[j];
          for (std::size_t t = 0; t < wout; ++t) {
            const long src = static_cast<long>(t + j) - pad;
            if (src >= 0 && src < wl) orow[t] += kv * xrow[src];
          }
        }
      }
    }
  Shape shape = batched ? Shape{batch, cout, wout} : Shape{cout, wout};
  return detail::make_result(
      "conv1d", std::move(shape), std::move(out), {x, kernel, bias},
      [x, kernel, bias, batch, cin, cout, w, k, wout, pad, wl](Node& o) {
        auto X = x.data();
        auto K = kernel.data();
        const auto& G = o.grad;
        const bool gx_on = detail::wants_grad(x);
        const bool gk_on = detail::wants_grad(kernel);
        double* gx = gx_on ? x.node()->grad_buffer().data() : nullptr;
        double* gk = gk_on ? kernel.node()->grad_buffer().data() : nullptr;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t co = 0; co < cout; ++co) {
            const double* grow = G.data() + (b * cout + co) * wout;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* xrow = X.data() + (b * cin + ci) * w;
              const double* krow = K.data() + (co * cin + ci) * k;
              for (std::size_t j = 0; j < k; ++j) {
                double acc = 0.0;
                for (std::size_t t = 0; t < wout; ++t) {
                  const long src = static_cast<long>(t + j) - pad;
                  if (src < 0 || src >= wl) continue;
                  acc += grow[t] * xrow[src];
                  if (gx_on) gx[(b * cin + ci) * w + src] += grow[t] * krow[j];
                }
                if (gk_on) gk[(co * cin + ci) * k + j] += acc;
              }
            }
          }
        if (detail::wants_grad(bias)) {
          auto& gb = bias.node()->grad_buffer();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t co = 0; co < cout; ++co) {
              const double* grow = G.data() + (b * cout + co) * wout;
              for (std::size_t t = 0; t < wout; ++t) gb[co] += grow[t];
            }
        }
      });
}

/// Non-overlapping max over the last axis. Ties route the gradient to the
/// first maximal index.
inline Tensor maxpool1d(const Tensor& x, std::size_t pool) {
  if (pool == 0) throw ConfigError("maxpool1d: pool must be >= 1");
  const std::size_t w = x.shape().back();
  if (w % pool != 0)
    throw ConfigError("maxpool1d: pool " + std::to_string(pool) + " does not divide width " +
                      std::to_string(w));
  const std::size_t rows = x.numel() / w;
  const std::size_t wout = w / pool;
  std::vector<double> out(rows * wout);
  std::vector<std::size_t> arg(rows * wout);
  auto X = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < wout; ++t) {
      std::size_t best = r * w + t * pool;
      for (std::size_t j = 1; j < pool; ++j) {
        const std::size_t idx = r * w + t * pool + j;
        if (X[idx] > X[best]) best = idx;
      }
      out[r * wout + t] = X[best];
      arg[r * wout + t] = best;
    }
  Shape shape = x.shape();
  shape.back() = wout;
  return detail::make_result("maxpool1d", std::move(shape), std::move(out), {x},
                             [x, arg = std::move(arg)](Node& o) {
                               auto& gx = x.node()->grad_buffer();
                               for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += o.grad[i];
                             });
}

// ---------------------------------------------------------------------------
// Stochastic

/// Inverted dropout: survivors are scaled by 1/(1-rate) while training; the
/// evaluation path returns the input handle unchanged.
inline Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0) || rate >= 1.0)
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : scale;
  std::vector<double> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * mask[i];
  return detail::make_result("dropout", x.shape(), std::move(out), {x},
                             [x, mask = std::move(mask)](Node& o) {
                               auto& gx = x.node()->grad_buffer();
                               for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * mask[i];
                             });
}

}  // namespace lpcvae::ad
